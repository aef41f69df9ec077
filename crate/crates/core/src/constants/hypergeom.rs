//! Exact hypergeometric expectations and the limiting constant `C(eta)`.
//!
//! `y_k` counts G-observations among the `k` smallest of `2n` pooled values
//! with `n` from each sample; under the null it is hypergeometric with
//! population `2n`, `n` successes and `k` draws. `C(eta)` is the limit of
//!
//! ```text
//! sum_{k=1}^{2n} E log(1 + eta (2 y_k / k - 1)) + (eta^2 / 2) log(2n).
//! ```

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// A value `hi + lo` carried with twice the working precision.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    // Knuth's two-sum: `a + b = s + e` exactly.
    #[inline]
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    #[inline]
    fn add(self, other: DoubleDouble) -> DoubleDouble {
        let (s, e) = Self::two_sum(self.hi, other.hi);
        let (hi, lo) = Self::two_sum(s, e + self.lo + other.lo);
        DoubleDouble { hi, lo }
    }

    #[inline]
    fn neg(self) -> DoubleDouble {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Table of `ln(i!)` for `i = 0..=max`, accumulated in double-double so the
/// differences in [`LogFactorials::ln_choose`] keep full precision even
/// when `ln(i!)` is in the tens of thousands.
#[derive(Debug, Clone)]
pub struct LogFactorials {
    table: Vec<DoubleDouble>,
}

impl LogFactorials {
    pub fn new(max: usize) -> Self {
        let mut table = Vec::with_capacity(max + 1);
        let mut acc = DoubleDouble { hi: 0.0, lo: 0.0 };
        table.push(acc);
        for i in 1..=max {
            acc = acc.add(DoubleDouble {
                hi: (i as f64).ln(),
                lo: 0.0,
            });
            table.push(acc);
        }
        LogFactorials { table }
    }

    pub fn max(&self) -> usize {
        self.table.len() - 1
    }

    #[inline]
    pub fn ln_fact(&self, i: usize) -> f64 {
        self.table[i].value()
    }

    #[inline]
    fn ln_choose_dd(&self, n: usize, k: usize) -> DoubleDouble {
        self.table[n]
            .add(self.table[k].neg())
            .add(self.table[n - k].neg())
    }

    #[inline]
    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        self.ln_choose_dd(n, k).value()
    }
}

/// Support of hypergeometric(2n, n, k): `max(0, k-n) ..= min(k, n)`.
pub fn hypergeom_support(n: usize, k: usize) -> (usize, usize) {
    (k.saturating_sub(n), k.min(n))
}

/// `P(y_k = y)` for `y_k ~ hypergeometric(2n, n, k)`, evaluated in log space.
pub fn hypergeom_pmf(lf: &LogFactorials, n: usize, k: usize, y: usize) -> f64 {
    let (lo, hi) = hypergeom_support(n, k);
    if y < lo || y > hi {
        return 0.0;
    }
    lf.ln_choose_dd(n, y)
        .add(lf.ln_choose_dd(n, k - y))
        .add(lf.ln_choose_dd(2 * n, k).neg())
        .value()
        .exp()
}

fn check_args(n: usize, k: usize, eta: f64) -> Result<()> {
    if n == 0 || k == 0 || k > 2 * n {
        return Err(Error::Domain(format!(
            "need 1 <= k <= 2n, got n={n}, k={k}"
        )));
    }
    if !eta.is_finite() {
        return Err(Error::Domain(format!("eta must be finite, got {eta}")));
    }
    Ok(())
}

/// Exact `E log(1 + eta (2 y_k / k - 1))`.
pub fn hypergeom_e_log(n: usize, k: usize, eta: f64) -> Result<f64> {
    check_args(n, k, eta)?;
    let lf = LogFactorials::new(2 * n);
    e_log_with(&lf, n, k, eta)
}

/// Same as [`hypergeom_e_log`] with a caller-supplied factorial table.
///
/// Terms further than 15 standard deviations from `k/2` are skipped; their
/// total mass is below `1e-45`.
pub fn e_log_with(lf: &LogFactorials, n: usize, k: usize, eta: f64) -> Result<f64> {
    check_args(n, k, eta)?;
    if lf.max() < 2 * n {
        return Err(Error::Domain(format!(
            "factorial table up to {} is too short for n={n}",
            lf.max()
        )));
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = hypergeom_support(n, k);
    let kf = k as f64;
    let sd = (kf / 4.0 * (2 * n - k) as f64 / (2 * n - 1).max(1) as f64).sqrt();
    let reach = (15.0 * sd + 10.0).ceil() as usize;
    let lo = lo.max((k / 2).saturating_sub(reach));
    let hi = hi.min(k / 2 + reach + 1);
    let log_norm = lf.ln_choose(2 * n, k);
    let mut acc = 0.0;
    for y in lo..=hi {
        let arg = 1.0 + eta * (2.0 * y as f64 / kf - 1.0);
        if arg <= 0.0 {
            return Err(Error::Domain(format!(
                "log argument {arg} is not positive at y={y}, k={k}, eta={eta}"
            )));
        }
        let p = (lf.ln_choose(n, y) + lf.ln_choose(n, k - y) - log_norm).exp();
        acc += p * arg.ln();
    }
    Ok(acc)
}

/// `sum_{k=1}^{2n} E log(1 + eta (2 y_k / k - 1)) + (eta^2/2) log(2n)`.
pub fn c_eta_partial(n: usize, eta: f64) -> Result<f64> {
    let lf = LogFactorials::new(2 * n);
    partial_with(&lf, n, eta)
}

fn partial_with(lf: &LogFactorials, n: usize, eta: f64) -> Result<f64> {
    let terms = (1..=2 * n)
        .into_par_iter()
        .map(|k| e_log_with(lf, n, k, eta))
        .collect::<Result<Vec<f64>>>()?;
    let sum: f64 = terms.iter().sum();
    Ok(sum + 0.5 * eta * eta * ((2 * n) as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CEtaResult {
    pub eta: f64,
    /// Partial values on the doubling grid `50, 100, 200, ...`.
    pub partial: BTreeMap<usize, f64>,
    pub extrapolated: f64,
    pub err_estimate: f64,
    /// Set when the successive differences do not shrink monotonically.
    pub warning: Option<String>,
}

/// Extrapolates `C(eta)` from partial sums on the grid `50 * 2^j <= n_max`.
///
/// With three or more grid points the tail is modelled as
/// `C + (c1 ln n + c2) / n`, which is the form the second-order Taylor
/// expansion of the summand produces; with two points the model drops the
/// logarithmic term.
pub fn c_eta(eta: f64, n_max: usize) -> Result<CEtaResult> {
    if !(eta.abs() < 1.0) {
        return Err(Error::Domain(format!("|eta| must be below 1, got {eta}")));
    }
    if n_max < 50 {
        return Err(Error::Domain(format!(
            "n_max must be at least 50, got {n_max}"
        )));
    }
    let grid: Vec<usize> = std::iter::successors(Some(50usize), |n| Some(n * 2))
        .take_while(|&n| n <= n_max)
        .collect();
    if eta == 0.0 {
        return Ok(CEtaResult {
            eta,
            partial: grid.iter().map(|&n| (n, 0.0)).collect(),
            extrapolated: 0.0,
            err_estimate: 0.0,
            warning: None,
        });
    }
    let lf = LogFactorials::new(2 * grid[grid.len() - 1]);
    let values = grid
        .iter()
        .map(|&n| partial_with(&lf, n, eta))
        .collect::<Result<Vec<f64>>>()?;

    let last = values.len() - 1;
    let (extrapolated, previous) = match values.len() {
        1 => (values[0], values[0]),
        2 => (2.0 * values[1] - values[0], values[1]),
        _ => {
            let fit = |i: usize| {
                extrapolate_three(
                    [grid[i - 2], grid[i - 1], grid[i]],
                    [values[i - 2], values[i - 1], values[i]],
                )
            };
            let prev = if last >= 3 {
                fit(last - 1)
            } else {
                2.0 * values[last] - values[last - 1]
            };
            (fit(last), prev)
        }
    };

    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let warning = if diffs.windows(2).any(|d| d[1] > d[0] + 1e-15) {
        Some(format!(
            "partial sums are not Cauchy on the grid: {diffs:?}"
        ))
    } else {
        None
    };
    let err_estimate = (values[last] - extrapolated)
        .abs()
        .max((extrapolated - previous).abs());

    Ok(CEtaResult {
        eta,
        partial: grid.into_iter().zip(values).collect(),
        extrapolated,
        err_estimate,
        warning,
    })
}

/// Solves `p_i = C + (a ln n_i + c) / n_i` for `C` given three points.
fn extrapolate_three(n: [usize; 3], p: [f64; 3]) -> f64 {
    // Multiply through by n_i: n_i p_i = C n_i + a ln n_i + c, linear in (C, a, c).
    let rows: Vec<[f64; 4]> = (0..3)
        .map(|i| {
            let ni = n[i] as f64;
            [ni, ni.ln(), 1.0, ni * p[i]]
        })
        .collect();
    solve3(rows)[0]
}

fn solve3(mut m: Vec<[f64; 4]>) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        for row in 0..3 {
            if row != col {
                let pivot_row = m[col];
                let factor = m[row][col] / pivot_row[col];
                for (v, p) in m[row].iter_mut().zip(pivot_row).skip(col) {
                    *v -= factor * p;
                }
            }
        }
    }
    [m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_sums_to_one() {
        let lf = LogFactorials::new(400);
        for n in [1usize, 2, 7, 50, 200] {
            for k in [1, n, 2 * n - 1, 2 * n] {
                if k == 0 {
                    continue;
                }
                let (lo, hi) = hypergeom_support(n, k);
                let total: f64 = (lo..=hi).map(|y| hypergeom_pmf(&lf, n, k, y)).sum();
                assert!((total - 1.0).abs() < 1e-13, "n={n} k={k} total={total}");
            }
        }
    }

    #[test]
    fn pmf_matches_direct_counting() {
        // n=2, k=2: C(2,y)C(2,2-y)/C(4,2) = 1/6, 4/6, 1/6.
        let lf = LogFactorials::new(4);
        let p: Vec<f64> = (0..=2).map(|y| hypergeom_pmf(&lf, 2, 2, y)).collect();
        for (got, want) in p.iter().zip([1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn k_equal_one_is_two_point() {
        let v = hypergeom_e_log(10, 1, 1.0 / 3.0).unwrap();
        let want = 0.5 * (8.0f64 / 9.0).ln();
        assert!((v - want).abs() < 1e-15, "{v} vs {want}");
        assert!((v + 0.058_892).abs() < 1e-6);
    }

    #[test]
    fn degenerate_cases_are_zero() {
        for n in [1usize, 5, 40] {
            for k in 1..=2 * n {
                assert_eq!(hypergeom_e_log(n, k, 0.0).unwrap(), 0.0);
            }
            assert!(hypergeom_e_log(n, 2 * n, 0.4).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn truncated_window_matches_full_sum() {
        let n = 300;
        let lf = LogFactorials::new(2 * n);
        for k in [1usize, 17, 300, 599] {
            let (lo, hi) = hypergeom_support(n, k);
            let full: f64 = (lo..=hi)
                .map(|y| {
                    hypergeom_pmf(&lf, n, k, y)
                        * (1.0 + 0.4 * (2.0 * y as f64 / k as f64 - 1.0)).ln()
                })
                .sum();
            let windowed = e_log_with(&lf, n, k, 0.4).unwrap();
            assert!((full - windowed).abs() < 1e-15);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(hypergeom_e_log(3, 0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(hypergeom_e_log(3, 7, 0.1), Err(Error::Domain(_))));
        // eta = 1 hits log(0) at y = 0.
        assert!(matches!(hypergeom_e_log(3, 2, -1.5), Err(Error::Domain(_))));
        assert!(matches!(c_eta(1.0, 100), Err(Error::Domain(_))));
        assert!(matches!(c_eta(0.1, 49), Err(Error::Domain(_))));
    }

    #[test]
    fn three_point_fit_is_exact_on_its_model() {
        let model = |n: f64| 0.7 + (0.3 * n.ln() - 2.0) / n;
        let n = [100usize, 200, 400];
        let p = n.map(|v| model(v as f64));
        assert!((extrapolate_three(n, p) - 0.7).abs() < 1e-12);
    }
}
