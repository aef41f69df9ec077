//! Two-sample rank SPRT for Lehmann alternatives `G = F^Delta`.
//!
//! After `n` pairs, with `y_k` the number of G-observations among the `k`
//! smallest of the `2n` pooled values, the rank log-likelihood ratio is
//!
//! ```text
//! Z_n = n log Delta + sum_{k=1}^{2n} [log k - log(k + (Delta - 1) y_k)].
//! ```
//!
//! `Z_n` splits into a random walk `S_n` with drift `mu` and a perturbation
//! `xi_n` of order `sqrt(log n)` (see [`decompose`] and [`xi_scaling`]).

mod decompose;
mod xi_scaling;

pub use decompose::{
    decompose, decompose_pairs, pair_increment, sample_pair, sample_pairs, xi_null_closed_form,
    DecompositionSample,
};
pub use xi_scaling::{xi_scaling_check, XiScalingReport, XiScalingRow};

use serde::{Deserialize, Serialize};

use crate::constants::{drift_mu, eta_of, QuadratureSpec};
use crate::renewal::{CrossingRecord, RenewalConstants};
use crate::rng_models::{replicate, ReplicationRng};
use crate::stats::SampleStats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankSprtConfig {
    /// Exponent of the tested alternative `G = F^Delta`.
    pub delta: f64,
    /// Exponent of the data-generating law `G = F^A`.
    pub a_exp: f64,
    /// Lower log-boundary: stop when `Z_n < -a`.
    pub a: f64,
    /// Upper log-boundary: stop when `Z_n > b`.
    pub b: f64,
}

impl RankSprtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!(
                "Delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.a_exp > 0.0 && self.a_exp.is_finite()) {
            return Err(Error::Config(format!(
                "A must be positive, got {}",
                self.a_exp
            )));
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::Config(format!(
                "boundaries must be positive, got a={}, b={}",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

#[inline]
fn savage_term(k: usize, y: u32, delta_minus_one: f64) -> f64 {
    let kf = k as f64;
    kf.ln() - (kf + delta_minus_one * y as f64).ln()
}

/// Rank log-likelihood from G-flags listed in increasing order of value.
pub fn rank_loglik(g_flags: &[bool], delta: f64) -> Result<f64> {
    let g_count = g_flags.iter().filter(|&&g| g).count();
    let f_count = g_flags.len() - g_count;
    if f_count != g_count {
        return Err(Error::Shape { f_count, g_count });
    }
    let dm1 = delta - 1.0;
    let mut y = 0u32;
    let mut sum = 0.0;
    for (i, &g) in g_flags.iter().enumerate() {
        y += g as u32;
        sum += savage_term(i + 1, y, dm1);
    }
    Ok(g_count as f64 * delta.ln() + sum)
}

/// Incrementally maintained pooled sample and its rank log-likelihood.
#[derive(Debug, Clone)]
pub struct RankState {
    delta: f64,
    values: Vec<f64>,
    g_flags: Vec<bool>,
    y: Vec<u32>,
    terms: Vec<f64>,
    z: f64,
}

impl RankState {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!(
                "Delta must be positive, got {delta}"
            )));
        }
        Ok(RankState {
            delta,
            values: Vec::new(),
            g_flags: Vec::new(),
            y: Vec::new(),
            terms: Vec::new(),
            z: 0.0,
        })
    }

    /// Number of pairs observed.
    pub fn n(&self) -> usize {
        self.values.len() / 2
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn ordered_values(&self) -> &[f64] {
        &self.values
    }

    pub fn g_flags(&self) -> &[bool] {
        &self.g_flags
    }

    /// Prefix counts `y_1, ..., y_{2n}`.
    pub fn prefix_counts(&self) -> &[u32] {
        &self.y
    }

    pub fn contains(&self, v: f64) -> bool {
        self.values.binary_search_by(|p| p.total_cmp(&v)).is_ok()
    }

    /// Adds one observation from each sample and returns the new `Z_n`.
    /// A value equal to a stored one (or `x_f == y_g`) is a tie error and
    /// leaves the state untouched.
    pub fn step(&mut self, x_f: f64, y_g: f64) -> Result<f64> {
        for v in [x_f, y_g] {
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "observation must be finite, got {v}"
                )));
            }
            if self.contains(v) {
                return Err(Error::Tie(v));
            }
        }
        if x_f == y_g {
            return Err(Error::Tie(x_f));
        }
        let px = self.values.partition_point(|&v| v < x_f);
        self.values.insert(px, x_f);
        self.g_flags.insert(px, false);
        let py = self.values.partition_point(|&v| v < y_g);
        self.values.insert(py, y_g);
        self.g_flags.insert(py, true);

        let first = px.min(py);
        let len = self.values.len();
        self.y.resize(len, 0);
        self.terms.resize(len, 0.0);
        let dm1 = self.delta - 1.0;
        let mut y = if first == 0 { 0 } else { self.y[first - 1] };
        for i in first..len {
            y += self.g_flags[i] as u32;
            self.y[i] = y;
            self.terms[i] = savage_term(i + 1, y, dm1);
        }
        let sum: f64 = self.terms.iter().sum();
        self.z = self.n() as f64 * self.delta.ln() + sum;
        Ok(self.z)
    }
}

/// Runs the SPRT on data `X ~ U(0,1)`, `Y = U^(1/A)` until `Z_n` leaves
/// `[-a, b]` or `max_pairs` pairs have been used.
///
/// The record's `stopped_sum` holds `Z_T`; `overshoot` is measured beyond
/// whichever boundary was crossed.
pub fn run_sprt(config: &RankSprtConfig, seed: u64, max_pairs: u64) -> Result<CrossingRecord> {
    config.validate()?;
    if max_pairs == 0 {
        return Err(Error::Config("max_pairs must be at least 1".into()));
    }
    let mut rng = ReplicationRng::new(seed);
    let mut state = RankState::new(config.delta)?;
    for n in 1..=max_pairs {
        let z = loop {
            let (x, y) = sample_pair(&mut rng.steps, config.a_exp);
            match state.step(x, y) {
                Ok(z) => break z,
                Err(Error::Tie(_)) => continue,
                Err(e) => return Err(e),
            }
        };
        if z > config.b {
            return Ok(CrossingRecord {
                stop_index: n,
                overshoot: z - config.b,
                stopped_sum: z,
                hit_lower: false,
                censored: false,
            });
        }
        if z < -config.a {
            return Ok(CrossingRecord {
                stop_index: n,
                overshoot: -config.a - z,
                stopped_sum: z,
                hit_lower: true,
                censored: false,
            });
        }
    }
    Ok(CrossingRecord {
        stop_index: max_pairs,
        overshoot: state.z() - config.b,
        stopped_sum: state.z(),
        hit_lower: false,
        censored: true,
    })
}

/// Which boundary the statistic drifts towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankSide {
    /// `mu > 0`: the walk heads for `b`.
    Upper,
    /// `mu < 0`: handled by reflecting `Z_n`, which then heads for `a`.
    Lower,
}

impl RankSide {
    /// Side from the sign of the drift; zero drift is an error.
    pub fn of(config: &RankSprtConfig, q: &QuadratureSpec) -> Result<RankSide> {
        let mu = drift_mu(config.delta, config.a_exp, q)?;
        if mu > 0.0 {
            Ok(RankSide::Upper)
        } else if mu < 0.0 {
            Ok(RankSide::Lower)
        } else {
            Err(Error::Drift(mu))
        }
    }
}

/// Second-order prediction of `E T_{a,b}`.
///
/// `constants` must describe the walk oriented towards the boundary of
/// `side` (for [`RankSide::Lower`], the reflected walk `-S_n`), so
/// `constants.mu > 0`:
///
/// * `A != 1`: `mu E T = boundary -/+ h_int + correction`
/// * `A == 1`: `mu E T = boundary -/+ [(eta^2/2) log(2 boundary / mu) - C(eta)] + correction`
///
/// where the sign flips on the lower side because reflection negates `xi_n`.
pub fn predict_et_rank(
    config: &RankSprtConfig,
    side: RankSide,
    constants: &RenewalConstants,
    c_eta: f64,
    h_int: f64,
) -> Result<f64> {
    config.validate()?;
    let mu = constants.mu;
    if !(mu > 0.0) {
        return Err(Error::Drift(mu));
    }
    let (boundary, sign) = match side {
        RankSide::Upper => (config.b, 1.0),
        RankSide::Lower => (config.a, -1.0),
    };
    let eta = eta_of(config.delta);
    let mean_xi = if config.a_exp == 1.0 {
        0.5 * eta * eta * (2.0 * boundary / mu).ln() - c_eta
    } else {
        h_int
    };
    Ok((boundary - sign * mean_xi + constants.overshoot_correction) / mu)
}

/// Monte Carlo estimate of `E[Z_n] / n` with its standard error.
pub fn mc_drift_slope(
    delta: f64,
    a_exp: f64,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n == 0 || reps < 2 {
        return Err(Error::Config("need n >= 1 and reps >= 2".into()));
    }
    let values = replicate(reps, seed, |_, s| -> Result<f64> {
        let pairs = sample_pairs(n, a_exp, s);
        let mut pooled: Vec<(f64, bool)> = pairs
            .iter()
            .flat_map(|&(x, y)| [(x, false), (y, true)])
            .collect();
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
        let flags: Vec<bool> = pooled.into_iter().map(|p| p.1).collect();
        Ok(rank_loglik(&flags, delta)? / n as f64)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let stats = SampleStats::from_values(values);
    Ok((stats.mean, stats.std_error))
}
