//! Splitting `Z_n` into the random walk `S_n` and the perturbation `xi_n`.
//!
//! For `F = U(0,1)`, `G(x) = x^A`, `H = x + x^A`, `W = x + Delta x^A`,
//! `psi = H / W`, the walk gains per pair `(x from F, y from G)`
//!
//! ```text
//! log Delta + log psi(x) + log psi(y)
//!   + int_x^1 (1/H - 1/W) dH + int_y^1 (1/H - Delta/W) dH
//! ```
//!
//! and `int_t^1 dH / H = log(2 / H(t))` is closed form, leaving one
//! quadrature `J(t) = int_t^1 dH / W` per observation.

use rand::Rng;
use serde::Serialize;

use super::rank_loglik;
use crate::constants::{eta_of, j_integral, log_h, log_psi, QuadratureSpec};
use crate::rng_models::{open01, ReplicationRng};
use crate::{Error, Result};

/// One `(x, y)` pair: `x ~ U(0,1)`, `y = U^(1/A) ~ F^A`.
pub fn sample_pair<R: Rng + ?Sized>(rng: &mut R, a_exp: f64) -> (f64, f64) {
    let x = open01(rng);
    let u = open01(rng);
    (x, u.powf(1.0 / a_exp))
}

/// `n` pairs from the step stream of `seed`.
pub fn sample_pairs(n: usize, a_exp: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ReplicationRng::new(seed);
    (0..n).map(|_| sample_pair(&mut rng.steps, a_exp)).collect()
}

/// Walk increment contributed by one pair.
pub fn pair_increment(x: f64, y: f64, delta: f64, a_exp: f64, q: &QuadratureSpec) -> Result<f64> {
    let ln2 = std::f64::consts::LN_2;
    let f_term =
        log_psi(x, delta, a_exp) + (ln2 - log_h(x, a_exp)) - j_integral(x, delta, a_exp, q)?;
    let g_term = log_psi(y, delta, a_exp) + (ln2 - log_h(y, a_exp))
        - delta * j_integral(y, delta, a_exp, q)?;
    Ok(delta.ln() + f_term + g_term)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionSample {
    pub n: usize,
    pub z: f64,
    pub s: f64,
    /// Defined as `z - s`.
    pub xi: f64,
}

fn pooled_flags(pairs: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut pooled: Vec<(f64, bool)> = pairs
        .iter()
        .flat_map(|&(x, y)| [(x, false), (y, true)])
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = pooled.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Tie(w[0].0));
    }
    Ok(pooled.into_iter().unzip())
}

/// Evaluates `Z_n`, `S_n` and `xi_n = Z_n - S_n` on the given pairs.
pub fn decompose_pairs(
    pairs: &[(f64, f64)],
    delta: f64,
    a_exp: f64,
    q: &QuadratureSpec,
) -> Result<DecompositionSample> {
    let (_, flags) = pooled_flags(pairs)?;
    let z = rank_loglik(&flags, delta)?;
    let mut s = 0.0;
    for &(x, y) in pairs {
        s += pair_increment(x, y, delta, a_exp, q)?;
    }
    Ok(DecompositionSample {
        n: pairs.len(),
        z,
        s,
        xi: z - s,
    })
}

/// [`decompose_pairs`] on `n` freshly drawn pairs.
pub fn decompose(n: usize, delta: f64, a_exp: f64, seed: u64) -> Result<DecompositionSample> {
    if n == 0 {
        return Err(Error::Config("need at least one pair".into()));
    }
    decompose_pairs(
        &sample_pairs(n, a_exp, seed),
        delta,
        a_exp,
        &QuadratureSpec::default(),
    )
}

/// Null-hypothesis closed form of the perturbation, with `u_{2n+1} = 1`:
///
/// ```text
/// xi_n = -sum_k log(1 + eta (2 y_k / k - 1)) + sum_k eta (2 y_k - k) log(u_{k+1} / u_k)
/// ```
///
/// `eta = (Delta - 1)/(Delta + 1)` with `y_k` counting G-observations.
pub fn xi_null_closed_form(pairs: &[(f64, f64)], delta: f64) -> Result<f64> {
    let (u, flags) = pooled_flags(pairs)?;
    let eta = eta_of(delta);
    let mut y = 0.0;
    let mut acc = 0.0;
    for k in 1..=u.len() {
        y += flags[k - 1] as u8 as f64;
        let kf = k as f64;
        let next = if k == u.len() { 1.0 } else { u[k] };
        acc -= (1.0 + eta * (2.0 * y / kf - 1.0)).ln();
        acc += eta * (2.0 * y - kf) * (next / u[k - 1]).ln();
    }
    Ok(acc)
}
