//! Expansions of `E T_b` and `Var T_b` and their Monte Carlo counterparts.
//!
//! * second order: `mu E T_b = b - E zeta_{n_b} + E S_{tau_0}^2 / (2 E S_{tau_0}) + o(1)`,
//!   `n_b = floor(b / mu)`
//! * intermediate: `mu E T_b = b - E zeta_{n_b} + O(rho(b))`
//! * variance: `Var T_b = sigma^2 b / mu^3 + O(sqrt(b) rho(b) + rho(b)^2)`

use serde::Serialize;

use crate::perturbed_walk::zeta;
use crate::renewal::{RenewalConstants, WaldReport};
use crate::rng_models::{replicate, ProcessModel, TruncationParams};
use crate::stats::SampleStats;
use crate::{Error, Result};

/// Default multiplier of the `O(.)` bands.
pub const DEFAULT_BAND_MULTIPLIER: f64 = 10.0;

/// `floor(b / |mu|)`, clamped to at least 1 so that `zeta_{n_b}` exists.
pub fn n_b(b: f64, mu: f64) -> Result<u64> {
    if mu == 0.0 || !mu.is_finite() {
        return Err(Error::Drift(mu));
    }
    Ok(((b / mu.abs()).floor() as u64).max(1))
}

fn require_drift(constants: &RenewalConstants) -> Result<f64> {
    if constants.mu > 0.0 {
        Ok(constants.mu)
    } else {
        Err(Error::Drift(constants.mu))
    }
}

/// `(b - E zeta_{n_b} + correction) / mu`.
pub fn predict_et_second_order(
    constants: &RenewalConstants,
    b: f64,
    e_zeta_nb: f64,
) -> Result<f64> {
    let mu = require_drift(constants)?;
    Ok((b - e_zeta_nb + constants.overshoot_correction) / mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn around(center: f64, half_width: f64) -> Self {
        Interval {
            center,
            lo: center - half_width,
            hi: center + half_width,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// `E T_b` band: center `(b - E zeta_{n_b}) / mu`, half-width `multiplier rho(b) / mu`.
pub fn predict_et_intermediate(
    constants: &RenewalConstants,
    b: f64,
    e_zeta_nb: f64,
    rho_value: f64,
    multiplier: f64,
) -> Result<Interval> {
    let mu = require_drift(constants)?;
    Ok(Interval::around(
        (b - e_zeta_nb) / mu,
        multiplier * rho_value / mu,
    ))
}

/// `Var T_b` band: center `sigma^2 b / mu^3`, half-width
/// `multiplier (sqrt(b) rho(b) + rho(b)^2)`.
pub fn predict_var(
    constants: &RenewalConstants,
    b: f64,
    rho_value: f64,
    multiplier: f64,
) -> Result<Interval> {
    let mu = require_drift(constants)?;
    let sigma2 = constants
        .sigma2
        .filter(|s| s.is_finite())
        .ok_or_else(|| Error::Config("variance prediction needs a known sigma^2".into()))?;
    Ok(Interval::around(
        sigma2 * b / mu.powi(3),
        multiplier * (b.max(0.0).sqrt() * rho_value + rho_value * rho_value),
    ))
}

/// Means of `xi_n` and `zeta_n` at one index, from the same paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiZetaEstimate {
    pub n: u64,
    pub e_xi: f64,
    pub se_xi: f64,
    pub e_zeta: f64,
    pub se_zeta: f64,
    /// Mean of `xi_n - zeta_n` and its standard error.
    pub diff: f64,
    pub diff_se: f64,
}

pub fn estimate_xi_zeta(
    model: &ProcessModel,
    tp: &TruncationParams,
    n: u64,
    reps: usize,
    seed: u64,
) -> Result<XiZetaEstimate> {
    if n == 0 || reps < 2 {
        return Err(Error::Config("need n >= 1 and reps >= 2".into()));
    }
    let xs = replicate(reps, seed, |_, s| -> Result<f64> {
        let mut stream = model.stream(s)?;
        let mut xi = 0.0;
        for _ in 0..n {
            xi = stream.advance()?.xi;
        }
        Ok(xi)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let xi = SampleStats::from_values(xs.iter().copied());
    let zs = SampleStats::from_values(xs.iter().map(|&v| zeta(v, n, tp)));
    let d = SampleStats::from_values(xs.iter().map(|&v| v - zeta(v, n, tp)));
    Ok(XiZetaEstimate {
        n,
        e_xi: xi.mean,
        se_xi: xi.std_error,
        e_zeta: zs.mean,
        se_zeta: zs.std_error,
        diff: d.mean,
        diff_se: d.std_error,
    })
}

/// Estimate and standard error of `E zeta_{n_b}`, `n_b = floor(b / |mu|)`.
pub fn estimate_e_zeta_nb(
    model: &ProcessModel,
    tp: &TruncationParams,
    b: f64,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let e = estimate_xi_zeta(model, tp, n_b(b, model.mu())?, reps, seed)?;
    Ok((e.e_zeta, e.se_zeta))
}

/// Monte Carlo `mu E T_b` against the second-order prediction at one `b`.
/// All fields are in units of `mu T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionEstimate {
    pub b: f64,
    pub predicted_mu_et: f64,
    pub mc_mu_et: f64,
    pub mc_se: f64,
    /// `mc_mu_et - predicted_mu_et`.
    pub residual: f64,
    /// Standard error of the residual: `mu T_b + zeta_{n_b}` is averaged
    /// per path, and the correction's own error is added in quadrature.
    pub residual_se: f64,
    pub e_zeta_nb: f64,
    pub e_zeta_se: f64,
    pub correction: f64,
    pub reps: usize,
    pub censored: usize,
    /// Wald identity check on the same stopped paths.
    pub wald: WaldReport,
}

struct ExpansionPath {
    t: u64,
    s_t: f64,
    zeta_nb: f64,
    censored: bool,
}

/// Simulates `T_b` and `zeta_{n_b}` on the same paths (continuing a path
/// past `T_b` when `T_b < n_b`).
pub fn mc_expansion(
    model: &ProcessModel,
    tp: &TruncationParams,
    constants: &RenewalConstants,
    b: f64,
    reps: usize,
    seed: u64,
    max_steps: u64,
) -> Result<ExpansionEstimate> {
    let mu = require_drift(constants)?;
    if reps < 2 || max_steps == 0 {
        return Err(Error::Config("need reps >= 2 and max_steps >= 1".into()));
    }
    let nb = n_b(b, mu)?;
    let paths = replicate(reps, seed, |_, s| -> Result<ExpansionPath> {
        let mut stream = model.stream(s)?;
        let mut t = None;
        let mut s_t = 0.0;
        let mut zeta_nb = None;
        while t.is_none() || zeta_nb.is_none() {
            if stream.steps_taken() >= max_steps.max(nb) {
                break;
            }
            let v = stream.advance()?;
            if t.is_none() && v.z() > b {
                t = Some(v.n);
                s_t = v.s;
            }
            if v.n == nb {
                zeta_nb = Some(zeta(v.xi, nb, tp));
            }
        }
        Ok(ExpansionPath {
            t: t.unwrap_or(max_steps),
            s_t,
            zeta_nb: zeta_nb.unwrap_or(0.0),
            censored: t.is_none(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let kept: Vec<&ExpansionPath> = paths.iter().filter(|p| !p.censored).collect();
    let mt = SampleStats::from_values(kept.iter().map(|p| mu * p.t as f64));
    let mz = SampleStats::from_values(paths.iter().map(|p| p.zeta_nb));
    let paired = SampleStats::from_values(kept.iter().map(|p| mu * p.t as f64 + p.zeta_nb));
    let wald = SampleStats::from_values(kept.iter().map(|p| p.s_t - model.mu() * p.t as f64));
    let correction = constants.overshoot_correction;
    let predicted = b - mz.mean + correction;
    Ok(ExpansionEstimate {
        b,
        predicted_mu_et: predicted,
        mc_mu_et: mt.mean,
        mc_se: mt.std_error,
        residual: mt.mean - predicted,
        residual_se: paired
            .std_error
            .hypot(constants.std_errors.overshoot_correction),
        e_zeta_nb: mz.mean,
        e_zeta_se: mz.std_error,
        correction,
        reps,
        censored: reps - kept.len(),
        wald: WaldReport {
            estimate: wald.mean,
            std_error: wald.std_error,
            reps,
            censored: reps - kept.len(),
        },
    })
}
