//! The perturbed walk `Z_n = S_n + xi_n` and the stopping rules built on it.
//!
//! * `T_b = inf{n : Z_n > b}`
//! * `tau_b* = inf{n >= n_* : S_n + zeta_{n_*} > b}` with
//!   `n_* = floor(b/mu - eta_* b^alpha)` and the truncation
//!   `zeta_n = (xi_n ^ theta n^alpha) v (-theta* n^alpha)`
//! * `U_b = #{n : Z_n <= b}` and the last exit time `N_b* = 1 + max{n : Z_n <= b}`

mod diagnostics;

pub use diagnostics::{
    regularity_diagnostics, window_constant, DiagnosticRecord, DiagnosticsReport, SLOW_CHANGE_EPS,
    WINDOW_CUTOFFS,
};

use serde::Serialize;

use crate::renewal::{CrossingRecord, WaldReport};
use crate::rng_models::{replicate, ProcessModel, TruncationParams};
use crate::stats::SampleStats;
use crate::{Error, Result};

/// `(xi_n ^ theta n^alpha) v (-theta* n^alpha)`.
pub fn zeta(xi_n: f64, n: u64, tp: &TruncationParams) -> f64 {
    xi_n.min(tp.upper_cap(n)).max(tp.lower_cap(n))
}

/// `2 theta / mu^(1 + alpha)`, twice the smallest admissible `eta_*`.
pub fn default_eta_star(tp: &TruncationParams, mu: f64) -> f64 {
    2.0 * tp.theta / mu.powf(1.0 + tp.alpha)
}

/// `floor(b/mu - eta_* b^alpha)`; a boundary error when this is below 1.
pub fn n_star(b: f64, mu: f64, alpha: f64, eta_star: f64) -> Result<u64> {
    let v = (b / mu - eta_star * b.max(0.0).powf(alpha)).floor();
    if !(v >= 1.0) {
        return Err(Error::Boundary(format!(
            "n_* = {v} < 1 for b = {b}, mu = {mu}, eta_* = {eta_star}"
        )));
    }
    Ok(v as u64)
}

fn check_eta_star(tp: &TruncationParams, mu: f64, eta_star: f64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::Drift(mu));
    }
    let lower = tp.theta / mu.powf(1.0 + tp.alpha);
    if !(eta_star > lower) {
        return Err(Error::Config(format!(
            "eta_* = {eta_star} must exceed theta/mu^(1+alpha) = {lower}"
        )));
    }
    if tp.alpha == 1.0 && eta_star >= 1.0 / mu {
        return Err(Error::Config(format!(
            "alpha = 1 requires eta_* < 1/mu, got {eta_star}"
        )));
    }
    Ok(())
}

fn check_budget(max_steps: u64) -> Result<()> {
    if max_steps == 0 {
        return Err(Error::Config("max_steps must be at least 1".into()));
    }
    Ok(())
}

/// `X_1..X_n` and `xi_1..xi_n` of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedPath {
    pub steps: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PerturbedPath {
    pub fn simulate(model: &ProcessModel, seed: u64, n: usize) -> Result<Self> {
        let mut stream = model.stream(seed)?;
        let mut steps = Vec::with_capacity(n);
        let mut xi = Vec::with_capacity(n);
        for _ in 0..n {
            let v = stream.advance()?;
            steps.push(v.x);
            xi.push(v.xi);
        }
        Ok(PerturbedPath { steps, xi })
    }

    pub fn z(&self) -> Vec<f64> {
        let mut s = 0.0;
        self.steps
            .iter()
            .zip(&self.xi)
            .map(|(x, xi)| {
                s += x;
                s + xi
            })
            .collect()
    }
}

/// First `n <= max_steps` with `Z_n > b`. `stopped_sum` is `S_T` and the
/// overshoot is `Z_T - b`.
pub fn simulate_t_b(
    model: &ProcessModel,
    b: f64,
    seed: u64,
    max_steps: u64,
) -> Result<CrossingRecord> {
    check_budget(max_steps)?;
    let mut stream = model.stream(seed)?;
    let mut last = None;
    for _ in 0..max_steps {
        let v = stream.advance()?;
        if v.z() > b {
            return Ok(CrossingRecord {
                stop_index: v.n,
                overshoot: v.z() - b,
                stopped_sum: v.s,
                hit_lower: false,
                censored: false,
            });
        }
        last = Some(v);
    }
    let v = last.expect("max_steps >= 1");
    Ok(CrossingRecord {
        stop_index: v.n,
        overshoot: v.z() - b,
        stopped_sum: v.s,
        hit_lower: false,
        censored: true,
    })
}

/// Frozen-perturbation rule `tau_b*`. The overshoot is `S_n + zeta_{n_*} - b`.
pub fn simulate_tau_star(
    model: &ProcessModel,
    b: f64,
    tp: &TruncationParams,
    eta_star: f64,
    seed: u64,
    max_steps: u64,
) -> Result<CrossingRecord> {
    Ok(simulate_coupled(model, b, tp, eta_star, seed, max_steps)?.tau_star)
}

/// `T_b` and `tau_b*` evaluated on one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedCrossing {
    pub t_b: CrossingRecord,
    pub tau_star: CrossingRecord,
    pub n_star: u64,
    pub zeta_at_n_star: f64,
    /// `|T_b - tau_b*| / rho(b)`.
    pub diff_scaled: f64,
}

pub fn simulate_coupled(
    model: &ProcessModel,
    b: f64,
    tp: &TruncationParams,
    eta_star: f64,
    seed: u64,
    max_steps: u64,
) -> Result<PairedCrossing> {
    check_budget(max_steps)?;
    let mu = model.mu();
    check_eta_star(tp, mu, eta_star)?;
    let ns = n_star(b, mu, tp.alpha, eta_star)?;
    let mut stream = model.stream(seed)?;
    let mut t_b = None;
    let mut tau = None;
    let mut zeta_star = 0.0;
    let mut last = None;
    while t_b.is_none() || tau.is_none() {
        if stream.steps_taken() >= max_steps {
            break;
        }
        let v = stream.advance()?;
        if t_b.is_none() && v.z() > b {
            t_b = Some(CrossingRecord {
                stop_index: v.n,
                overshoot: v.z() - b,
                stopped_sum: v.s,
                hit_lower: false,
                censored: false,
            });
        }
        if v.n == ns {
            zeta_star = zeta(v.xi, ns, tp);
        }
        if tau.is_none() && v.n >= ns && v.s + zeta_star > b {
            tau = Some(CrossingRecord {
                stop_index: v.n,
                overshoot: v.s + zeta_star - b,
                stopped_sum: v.s,
                hit_lower: false,
                censored: false,
            });
        }
        last = Some(v);
    }
    let v = last.expect("max_steps >= 1");
    let censored = |stat: f64| CrossingRecord {
        stop_index: v.n,
        overshoot: stat - b,
        stopped_sum: v.s,
        hit_lower: false,
        censored: true,
    };
    let t_b = t_b.unwrap_or_else(|| censored(v.z()));
    let tau_star = tau.unwrap_or_else(|| censored(v.s + zeta_star));
    let diff = (t_b.stop_index as f64 - tau_star.stop_index as f64).abs();
    Ok(PairedCrossing {
        t_b,
        tau_star,
        n_star: ns,
        zeta_at_n_star: zeta_star,
        diff_scaled: diff / tp.rho.eval(b),
    })
}

/// Occupation count and last exit time below `b` over a finite horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RenewalCount {
    /// `#{n <= max_steps : Z_n <= b}`.
    pub u_b: u64,
    /// `1 + max{n <= max_steps : Z_n <= b}`, or 1 if there is no such `n`.
    pub last_exit: u64,
    /// `Z_{max_steps} <= b`: both counts are then lower bounds.
    pub censored: bool,
}

/// `U_b` and `N_b*`. A horizon of at least `10 b / mu` keeps late returns
/// below `b` negligible for the models here.
pub fn simulate_u_and_n(
    model: &ProcessModel,
    b: f64,
    seed: u64,
    max_steps: u64,
) -> Result<RenewalCount> {
    check_budget(max_steps)?;
    let mut stream = model.stream(seed)?;
    let mut u_b = 0;
    let mut last = 0;
    let mut below = false;
    for _ in 0..max_steps {
        let v = stream.advance()?;
        below = v.z() <= b;
        if below {
            u_b += 1;
            last = v.n;
        }
    }
    Ok(RenewalCount {
        u_b,
        last_exit: last + 1,
        censored: below,
    })
}

/// Wald identity check `E(S_T - mu T) = 0` for the nonlinear rule `T_b`.
pub fn wald_check_perturbed(
    model: &ProcessModel,
    b: f64,
    reps: usize,
    seed: u64,
    max_steps: u64,
) -> Result<WaldReport> {
    model.increment.require_positive_drift()?;
    let records = replicate(reps, seed, |_, s| simulate_t_b(model, b, s, max_steps))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(WaldReport::from_records(model.mu(), &records))
}

/// Estimate and standard error of `b P{T_b <= delta0 b / mu}`.
pub fn early_stop_probability(
    model: &ProcessModel,
    tp: &TruncationParams,
    b: f64,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mu = model.mu();
    if !(mu > 0.0) {
        return Err(Error::Drift(mu));
    }
    let horizon = (tp.delta0 * b / mu).floor() as u64;
    if horizon == 0 {
        return Ok((0.0, 0.0));
    }
    let hits = replicate(reps, seed, |_, s| -> Result<f64> {
        let r = simulate_t_b(model, b, s, horizon)?;
        Ok(if r.censored { 0.0 } else { 1.0 })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let st = SampleStats::from_values(hits);
    Ok((b * st.mean, b * st.std_error))
}

/// Coupled-difference summary at one boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledTail {
    /// `(diff_scaled - cutoff)^+` over uncensored pairs.
    pub tail: SampleStats,
    /// Indicator of `T_b < n_*`, where the frozen rule cannot track `T_b`.
    pub early: SampleStats,
    pub censored: usize,
}

/// Truncated tail `E[(diff_scaled - cutoff)^+]` of the coupled difference
/// over `reps` paths, together with the early-crossing frequency.
pub fn coupled_tail(
    model: &ProcessModel,
    b: f64,
    tp: &TruncationParams,
    eta_star: f64,
    cutoff: f64,
    reps: usize,
    seed: u64,
    max_steps: u64,
) -> Result<CoupledTail> {
    let pairs = replicate(reps, seed, |_, s| {
        simulate_coupled(model, b, tp, eta_star, s, max_steps)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let kept: Vec<&PairedCrossing> = pairs
        .iter()
        .filter(|p| !p.t_b.censored && !p.tau_star.censored)
        .collect();
    let tail = SampleStats::from_values(kept.iter().map(|p| (p.diff_scaled - cutoff).max(0.0)));
    let early = SampleStats::from_values(kept.iter().map(|p| {
        if p.t_b.stop_index < p.n_star {
            1.0
        } else {
            0.0
        }
    }));
    Ok(CoupledTail {
        tail,
        early,
        censored: reps - kept.len(),
    })
}
