//! Linear renewal machinery: `tau_b = inf{n : S_n > b}`, overshoots, and
//! Monte Carlo renewal constants from `tau_0`.

use serde::Serialize;

use crate::rng_models::{replicate, IncrementModel, ReplicationRng};
use crate::stats::SampleStats;
use crate::{Error, Result};

/// Step budget used when a caller has no better bound.
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

/// Outcome of one stopped path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingRecord {
    pub stop_index: u64,
    /// Stopped statistic minus the boundary it crossed (for a censored path,
    /// the final statistic minus the upper boundary).
    pub overshoot: f64,
    /// `S` at the stopping index.
    pub stopped_sum: f64,
    pub hit_lower: bool,
    pub censored: bool,
}

/// First `n <= max_steps` with `S_n > b`, driven by the step stream of `seed`.
pub fn simulate_linear_crossing(
    model: &IncrementModel,
    b: f64,
    seed: u64,
    max_steps: u64,
) -> Result<CrossingRecord> {
    if max_steps == 0 {
        return Err(Error::Config("max_steps must be at least 1".into()));
    }
    if b.is_nan() {
        return Err(Error::Config("boundary is NaN".into()));
    }
    let sampler = model.sampler()?;
    let mut rng = ReplicationRng::new(seed);
    let mut s = 0.0;
    for n in 1..=max_steps {
        s += sampler.sample(&mut rng.steps)?;
        if s > b {
            return Ok(CrossingRecord {
                stop_index: n,
                overshoot: s - b,
                stopped_sum: s,
                hit_lower: false,
                censored: false,
            });
        }
    }
    Ok(CrossingRecord {
        stop_index: max_steps,
        overshoot: s - b,
        stopped_sum: s,
        hit_lower: false,
        censored: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RenewalStdErrors {
    pub mu: f64,
    pub sigma2: f64,
    pub e_s_tau0: f64,
    pub e_s_tau0_sq: f64,
    pub overshoot_correction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenewalConstants {
    pub mu: f64,
    pub sigma2: Option<f64>,
    pub e_s_tau0: f64,
    pub e_s_tau0_sq: f64,
    /// Always `e_s_tau0_sq / (2 e_s_tau0)`.
    pub overshoot_correction: f64,
    pub std_errors: RenewalStdErrors,
    pub reps: usize,
    pub censored: usize,
}

impl RenewalConstants {
    /// Constants from known moments, with zero standard errors.
    pub fn from_moments(
        mu: f64,
        sigma2: Option<f64>,
        e_s_tau0: f64,
        e_s_tau0_sq: f64,
    ) -> Result<Self> {
        if !(e_s_tau0 > 0.0 && e_s_tau0_sq > 0.0) {
            return Err(Error::Config(format!(
                "ladder moments must be positive, got {e_s_tau0} and {e_s_tau0_sq}"
            )));
        }
        Ok(RenewalConstants {
            mu,
            sigma2,
            e_s_tau0,
            e_s_tau0_sq,
            overshoot_correction: e_s_tau0_sq / (2.0 * e_s_tau0),
            std_errors: RenewalStdErrors::default(),
            reps: 0,
            censored: 0,
        })
    }
}

struct Tau0Sample {
    first_step: f64,
    stopped_sum: f64,
    censored: bool,
}

/// Estimates the ladder moments `E S_{tau_0}` and `E S_{tau_0}^2` by direct
/// simulation of `tau_0`. `mu` is the model's drift; `sigma^2` is the declared
/// value or, failing that, the sample variance of the first step of every
/// replication. Censored replications are dropped and counted.
pub fn estimate_renewal_constants(
    model: &IncrementModel,
    reps: usize,
    seed: u64,
) -> Result<RenewalConstants> {
    estimate_renewal_constants_with_budget(model, reps, seed, DEFAULT_MAX_STEPS)
}

pub fn estimate_renewal_constants_with_budget(
    model: &IncrementModel,
    reps: usize,
    seed: u64,
    max_steps: u64,
) -> Result<RenewalConstants> {
    model.require_positive_drift()?;
    if reps < 2 {
        return Err(Error::Config("reps must be at least 2".into()));
    }
    let sampler = model.sampler()?;
    let samples = replicate(reps, seed, |_, s| -> Result<Tau0Sample> {
        let mut rng = ReplicationRng::new(s);
        let mut sum = 0.0;
        let mut first = 0.0;
        for n in 1..=max_steps {
            let x = sampler.sample(&mut rng.steps)?;
            if n == 1 {
                first = x;
            }
            sum += x;
            if sum > 0.0 {
                return Ok(Tau0Sample {
                    first_step: first,
                    stopped_sum: sum,
                    censored: false,
                });
            }
        }
        Ok(Tau0Sample {
            first_step: first,
            stopped_sum: sum,
            censored: true,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let first = SampleStats::from_values(samples.iter().map(|t| t.first_step));
    let mu = model.declared_mu();
    let first_steps: Vec<f64> = samples.iter().map(|t| t.first_step).collect();
    let (sigma2, sigma2_se) = match model.declared_sigma2() {
        Some(v) => (v, 0.0),
        None => (
            first.variance,
            SampleStats::variance_std_error(&first_steps),
        ),
    };

    let kept: Vec<f64> = samples
        .iter()
        .filter(|t| !t.censored)
        .map(|t| t.stopped_sum)
        .collect();
    let censored = reps - kept.len();
    if kept.len() < 2 {
        return Err(Error::Numerics("too few uncensored ladder epochs".into()));
    }
    let m1 = SampleStats::from_values(kept.iter().copied());
    let m2 = SampleStats::from_values(kept.iter().map(|v| v * v));
    let correction = m2.mean / (2.0 * m1.mean);
    // Delta method for the ratio, using the sample covariance of (S, S^2).
    let k = kept.len() as f64;
    let cov = kept
        .iter()
        .map(|v| (v - m1.mean) * (v * v - m2.mean))
        .sum::<f64>()
        / (k - 1.0);
    let g1 = -m2.mean / (2.0 * m1.mean * m1.mean);
    let g2 = 1.0 / (2.0 * m1.mean);
    let var_corr = (g1 * g1 * m1.variance + g2 * g2 * m2.variance + 2.0 * g1 * g2 * cov) / k;

    Ok(RenewalConstants {
        mu,
        sigma2: Some(sigma2),
        e_s_tau0: m1.mean,
        e_s_tau0_sq: m2.mean,
        overshoot_correction: correction,
        std_errors: RenewalStdErrors {
            mu: 0.0,
            sigma2: sigma2_se,
            e_s_tau0: m1.std_error,
            e_s_tau0_sq: m2.std_error,
            overshoot_correction: var_corr.max(0.0).sqrt(),
        },
        reps,
        censored,
    })
}

/// Monte Carlo value of `E(S_T - mu T)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaldReport {
    pub estimate: f64,
    pub std_error: f64,
    pub reps: usize,
    pub censored: usize,
}

impl WaldReport {
    pub fn passes(&self) -> bool {
        self.estimate.abs() <= 4.0 * self.std_error
    }

    pub(crate) fn from_records(mu: f64, records: &[CrossingRecord]) -> Self {
        let kept = records.iter().filter(|r| !r.censored);
        let stats =
            SampleStats::from_values(kept.map(|r| r.stopped_sum - mu * r.stop_index as f64));
        WaldReport {
            estimate: stats.mean,
            std_error: stats.std_error,
            reps: records.len(),
            censored: records.len() - stats.count,
        }
    }
}

/// Wald identity check for the linear rule `tau_b`.
pub fn wald_check(model: &IncrementModel, b: f64, reps: usize, seed: u64) -> Result<WaldReport> {
    model.require_positive_drift()?;
    let records = replicate(reps, seed, |_, s| {
        simulate_linear_crossing(model, b, s, DEFAULT_MAX_STEPS)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(WaldReport::from_records(model.declared_mu(), &records))
}
