use serde::Serialize;

use super::decompose::{sample_pairs, xi_null_closed_form};
use crate::constants::{c_eta, eta_of};
use crate::rng_models::{child_seed, try_replicate};
use crate::stats::{linear_fit, SampleStats};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiScalingRow {
    pub n: usize,
    /// Sample variance of `xi_n` divided by `log n`.
    pub var_ratio: f64,
    /// Mean of `xi_n` minus `(eta^2/2) log(2n) - C(eta)`.
    pub mean_residual: f64,
    /// Standard error of the mean of `xi_n`.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiScalingReport {
    pub delta: f64,
    pub eta: f64,
    /// Limiting ratio `eta^4 + eta^2`.
    pub target_ratio: f64,
    pub c_eta: f64,
    pub rows: Vec<XiScalingRow>,
    /// Slope of `Var xi_n` against `log n` over the grid (the ratio itself
    /// when the grid has one point).
    pub fitted_limit: f64,
    /// Standard error of the sample variance at each grid point.
    pub var_std_errors: Vec<f64>,
}

/// Simulates `xi_n` under the null (`F = G` uniform) at each grid size and
/// reports how its variance scales with `log n`.
pub fn xi_scaling_check(
    delta: f64,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<XiScalingReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!(
            "Delta must be positive, got {delta}"
        )));
    }
    if n_grid.is_empty() || n_grid.iter().any(|&n| n < 2) || n_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Config(
            "n_grid must be non-empty, strictly increasing and start at 2 or more".into(),
        ));
    }
    if reps < 2 {
        return Err(Error::Config("reps must be at least 2".into()));
    }
    let eta = eta_of(delta);
    let c = c_eta(eta, 1600)?.extrapolated;
    let mut rows = Vec::with_capacity(n_grid.len());
    let mut variances = Vec::with_capacity(n_grid.len());
    let mut var_std_errors = Vec::with_capacity(n_grid.len());
    for (gi, &n) in n_grid.iter().enumerate() {
        let grid_seed = child_seed(seed, gi as u64);
        let xs = try_replicate(reps, grid_seed, |_, s| {
            xi_null_closed_form(&sample_pairs(n, 1.0, s), delta)
        })?;
        let stats = SampleStats::from_values(xs.iter().copied());
        let log_n = (n as f64).ln();
        let centre = 0.5 * eta * eta * (2.0 * n as f64).ln() - c;
        rows.push(XiScalingRow {
            n,
            var_ratio: stats.variance / log_n,
            mean_residual: stats.mean - centre,
            se: stats.std_error,
        });
        variances.push(stats.variance);
        var_std_errors.push(SampleStats::variance_std_error(&xs));
    }
    let fitted_limit = if n_grid.len() >= 2 {
        let logs: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
        linear_fit(&logs, &variances).0
    } else {
        rows[0].var_ratio
    };
    Ok(XiScalingReport {
        delta,
        eta,
        target_ratio: eta.powi(4) + eta * eta,
        c_eta: c,
        rows,
        fitted_limit,
        var_std_errors,
    })
}
