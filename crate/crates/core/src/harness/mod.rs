//! Experiment orchestration: a TOML config in, a [`ReplicationSummary`] out.
//!
//! Replication `r` of every Monte Carlo loop is seeded from the master seed
//! alone, and per-replication results are collected in replication order
//! before any reduction, so a rerun gives the same bytes regardless of the
//! number of worker threads.

mod config;
mod output;

pub use config::{ConstantsParams, ExperimentConfig, ExperimentKind};
pub use output::{emit, write_summary, OutputFormat};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::constants::{
    c_eta, constants_report, eta_of, h_integral, ConstantsReport, QuadratureSpec,
};
use crate::expansion::{mc_expansion, predict_et_intermediate, predict_var, ExpansionEstimate};
use crate::perturbed_walk::{regularity_diagnostics, simulate_t_b, DiagnosticRecord};
use crate::rank_sprt::{predict_et_rank, run_sprt, xi_scaling_check, RankSide, XiScalingRow};
use crate::renewal::{
    estimate_renewal_constants, simulate_linear_crossing, RenewalConstants, WaldReport,
};
use crate::rng_models::{child_seed, replicate, IncrementModel};
use crate::stats::SampleStats;
use crate::Result;

const TAG_CONSTANTS: u64 = 1;
const TAG_MAIN: u64 = 2;

fn sub_seed(master: u64, tag: u64, index: u64) -> u64 {
    child_seed(child_seed(master, tag), index)
}

/// One row of the expansion-style CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionRow {
    pub b: f64,
    pub predicted: f64,
    pub mc: f64,
    pub se: f64,
    pub residual: f64,
    pub band_lo: f64,
    pub band_hi: f64,
}

/// One SPRT replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SprtRow {
    pub rep: usize,
    pub stop_n: u64,
    /// `upper`, `lower` or `censored`.
    pub boundary: String,
    pub overshoot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "rows", rename_all = "kebab-case")]
pub enum Table {
    Expansion(Vec<ExpansionRow>),
    Sprt(Vec<SprtRow>),
    XiScaling(Vec<XiScalingRow>),
    Diagnostics(Vec<DiagnosticRecord>),
    Constants(ConstantsReport),
}

/// A named pass/fail flag. Failures are reported, never raised.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationSummary {
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    pub reps: usize,
    pub exact_repro: bool,
    pub table: Table,
    /// Scalar results; keys are sorted for stable output.
    pub aggregates: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
}

impl ReplicationSummary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

struct Parts {
    table: Table,
    aggregates: BTreeMap<String, f64>,
    checks: Vec<Check>,
}

/// Runs one experiment.
pub fn run(config: &ExperimentConfig) -> Result<ReplicationSummary> {
    config.validate()?;
    let parts = match config.experiment {
        ExperimentKind::LinearRenewal => linear_renewal(config)?,
        ExperimentKind::PerturbedExpansion | ExperimentKind::Intermediate => perturbed(config)?,
        ExperimentKind::Variance => variance(config)?,
        ExperimentKind::RankSprtEt => rank_sprt_et(config)?,
        ExperimentKind::XiScaling => xi_scaling(config)?,
        ExperimentKind::Diagnostics => diagnostics(config)?,
        ExperimentKind::Constants => constants(config)?,
    };
    Ok(ReplicationSummary {
        experiment: config.experiment,
        master_seed: config.master_seed,
        reps: config.reps,
        exact_repro: config.exact_repro,
        table: parts.table,
        aggregates: parts.aggregates,
        checks: parts.checks,
    })
}

fn renewal_constants(config: &ExperimentConfig, inc: &IncrementModel) -> Result<RenewalConstants> {
    estimate_renewal_constants(
        inc,
        config.renewal_reps,
        sub_seed(config.master_seed, TAG_CONSTANTS, 0),
    )
}

fn constant_aggregates(c: &RenewalConstants) -> BTreeMap<String, f64> {
    let mut agg = BTreeMap::new();
    agg.insert("mu".into(), c.mu);
    agg.insert("overshoot_correction".into(), c.overshoot_correction);
    agg.insert(
        "overshoot_correction_se".into(),
        c.std_errors.overshoot_correction,
    );
    if let Some(s) = c.sigma2 {
        agg.insert("sigma2".into(), s);
    }
    agg
}

fn wald_check_entry(b: f64, w: &WaldReport) -> Check {
    Check::new(
        format!("wald b={b}"),
        w.passes(),
        format!("E(S_T - mu T) = {:.6} (se {:.6})", w.estimate, w.std_error),
    )
}

fn linear_renewal(config: &ExperimentConfig) -> Result<Parts> {
    let inc = config.increment_model()?;
    let c = renewal_constants(config, &inc)?;
    let mu = c.mu;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut agg = constant_aggregates(&c);
    let mut censored = 0;
    for (i, &b) in config.b_grid.iter().enumerate() {
        let seed = sub_seed(config.master_seed, TAG_MAIN, i as u64);
        let records = replicate(config.reps, seed, |_, s| {
            simulate_linear_crossing(&inc, b, s, config.max_steps)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let st = SampleStats::from_values(
            records
                .iter()
                .filter(|r| !r.censored)
                .map(|r| mu * r.stop_index as f64),
        );
        censored += records.len() - st.count;
        let predicted = b + c.overshoot_correction;
        let band = predict_et_intermediate(
            &c,
            b,
            0.0,
            config.truncation.rho.eval(b),
            config.band_multiplier,
        )?;
        let residual = st.mean - predicted;
        let se = st.std_error.hypot(c.std_errors.overshoot_correction);
        rows.push(ExpansionRow {
            b,
            predicted,
            mc: st.mean,
            se: st.std_error,
            residual,
            band_lo: mu * band.lo,
            band_hi: mu * band.hi,
        });
        checks.push(Check::new(
            format!("renewal b={b}"),
            residual.abs() <= 4.0 * se,
            format!(
                "mu E tau = {:.5}, predicted {:.5}, se {:.5}",
                st.mean, predicted, se
            ),
        ));
        checks.push(wald_check_entry(b, &WaldReport::from_records(mu, &records)));
    }
    agg.insert("censored".into(), censored as f64);
    Ok(Parts {
        table: Table::Expansion(rows),
        aggregates: agg,
        checks,
    })
}

fn perturbed(config: &ExperimentConfig) -> Result<Parts> {
    let model = config.process()?;
    let tp = &config.truncation;
    let c = renewal_constants(config, &model.increment)?;
    let mut estimates: Vec<ExpansionEstimate> = Vec::new();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (i, &b) in config.b_grid.iter().enumerate() {
        let seed = sub_seed(config.master_seed, TAG_MAIN, i as u64);
        let e = mc_expansion(&model, tp, &c, b, config.reps, seed, config.max_steps)?;
        let band =
            predict_et_intermediate(&c, b, e.e_zeta_nb, tp.rho.eval(b), config.band_multiplier)?;
        rows.push(ExpansionRow {
            b,
            predicted: e.predicted_mu_et,
            mc: e.mc_mu_et,
            se: e.mc_se,
            residual: e.residual,
            band_lo: c.mu * band.lo,
            band_hi: c.mu * band.hi,
        });
        if config.experiment == ExperimentKind::Intermediate {
            checks.push(Check::new(
                format!("band b={b}"),
                e.mc_mu_et >= c.mu * band.lo && e.mc_mu_et <= c.mu * band.hi,
                format!(
                    "mu E T = {:.4} in [{:.4}, {:.4}]",
                    e.mc_mu_et,
                    c.mu * band.lo,
                    c.mu * band.hi
                ),
            ));
        }
        checks.push(wald_check_entry(b, &e.wald));
        estimates.push(e);
    }
    if config.experiment == ExperimentKind::PerturbedExpansion {
        let last = estimates.last().expect("b_grid is non-empty");
        let tol = (4.0 * last.residual_se).max(0.5);
        checks.push(Check::new(
            format!("residual b={}", last.b),
            last.residual.abs() <= tol,
            format!("|{:.4}| <= {:.4}", last.residual, tol),
        ));
        let decay = estimates.windows(2).all(|w| {
            w[1].residual.abs()
                <= w[0].residual.abs() + 2.0 * w[0].residual_se.hypot(w[1].residual_se)
        });
        checks.push(Check::new(
            "residual decay",
            decay,
            "|residual| non-increasing within 2 joint se",
        ));
    }
    let mut agg = constant_aggregates(&c);
    agg.insert(
        "censored".into(),
        estimates.iter().map(|e| e.censored as f64).sum(),
    );
    for e in &estimates {
        agg.insert(format!("e_zeta_nb b={}", e.b), e.e_zeta_nb);
        agg.insert(format!("residual_se b={}", e.b), e.residual_se);
    }
    Ok(Parts {
        table: Table::Expansion(rows),
        aggregates: agg,
        checks,
    })
}

fn variance(config: &ExperimentConfig) -> Result<Parts> {
    let model = config.process()?;
    let c = renewal_constants(config, &model.increment)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut censored = 0;
    for (i, &b) in config.b_grid.iter().enumerate() {
        let seed = sub_seed(config.master_seed, TAG_MAIN, i as u64);
        let records = replicate(config.reps, seed, |_, s| {
            simulate_t_b(&model, b, s, config.max_steps)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let t: Vec<f64> = records
            .iter()
            .filter(|r| !r.censored)
            .map(|r| r.stop_index as f64)
            .collect();
        censored += records.len() - t.len();
        let st = SampleStats::from_values(t.iter().copied());
        let band = predict_var(&c, b, config.truncation.rho.eval(b), config.band_multiplier)?;
        rows.push(ExpansionRow {
            b,
            predicted: band.center,
            mc: st.variance,
            se: SampleStats::variance_std_error(&t),
            residual: st.variance - band.center,
            band_lo: band.lo,
            band_hi: band.hi,
        });
        checks.push(Check::new(
            format!("variance band b={b}"),
            band.contains(st.variance),
            format!(
                "Var T = {:.4} in [{:.4}, {:.4}]",
                st.variance, band.lo, band.hi
            ),
        ));
    }
    let mut agg = constant_aggregates(&c);
    agg.insert("censored".into(), censored as f64);
    Ok(Parts {
        table: Table::Expansion(rows),
        aggregates: agg,
        checks,
    })
}

fn rank_sprt_et(config: &ExperimentConfig) -> Result<Parts> {
    let rc = config.rank_config()?;
    let q = QuadratureSpec::default();
    let side = RankSide::of(&rc, &q)?;
    let inc = IncrementModel::rank_sprt(rc.delta, rc.a_exp, side == RankSide::Lower)?;
    let c = renewal_constants(config, &inc)?;
    let (c_val, h_val) = if rc.a_exp == 1.0 {
        (c_eta(eta_of(rc.delta), 1600)?.extrapolated, 0.0)
    } else {
        (0.0, h_integral(rc.delta, rc.a_exp, &q)?)
    };
    let predicted = predict_et_rank(&rc, side, &c, c_val, h_val)?;

    let seed = sub_seed(config.master_seed, TAG_MAIN, 0);
    let records = replicate(config.reps, seed, |_, s| run_sprt(&rc, s, config.max_steps))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<SprtRow> = records
        .iter()
        .enumerate()
        .map(|(rep, r)| SprtRow {
            rep,
            stop_n: r.stop_index,
            boundary: if r.censored {
                "censored"
            } else if r.hit_lower {
                "lower"
            } else {
                "upper"
            }
            .to_string(),
            overshoot: r.overshoot,
        })
        .collect();
    let kept: Vec<_> = records.iter().filter(|r| !r.censored).collect();
    let st = SampleStats::from_values(kept.iter().map(|r| r.stop_index as f64));
    let upper = kept.iter().filter(|r| !r.hit_lower).count() as f64 / kept.len().max(1) as f64;
    let mu = c.mu;
    let diff = mu * (st.mean - predicted);
    let se = mu * st.std_error;
    let tol = (4.0 * se).max(1.0);

    let mut agg = constant_aggregates(&c);
    agg.insert(
        "side".into(),
        if side == RankSide::Upper { 1.0 } else { -1.0 },
    );
    agg.insert("c_eta".into(), c_val);
    agg.insert("h_integral".into(), h_val);
    agg.insert("predicted_et".into(), predicted);
    agg.insert("mc_et".into(), st.mean);
    agg.insert("mc_et_se".into(), st.std_error);
    agg.insert("p_upper".into(), upper);
    agg.insert("censored".into(), (records.len() - kept.len()) as f64);
    let checks = vec![Check::new(
        "rank expected sample size",
        diff.abs() <= tol,
        format!("mu (E T - predicted) = {diff:.4}, tolerance {tol:.4}"),
    )];
    Ok(Parts {
        table: Table::Sprt(rows),
        aggregates: agg,
        checks,
    })
}

fn xi_scaling(config: &ExperimentConfig) -> Result<Parts> {
    let cp = config.constants_params()?;
    let grid: Vec<usize> = config.n_grid.iter().map(|&n| n as usize).collect();
    let seed = sub_seed(config.master_seed, TAG_MAIN, 0);
    let r = xi_scaling_check(cp.delta, &grid, config.reps, seed)?;
    let last = r.rows.last().expect("n_grid is non-empty");
    let ratio_ok = if r.target_ratio == 0.0 {
        last.var_ratio == 0.0
    } else {
        (last.var_ratio / r.target_ratio - 1.0).abs() <= 0.15
    };
    let mut checks = vec![Check::new(
        format!("variance ratio n={}", last.n),
        ratio_ok,
        format!("{:.5} vs {:.5}", last.var_ratio, r.target_ratio),
    )];
    for row in &r.rows {
        checks.push(Check::new(
            format!("mean n={}", row.n),
            row.mean_residual.abs() <= 4.0 * row.se,
            format!("residual {:.5}, se {:.5}", row.mean_residual, row.se),
        ));
    }
    let mut agg = BTreeMap::new();
    agg.insert("eta".into(), r.eta);
    agg.insert("target_ratio".into(), r.target_ratio);
    agg.insert("c_eta".into(), r.c_eta);
    agg.insert("fitted_limit".into(), r.fitted_limit);
    Ok(Parts {
        table: Table::XiScaling(r.rows),
        aggregates: agg,
        checks,
    })
}

fn diagnostics(config: &ExperimentConfig) -> Result<Parts> {
    let model = config.process()?;
    let seed = sub_seed(config.master_seed, TAG_MAIN, 0);
    let r = regularity_diagnostics(
        &model,
        &config.truncation,
        &config.n_grid,
        config.reps,
        seed,
        config.eta_star,
    )?;
    let mut checks: Vec<Check> = Vec::new();
    for rec in &r.records {
        if !checks.iter().any(|c| c.name == rec.condition) {
            checks.push(Check::new(
                rec.condition.clone(),
                rec.pass,
                "non-increasing over the upper half of the grid",
            ));
        }
    }
    let mut agg = BTreeMap::new();
    agg.insert("window_m".into(), r.window_m);
    Ok(Parts {
        table: Table::Diagnostics(r.records),
        aggregates: agg,
        checks,
    })
}

fn constants(config: &ExperimentConfig) -> Result<Parts> {
    let cp = config.constants_params()?;
    let eta = cp.eta.unwrap_or_else(|| eta_of(cp.delta));
    let report = constants_report(
        cp.delta,
        cp.a_exp,
        eta,
        cp.n_max,
        &QuadratureSpec::default(),
    )?;
    let mut agg = BTreeMap::new();
    agg.insert("mu".into(), report.mu);
    agg.insert("c_eta".into(), report.c_eta);
    if let Some(h) = report.h_integral {
        agg.insert("h_integral".into(), h);
    }
    Ok(Parts {
        table: Table::Constants(report),
        aggregates: agg,
        checks: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_renewal_summary() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"linear-renewal\"\nreps = 4000\nmaster_seed = 3\nb_grid = [5.0, 10.0]\nrenewal_reps = 2000\n[increment]\nkind = \"exponential\"\nmean = 1.0\n",
        )
        .unwrap();
        let s = run(&cfg).unwrap();
        let Table::Expansion(rows) = &s.table else {
            panic!()
        };
        assert_eq!(rows.len(), 2);
        for (row, want) in rows.iter().zip([6.0, 11.0]) {
            assert!((row.mc - want).abs() < 5.0 * row.se, "{row:?}");
        }
    }

    #[test]
    fn constants_summary_has_log_eight_ninths() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"constants\"\nreps = 1\nmaster_seed = 0\n[constants]\ndelta = 2.0\na_exp = 1.0\nn_max = 200\n",
        )
        .unwrap();
        let s = run(&cfg).unwrap();
        assert!((s.aggregates["mu"] - (8.0f64 / 9.0).ln()).abs() < 1e-10);
    }
}
