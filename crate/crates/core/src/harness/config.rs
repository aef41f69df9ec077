use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::expansion::DEFAULT_BAND_MULTIPLIER;
use crate::rank_sprt::RankSprtConfig;
use crate::renewal::DEFAULT_MAX_STEPS;
use crate::rng_models::{IncrementModel, PerturbationModel, ProcessModel, TruncationParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LinearRenewal,
    PerturbedExpansion,
    Intermediate,
    Variance,
    RankSprtEt,
    XiScaling,
    Diagnostics,
    Constants,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LinearRenewal => "linear-renewal",
            ExperimentKind::PerturbedExpansion => "perturbed-expansion",
            ExperimentKind::Intermediate => "intermediate",
            ExperimentKind::Variance => "variance",
            ExperimentKind::RankSprtEt => "rank-sprt-et",
            ExperimentKind::XiScaling => "xi-scaling",
            ExperimentKind::Diagnostics => "diagnostics",
            ExperimentKind::Constants => "constants",
        }
    }

    fn uses_b_grid(self) -> bool {
        matches!(
            self,
            ExperimentKind::LinearRenewal
                | ExperimentKind::PerturbedExpansion
                | ExperimentKind::Intermediate
                | ExperimentKind::Variance
        )
    }
}

/// Parameters of the deterministic constants computation (also supplies
/// `Delta` for the xi-scaling experiment).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsParams {
    pub delta: f64,
    #[serde(default = "one")]
    pub a_exp: f64,
    /// Defaults to `(Delta - 1)/(Delta + 1)`.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn one() -> f64 {
    1.0
}

fn default_n_max() -> usize {
    1600
}

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

fn default_band() -> f64 {
    DEFAULT_BAND_MULTIPLIER
}

fn default_renewal_reps() -> usize {
    10_000
}

/// One experiment, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    #[serde(default)]
    pub exact_repro: bool,
    #[serde(default)]
    pub b_grid: Vec<f64>,
    #[serde(default)]
    pub n_grid: Vec<u64>,
    #[serde(default)]
    pub increment: Option<IncrementModel>,
    #[serde(default)]
    pub perturbation: PerturbationModel,
    #[serde(default)]
    pub truncation: TruncationParams,
    /// `eta_*` of the frozen rule; defaults to `2 theta / mu^(1+alpha)`.
    #[serde(default)]
    pub eta_star: Option<f64>,
    #[serde(default)]
    pub rank: Option<RankSprtConfig>,
    #[serde(default)]
    pub constants: Option<ConstantsParams>,
    #[serde(default = "default_band")]
    pub band_multiplier: f64,
    /// Replications for the ladder-moment estimates.
    #[serde(default = "default_renewal_reps")]
    pub renewal_reps: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn process(&self) -> Result<ProcessModel> {
        let inc = self.increment_model()?;
        ProcessModel::new(inc, self.perturbation)
    }

    pub fn increment_model(&self) -> Result<IncrementModel> {
        self.increment.ok_or_else(|| {
            Error::Config(format!(
                "{} needs an [increment] table",
                self.experiment.name()
            ))
        })
    }

    pub fn rank_config(&self) -> Result<RankSprtConfig> {
        self.rank.ok_or_else(|| {
            Error::Config(format!("{} needs a [rank] table", self.experiment.name()))
        })
    }

    pub fn constants_params(&self) -> Result<ConstantsParams> {
        self.constants.ok_or_else(|| {
            Error::Config(format!(
                "{} needs a [constants] table",
                self.experiment.name()
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.max_steps < 1 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if !(self.band_multiplier > 0.0 && self.band_multiplier.is_finite()) {
            return Err(Error::Config("band_multiplier must be positive".into()));
        }
        if self.renewal_reps < 2 {
            return Err(Error::Config("renewal_reps must be at least 2".into()));
        }
        if self.experiment.uses_b_grid() {
            if self.b_grid.is_empty() {
                return Err(Error::Config("b_grid must not be empty".into()));
            }
            if self.b_grid.iter().any(|b| !b.is_finite())
                || self.b_grid.windows(2).any(|w| w[1] <= w[0])
            {
                return Err(Error::Config(
                    "b_grid must be finite and strictly increasing".into(),
                ));
            }
        }
        if matches!(
            self.experiment,
            ExperimentKind::XiScaling | ExperimentKind::Diagnostics
        ) {
            if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(
                    "n_grid must be non-empty and strictly increasing".into(),
                ));
            }
            if self.reps < 2 {
                return Err(Error::Config(
                    "reps must be at least 2 for a variance estimate".into(),
                ));
            }
        }
        match self.experiment {
            ExperimentKind::LinearRenewal | ExperimentKind::Variance => {
                self.increment_model()?.require_positive_drift()?;
            }
            ExperimentKind::PerturbedExpansion
            | ExperimentKind::Intermediate
            | ExperimentKind::Diagnostics => {
                let p = self.process()?;
                self.truncation.validate(p.mu())?;
            }
            ExperimentKind::RankSprtEt => self.rank_config()?.validate()?,
            ExperimentKind::XiScaling | ExperimentKind::Constants => {
                let c = self.constants_params()?;
                if !(c.delta > 0.0 && c.a_exp > 0.0) {
                    return Err(Error::Config("Delta and A must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            experiment = "perturbed-expansion"
            reps = 100
            master_seed = 7
            b_grid = [50.0, 100.0]

            [increment]
            kind = "exponential"
            mean = 1.0

            [perturbation]
            kind = "scaled-partial-sum"

            [truncation]
            theta = 0.5
            theta_star = 0.5
            alpha = 0.6
            delta0 = 0.5
            k = 1.0
            w0 = 0.5
            p = 1.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::PerturbedExpansion);
        assert_eq!(cfg.max_steps, DEFAULT_MAX_STEPS);
        assert!(!cfg.exact_repro);
    }

    #[test]
    fn rejects_empty_or_unsorted_grid() {
        let base = "experiment = \"linear-renewal\"\nreps = 10\nmaster_seed = 1\n[increment]\nkind = \"exponential\"\nmean = 1.0\n";
        let err = ExperimentConfig::from_toml_str(base).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let unsorted = format!("b_grid = [10.0, 5.0]\n{base}");
        assert!(ExperimentConfig::from_toml_str(&unsorted).is_err());
    }

    #[test]
    fn unknown_keys_and_kinds_are_config_errors() {
        let e =
            ExperimentConfig::from_toml_str("experiment = \"nope\"\nreps = 1\nmaster_seed = 1\n");
        assert!(matches!(e, Err(Error::Config(_))));
        let e = ExperimentConfig::from_toml_str(
            "experiment = \"linear-renewal\"\nreps = 1\nmaster_seed = 1\nb_grid=[1.0]\n[increment]\nkind = \"cauchy\"\n",
        );
        assert!(matches!(e, Err(Error::Config(_))));
    }
}
