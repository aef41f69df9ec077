//! Increment laws, perturbation generators and truncation parameters.

mod process;
pub mod seed;

pub use process::{generate_perturbation, ProcessModel, ProcessStream, StepValues};
pub use seed::{child_seed, replicate, try_replicate, ReplicationRng};

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::constants::{drift_mu, QuadratureSpec};
use crate::rank_sprt::{pair_increment, sample_pair};
use crate::{Error, Result};

/// Law of a single walk increment `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IncrementKind {
    Deterministic {
        value: f64,
    },
    Exponential {
        mean: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    ShiftedNormal {
        mu: f64,
        sigma: f64,
    },
    /// Per-pair increment of the rank log-likelihood walk for data
    /// `F = U(0,1)`, `G = F^a_exp` under the test exponent `delta`. With
    /// `negate` the walk is reflected, which is how the lower boundary of the
    /// SPRT is handled when the drift is negative.
    RankSprtIncrement {
        delta: f64,
        a_exp: f64,
        #[serde(default)]
        negate: bool,
    },
}

/// An increment law together with its drift and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IncrementKind", into = "IncrementKind")]
pub struct IncrementModel {
    kind: IncrementKind,
    declared_mu: f64,
    declared_sigma2: Option<f64>,
}

impl TryFrom<IncrementKind> for IncrementModel {
    type Error = Error;

    fn try_from(kind: IncrementKind) -> Result<Self> {
        IncrementModel::new(kind)
    }
}

impl From<IncrementModel> for IncrementKind {
    fn from(m: IncrementModel) -> Self {
        m.kind
    }
}

impl IncrementModel {
    pub fn new(kind: IncrementKind) -> Result<Self> {
        let bad = |msg: String| Err(Error::Config(msg));
        let (mu, sigma2) = match kind {
            IncrementKind::Deterministic { value } => {
                if !value.is_finite() {
                    return bad(format!("deterministic value must be finite, got {value}"));
                }
                (value, Some(0.0))
            }
            IncrementKind::Exponential { mean } => {
                if !(mean > 0.0 && mean.is_finite()) {
                    return bad(format!("exponential mean must be positive, got {mean}"));
                }
                (mean, Some(mean * mean))
            }
            IncrementKind::Uniform { lo, hi } => {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return bad(format!("uniform needs lo < hi, got [{lo}, {hi}]"));
                }
                (0.5 * (lo + hi), Some((hi - lo).powi(2) / 12.0))
            }
            IncrementKind::ShiftedNormal { mu, sigma } => {
                if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
                    return bad(format!(
                        "normal needs finite mu and sigma > 0, got ({mu}, {sigma})"
                    ));
                }
                (mu, Some(sigma * sigma))
            }
            IncrementKind::RankSprtIncrement {
                delta,
                a_exp,
                negate,
            } => {
                let mu = drift_mu(delta, a_exp, &QuadratureSpec::default())?;
                (if negate { -mu } else { mu }, None)
            }
        };
        Ok(IncrementModel {
            kind,
            declared_mu: mu,
            declared_sigma2: sigma2,
        })
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        Self::new(IncrementKind::Deterministic { value })
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        Self::new(IncrementKind::Exponential { mean })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(IncrementKind::Uniform { lo, hi })
    }

    pub fn shifted_normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(IncrementKind::ShiftedNormal { mu, sigma })
    }

    pub fn rank_sprt(delta: f64, a_exp: f64, negate: bool) -> Result<Self> {
        Self::new(IncrementKind::RankSprtIncrement {
            delta,
            a_exp,
            negate,
        })
    }

    pub fn kind(&self) -> &IncrementKind {
        &self.kind
    }

    pub fn declared_mu(&self) -> f64 {
        self.declared_mu
    }

    /// `None` when the variance has no closed form (rank increments).
    pub fn declared_sigma2(&self) -> Option<f64> {
        self.declared_sigma2
    }

    /// Non-lattice laws; the deterministic law is the only lattice one here.
    pub fn is_lattice(&self) -> bool {
        matches!(self.kind, IncrementKind::Deterministic { .. })
    }

    /// Crossing experiments need strictly positive drift.
    pub fn require_positive_drift(&self) -> Result<()> {
        if self.declared_mu > 0.0 {
            Ok(())
        } else {
            Err(Error::Drift(self.declared_mu))
        }
    }

    pub fn sampler(&self) -> Result<IncrementSampler> {
        Ok(match self.kind {
            IncrementKind::Deterministic { value } => IncrementSampler::Constant(value),
            IncrementKind::Exponential { mean } => IncrementSampler::Exponential(
                Exp::new(1.0 / mean).map_err(|e| Error::Config(e.to_string()))?,
            ),
            IncrementKind::Uniform { lo, hi } => IncrementSampler::Uniform(
                Uniform::new(lo, hi).map_err(|e| Error::Config(e.to_string()))?,
            ),
            IncrementKind::ShiftedNormal { mu, sigma } => IncrementSampler::Normal(
                Normal::new(mu, sigma).map_err(|e| Error::Config(e.to_string()))?,
            ),
            IncrementKind::RankSprtIncrement {
                delta,
                a_exp,
                negate,
            } => IncrementSampler::Rank {
                delta,
                a_exp,
                sign: if negate { -1.0 } else { 1.0 },
                q: rank_quadrature(),
            },
        })
    }
}

/// Quadrature used for the per-pair rank increment.
pub(crate) fn rank_quadrature() -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: 1e-11,
        rel_tol: 1e-11,
        max_subdivisions: 500,
    }
}

/// Ready-to-draw form of an [`IncrementModel`].
#[derive(Debug, Clone)]
pub enum IncrementSampler {
    Constant(f64),
    Exponential(Exp<f64>),
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
    Rank {
        delta: f64,
        a_exp: f64,
        sign: f64,
        q: QuadratureSpec,
    },
}

impl IncrementSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match self {
            IncrementSampler::Constant(c) => *c,
            IncrementSampler::Exponential(d) => d.sample(rng),
            IncrementSampler::Uniform(d) => d.sample(rng),
            IncrementSampler::Normal(d) => d.sample(rng),
            IncrementSampler::Rank {
                delta,
                a_exp,
                sign,
                q,
            } => {
                let (x, y) = sample_pair(rng, *a_exp);
                sign * pair_increment(x, y, *delta, *a_exp, q)?
            }
        })
    }
}

/// Draws `n` increments from the step stream of `seed`.
pub fn sample_increments(model: &IncrementModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Config("need at least one increment".into()));
    }
    let sampler = model.sampler()?;
    let mut rng = ReplicationRng::new(seed);
    (0..n).map(|_| sampler.sample(&mut rng.steps)).collect()
}

/// Generator of the perturbation sequence `xi_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationModel {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `xi_n = amplitude * sum_{k<=n} eps_k / sqrt(k)` with Rademacher
    /// `eps_k`; a martingale with `Var xi_n = amplitude^2 H_n ~ log n`.
    ScaledPartialSum {
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `xi_n = Z_n - S_n` of the rank SPRT; pairs only with a
    /// [`IncrementKind::RankSprtIncrement`] walk.
    RankResidual,
}

fn one() -> f64 {
    1.0
}

impl PerturbationModel {
    pub fn scaled_partial_sum() -> Self {
        PerturbationModel::ScaledPartialSum { amplitude: 1.0 }
    }
}

/// Growth function `rho(x) = max(1, x^beta (log(e + x))^gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rho {
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl Default for Rho {
    fn default() -> Self {
        Rho::constant()
    }
}

impl Rho {
    pub fn constant() -> Self {
        Rho {
            beta: 0.0,
            gamma: 0.0,
        }
    }

    pub fn power(beta: f64) -> Self {
        Rho { beta, gamma: 0.0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.beta == 0.0 && self.gamma == 0.0 {
            return 1.0;
        }
        let x = x.max(0.0);
        (x.powf(self.beta) * (std::f64::consts::E + x).ln().powf(self.gamma)).max(1.0)
    }

    /// `rho >= 1` and `rho(x)/x` decreasing towards zero on `x = 2^j`.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) || !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!(
                "rho needs beta in [0, 1) and gamma >= 0, got beta={}, gamma={}",
                self.beta, self.gamma
            )));
        }
        let grid: Vec<f64> = (1..=60).map(|j| 2f64.powi(j)).collect();
        let ratios: Vec<f64> = grid.iter().map(|&x| self.eval(x) / x).collect();
        let decreasing = ratios.windows(2).all(|w| w[1] <= w[0]);
        if !decreasing || grid.iter().any(|&x| self.eval(x) < 1.0) || ratios[59] > 1e-3 {
            return Err(Error::Config(format!(
                "rho(x)/x is not decreasing to zero for beta={}, gamma={}",
                self.beta, self.gamma
            )));
        }
        Ok(())
    }
}

/// Parameters of the truncation `zeta_n = (xi_n ^ theta n^alpha) v (-theta* n^alpha)`
/// and of the regularity conditions built on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationParams {
    pub theta: f64,
    pub theta_star: f64,
    pub alpha: f64,
    pub delta0: f64,
    pub k: f64,
    pub w0: f64,
    pub p: f64,
    #[serde(default)]
    pub rho: Rho,
}

impl Default for TruncationParams {
    fn default() -> Self {
        TruncationParams {
            theta: 0.5,
            theta_star: 0.5,
            alpha: 0.6,
            delta0: 0.5,
            k: 1.0,
            w0: 0.5,
            p: 1.0,
            rho: Rho::constant(),
        }
    }
}

impl TruncationParams {
    /// Checks the parameter ranges against the drift `mu` of the walk.
    pub fn validate(&self, mu: f64) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let positive = [
            ("theta", self.theta),
            ("theta_star", self.theta_star),
            ("k", self.k),
            ("w0", self.w0),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.alpha > 0.5 && self.alpha <= 1.0) {
            return fail(format!("alpha must lie in (1/2, 1], got {}", self.alpha));
        }
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return fail(format!("delta0 must lie in (0, 1), got {}", self.delta0));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return fail(format!("p must be at least 1, got {}", self.p));
        }
        if !(mu > 0.0) {
            return Err(Error::Drift(mu));
        }
        if self.theta_star >= self.k * mu {
            return fail(format!(
                "theta_star = {} must be below K mu = {}",
                self.theta_star,
                self.k * mu
            ));
        }
        if self.alpha == 1.0 && self.theta >= mu {
            return fail(format!(
                "alpha = 1 requires theta < mu, got theta = {}",
                self.theta
            ));
        }
        self.rho.validate()
    }

    pub fn upper_cap(&self, n: u64) -> f64 {
        self.theta * (n as f64).powf(self.alpha)
    }

    pub fn lower_cap(&self, n: u64) -> f64 {
        -self.theta_star * (n as f64).powf(self.alpha)
    }
}

/// Draws a uniform on the open interval `(0, 1)`.
pub(crate) fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_draws() {
        let m = IncrementModel::deterministic(2.0).unwrap();
        assert_eq!(sample_increments(&m, 3, 1).unwrap(), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn same_seed_same_sequence() {
        let m = IncrementModel::exponential(1.0).unwrap();
        let a = sample_increments(&m, 100, 42).unwrap();
        let b = sample_increments(&m, 100, 42).unwrap();
        let c = sample_increments(&m, 100, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn declared_moments() {
        let u = IncrementModel::uniform(0.0, 1.0).unwrap();
        assert_eq!(u.declared_mu(), 0.5);
        assert!((u.declared_sigma2().unwrap() - 1.0 / 12.0).abs() < 1e-15);
        let r = IncrementModel::rank_sprt(2.0, 1.0, true).unwrap();
        assert!((r.declared_mu() - (9.0f64 / 8.0).ln()).abs() < 1e-12);
        assert!(r.declared_sigma2().is_none());
    }

    #[test]
    fn invalid_laws_are_config_errors() {
        assert!(matches!(
            IncrementModel::exponential(-1.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            IncrementModel::uniform(1.0, 1.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            sample_increments(&IncrementModel::exponential(1.0).unwrap(), 0, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let err = toml::from_str::<IncrementModel>("kind = \"cauchy\"").unwrap_err();
        assert!(err.to_string().contains("cauchy"));
        let ok: IncrementModel = toml::from_str("kind = \"exponential\"\nmean = 2.0").unwrap();
        assert_eq!(ok.declared_mu(), 2.0);
    }

    #[test]
    fn truncation_constraints() {
        let tp = TruncationParams::default();
        tp.validate(1.0).unwrap();
        // theta_star must stay below K mu.
        assert!(tp.validate(0.4).is_err());
        let full = TruncationParams {
            alpha: 1.0,
            theta: 1.5,
            ..tp
        };
        assert!(full.validate(1.0).is_err());
        assert!(TruncationParams { alpha: 0.5, ..tp }.validate(1.0).is_err());
        assert!(matches!(tp.validate(-1.0), Err(Error::Drift(_))));
    }

    #[test]
    fn rho_family() {
        assert_eq!(Rho::constant().eval(1e6), 1.0);
        assert!((Rho::power(0.3).eval(1000.0) - 1000f64.powf(0.3)).abs() < 1e-9);
        assert_eq!(Rho::power(0.3).eval(0.5), 1.0);
        Rho::power(0.3).validate().unwrap();
        Rho {
            beta: 0.5,
            gamma: 1.0,
        }
        .validate()
        .unwrap();
        assert!(Rho::power(1.0).validate().is_err());
    }
}
