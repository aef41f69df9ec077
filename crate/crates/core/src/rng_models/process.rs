use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{IncrementKind, IncrementModel, IncrementSampler, PerturbationModel, ReplicationRng};
use crate::rank_sprt::{pair_increment, sample_pair, RankState};
use crate::{Error, Result};

/// Increment law plus perturbation: everything needed to generate `Z_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    pub increment: IncrementModel,
    #[serde(default)]
    pub perturbation: PerturbationModel,
}

impl ProcessModel {
    pub fn new(increment: IncrementModel, perturbation: PerturbationModel) -> Result<Self> {
        let model = ProcessModel {
            increment,
            perturbation,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn unperturbed(increment: IncrementModel) -> Self {
        ProcessModel {
            increment,
            perturbation: PerturbationModel::Zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rank_walk = matches!(
            self.increment.kind(),
            IncrementKind::RankSprtIncrement { .. }
        );
        match self.perturbation {
            PerturbationModel::RankResidual if !rank_walk => Err(Error::Config(
                "the rank-residual perturbation needs a rank-sprt-increment walk".into(),
            )),
            PerturbationModel::Constant { value } if !value.is_finite() => Err(Error::Config(
                format!("constant perturbation must be finite, got {value}"),
            )),
            PerturbationModel::ScaledPartialSum { amplitude } if !amplitude.is_finite() => Err(
                Error::Config(format!("amplitude must be finite, got {amplitude}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn mu(&self) -> f64 {
        self.increment.declared_mu()
    }

    pub fn stream(&self, seed: u64) -> Result<ProcessStream> {
        self.validate()?;
        let source = match (self.perturbation, *self.increment.kind()) {
            (
                PerturbationModel::RankResidual,
                IncrementKind::RankSprtIncrement {
                    delta,
                    a_exp,
                    negate,
                },
            ) => Source::Rank {
                state: RankState::new(delta)?,
                delta,
                a_exp,
                sign: if negate { -1.0 } else { 1.0 },
                q: super::rank_quadrature(),
            },
            (pert, _) => Source::Independent {
                sampler: self.increment.sampler()?,
                pert,
                eps_sum: 0.0,
            },
        };
        Ok(ProcessStream {
            rng: ReplicationRng::new(seed),
            source,
            n: 0,
            s: 0.0,
            xi: 0.0,
        })
    }
}

/// State after step `n`: the increment `x`, the walk `s = S_n` and the
/// perturbation `xi = xi_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepValues {
    pub n: u64,
    pub x: f64,
    pub s: f64,
    pub xi: f64,
}

impl StepValues {
    pub fn z(&self) -> f64 {
        self.s + self.xi
    }
}

#[derive(Debug, Clone)]
enum Source {
    Independent {
        sampler: IncrementSampler,
        pert: PerturbationModel,
        eps_sum: f64,
    },
    Rank {
        state: RankState,
        delta: f64,
        a_exp: f64,
        sign: f64,
        q: crate::constants::QuadratureSpec,
    },
}

/// Lazily generated path of `(S_n, xi_n)` for one replication.
///
/// `xi_n` only ever depends on randomness drawn at steps `1..=n`.
#[derive(Debug, Clone)]
pub struct ProcessStream {
    rng: ReplicationRng,
    source: Source,
    n: u64,
    s: f64,
    xi: f64,
}

impl ProcessStream {
    pub fn advance(&mut self) -> Result<StepValues> {
        self.n += 1;
        let x = match &mut self.source {
            Source::Independent {
                sampler,
                pert,
                eps_sum,
            } => {
                let x = sampler.sample(&mut self.rng.steps)?;
                self.xi = match *pert {
                    PerturbationModel::Zero => 0.0,
                    PerturbationModel::Constant { value } => value,
                    PerturbationModel::ScaledPartialSum { amplitude } => {
                        let eps = if self.rng.noise.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        };
                        *eps_sum += eps / (self.n as f64).sqrt();
                        amplitude * *eps_sum
                    }
                    PerturbationModel::RankResidual => unreachable!("validated in stream()"),
                };
                x
            }
            Source::Rank {
                state,
                delta,
                a_exp,
                sign,
                q,
            } => {
                let (u, v) = loop {
                    let (u, v) = sample_pair(&mut self.rng.steps, *a_exp);
                    if !state.contains(u) && !state.contains(v) && u != v {
                        break (u, v);
                    }
                };
                let inc = pair_increment(u, v, *delta, *a_exp, q)?;
                let z = state.step(u, v)?;
                let x = *sign * inc;
                self.xi = *sign * z - (self.s + x);
                x
            }
        };
        self.s += x;
        Ok(StepValues {
            n: self.n,
            x,
            s: self.s,
            xi: self.xi,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.n
    }
}

/// `(xi_1, ..., xi_n)` for the replication seeded with `seed`.
pub fn generate_perturbation(model: &ProcessModel, seed: u64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Config("need at least one step".into()));
    }
    let mut stream = model.stream(seed)?;
    (0..n).map(|_| stream.advance().map(|v| v.xi)).collect()
}
