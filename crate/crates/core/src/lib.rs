//! Simulation and numerical verification for nonlinear renewal theory.
//!
//! The crate covers perturbed random walks `Z_n = S_n + xi_n`, their
//! first-passage times, Monte Carlo estimates of the classical renewal
//! constants, second-order and intermediate expansions of `E T_b` and
//! `Var T_b`, and the two-sample rank SPRT for Lehmann alternatives whose
//! log-likelihood is itself a perturbed random walk.
//!
//! Module map:
//!
//! * [`rng_models`] - increment laws, perturbation generators, truncation
//!   parameters and reproducible per-replication RNG streams.
//! * [`renewal`] - the linear walk, `tau_b`, overshoots and renewal constants.
//! * [`perturbed_walk`] - `T_b`, the frozen-perturbation rule `tau_b*`,
//!   renewal counts and regularity diagnostics.
//! * [`expansion`] - expansion formulas and their Monte Carlo comparison.
//! * [`rank_sprt`] - the rank log-likelihood, the SPRT and its decomposition.
//! * [`constants`] - quadrature, the drift, the `h` integral and `C(eta)`.
//! * [`harness`] - experiment configuration, replication and output.

pub mod constants;
pub mod error;
pub mod expansion;
pub mod harness;
pub mod perturbed_walk;
pub mod rank_sprt;
pub mod renewal;
pub mod rng_models;
pub mod stats;

pub use error::{Error, Result};
