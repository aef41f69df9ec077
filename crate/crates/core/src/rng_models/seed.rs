//! Per-replication RNG streams.
//!
//! Replication `r` of an experiment with master seed `m` uses the child seed
//! `child_seed(m, r)`, a pure function of both, so results never depend on
//! which worker thread ran which replication.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::Result;

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn child_seed(master: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(rep.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Two independent ChaCha8 streams sharing a seed: one drives the walk
/// increments, the other any auxiliary perturbation noise. Keeping them apart
/// means the increment path for a seed is the same whatever perturbation is
/// layered on top.
#[derive(Debug, Clone)]
pub struct ReplicationRng {
    pub steps: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl ReplicationRng {
    pub fn new(seed: u64) -> Self {
        let steps = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = ChaCha8Rng::seed_from_u64(seed);
        noise.set_stream(1);
        ReplicationRng { steps, noise }
    }
}

/// Runs `f(rep, child_seed)` for every replication in parallel and returns
/// the results in replication order.
pub fn replicate<T, F>(reps: usize, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|r| f(r, child_seed(master_seed, r as u64)))
        .collect()
}

/// Fallible [`replicate`]; the first error in replication order wins.
pub fn try_replicate<T, F>(reps: usize, master_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync + Send,
{
    replicate(reps, master_seed, f).into_iter().collect()
}
