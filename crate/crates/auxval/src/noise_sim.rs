//! Stochastic gate/readout noise sampling.
//!
//! The model has three parameters: each gate fails independently with
//! probability `p`; a failed gate inside a measurement's lightcone flips
//! that outcome with probability `r` (multiple contributions combine by
//! XOR); each validation readout is flipped with probability `q`.
//!
//! Shots draw from counter-based substreams keyed by `(seed, shot index)`,
//! so batches are bit-identical regardless of worker count.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit_ir::{Circuit, GateId};
use crate::lightcone::LightconeSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Per-gate failure probability.
    pub p: f64,
    /// Per-failed-gate flip probability of an affected measurement.
    pub r: f64,
    /// Readout error probability.
    pub q: f64,
    /// Probability that a failed gate flips the logical output; defaults to `r`.
    #[serde(default)]
    pub delta_flip_prob: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("noise parameter {name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("n_shots must be >= 1")]
    EmptyBatch,
}

impl NoiseParams {
    pub fn new(p: f64, r: f64, q: f64) -> Result<Self, NoiseError> {
        let np = NoiseParams { p, r, q, delta_flip_prob: None };
        np.validate()?;
        Ok(np)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let fields = [
            ("p", self.p),
            ("r", self.r),
            ("q", self.q),
            ("delta_flip_prob", self.delta_flip_prob.unwrap_or(self.r)),
        ];
        for (name, value) in fields {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(NoiseError::OutOfRange { name, value });
            }
        }
        Ok(())
    }

    pub fn delta_flip(&self) -> f64 {
        self.delta_flip_prob.unwrap_or(self.r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub failed_gates: Vec<GateId>,
    /// Observed validation outcomes, one bit per measurement point.
    pub m: Vec<u8>,
    /// Pre-readout auxiliary states.
    pub true_premeasure: Vec<u8>,
    /// At least one gate failed anywhere in the circuit.
    pub corrupted: bool,
    /// At least one failed gate lies inside the union of the lightcones.
    pub detectable: bool,
    /// Realization of the logical-output deviation for this shot.
    pub final_output_flipped: bool,
}

/// RNG substream for shot `index` of a batch seeded with `seed`.
pub fn shot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Sample one shot. Draw order is fixed: gate failures in program order,
/// then per measurement the flip draws for failed cone gates in ascending
/// gate id, then readout flips, then the logical-output flips.
pub fn sample_shot(
    c: &Circuit,
    lcs: &LightconeSet,
    np: &NoiseParams,
    rng: &mut impl Rng,
) -> ShotRecord {
    let mut failed = BTreeSet::new();
    for g in &c.gates {
        if rng.random_bool(np.p) {
            failed.insert(g.id);
        }
    }
    finish_shot(lcs, np, failed, rng)
}

/// Sample a shot conditioned on a fixed failure set; gate-failure draws are
/// skipped, all downstream draws behave exactly as in [`sample_shot`].
pub fn sample_shot_with_failures(
    lcs: &LightconeSet,
    np: &NoiseParams,
    failed_gates: &BTreeSet<GateId>,
    rng: &mut impl Rng,
) -> ShotRecord {
    finish_shot(lcs, np, failed_gates.clone(), rng)
}

fn finish_shot(
    lcs: &LightconeSet,
    np: &NoiseParams,
    failed: BTreeSet<GateId>,
    rng: &mut impl Rng,
) -> ShotRecord {
    let k = lcs.k();
    let mut true_premeasure = vec![0u8; k];
    for (i, cone) in lcs.cones.iter().enumerate() {
        for g in &failed {
            if cone.contains(*g) && rng.random_bool(np.r) {
                true_premeasure[i] ^= 1;
            }
        }
    }
    let mut m = true_premeasure.clone();
    for bit in m.iter_mut() {
        if rng.random_bool(np.q) {
            *bit ^= 1;
        }
    }
    let mut final_output_flipped = false;
    let dp = np.delta_flip();
    for _ in &failed {
        if rng.random_bool(dp) {
            final_output_flipped ^= true;
        }
    }
    let corrupted = !failed.is_empty();
    let detectable = failed.iter().any(|g| lcs.covers(*g));
    ShotRecord {
        failed_gates: failed.into_iter().collect(),
        m,
        true_premeasure,
        corrupted,
        detectable,
        final_output_flipped,
    }
}

/// Deterministic batch: shot `j` uses substream `(seed, j)`, so the result
/// is identical for any worker count. Parallelized over shots.
pub fn sample_batch(
    c: &Circuit,
    lcs: &LightconeSet,
    np: &NoiseParams,
    n_shots: usize,
    seed: u64,
) -> Result<Vec<ShotRecord>, NoiseError> {
    if n_shots == 0 {
        return Err(NoiseError::EmptyBatch);
    }
    np.validate()?;
    Ok((0..n_shots)
        .into_par_iter()
        .map(|j| {
            let mut rng = shot_rng(seed, j as u64);
            sample_shot(c, lcs, np, &mut rng)
        })
        .collect())
}
