//! Prefix-based early abort.
//!
//! Every likelihood factor is <= 1, so the running product over a prefix of
//! measurement outcomes upper-bounds the final shot likelihood. A shot can
//! therefore be aborted, and counted as rejected, at the first measurement
//! where the prefix product already falls below the threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit_ir::Circuit;
use crate::lightcone::LightconeSet;
use crate::noise_sim::{sample_shot, shot_rng, NoiseParams};
use crate::postselect::{
    decide, single_log_likelihood, PostSelectError, PostSelectPolicy, Strategy,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbortReport {
    pub aborted_fraction: f64,
    pub mean_gates_executed: f64,
    pub mean_gates_saved: f64,
    /// Abort-mode accept/reject equals the full-run decision on every shot.
    pub decisions_consistent: bool,
    pub n_shots: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum AbortError {
    #[error("early abort requires a validation strategy")]
    NoValidation,
    #[error(transparent)]
    PostSelect(#[from] PostSelectError),
    #[error("prefix length {got} exceeds measurement count {k}")]
    PrefixTooLong { got: usize, k: usize },
    #[error("n_shots must be >= 1")]
    EmptyBatch,
}

/// Likelihood product restricted to the first `|m_prefix|` measurements.
pub fn prefix_likelihood(
    m_prefix: &[u8],
    lcs: &LightconeSet,
    np: &NoiseParams,
) -> Result<f64, AbortError> {
    if m_prefix.len() > lcs.k() {
        return Err(AbortError::PrefixTooLong { got: m_prefix.len(), k: lcs.k() });
    }
    let mut log_sum = 0.0f64;
    for (bit, cone) in m_prefix.iter().zip(&lcs.cones) {
        if *bit == 1 {
            log_sum += single_log_likelihood(cone.size(), np);
        }
    }
    Ok(log_sum.exp())
}

/// Replays the exact substreams of `sample_batch` and aborts each shot at
/// the first visible measurement whose prefix likelihood crosses below the
/// threshold. Gates after that measurement's position count as saved.
pub fn simulate_with_abort(
    c: &Circuit,
    lcs: &LightconeSet,
    np: &NoiseParams,
    policy: &PostSelectPolicy,
    n_shots: usize,
    seed: u64,
) -> Result<AbortReport, AbortError> {
    if policy.strategy == Strategy::NoValidation {
        return Err(AbortError::NoValidation);
    }
    if n_shots == 0 {
        return Err(AbortError::EmptyBatch);
    }
    let total_gates = c.gates.len();
    let per_shot: Vec<(bool, usize, bool)> = (0..n_shots)
        .into_par_iter()
        .map(|j| {
            let mut rng = shot_rng(seed, j as u64);
            let shot = sample_shot(c, lcs, np, &mut rng);
            let mut log_sum = 0.0f64;
            let mut abort_at: Option<usize> = None;
            for (i, cone) in lcs.cones.iter().enumerate() {
                if shot.m[i] == 1 && policy.sees(cone.kind) {
                    log_sum += single_log_likelihood(cone.size(), np);
                    if log_sum.exp() < policy.threshold {
                        abort_at = Some(i);
                        break;
                    }
                }
            }
            let executed = match abort_at {
                Some(i) => c.gates_up_to(lcs.cones[i].after_gate),
                None => total_gates,
            };
            let full = decide(&shot, lcs, np, policy).expect("aligned batch");
            let consistent = abort_at.is_some() == !full.accepted();
            (abort_at.is_some(), executed, consistent)
        })
        .collect();
    let n = n_shots as f64;
    let aborted = per_shot.iter().filter(|(a, _, _)| *a).count();
    let executed: usize = per_shot.iter().map(|(_, e, _)| *e).sum();
    let consistent = per_shot.iter().all(|(_, _, c)| *c);
    Ok(AbortReport {
        aborted_fraction: aborted as f64 / n,
        mean_gates_executed: executed as f64 / n,
        mean_gates_saved: (total_gates * n_shots - executed) as f64 / n,
        decisions_consistent: consistent,
        n_shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_gen::{generate, AuxReuse, GeneratorConfig};
    use crate::lightcone::lightcone_set;
    use crate::noise_sim::sample_shot_with_failures;
    use std::collections::BTreeSet;

    fn setup() -> (Circuit, LightconeSet) {
        let cfg = GeneratorConfig {
            n_blocks: 3,
            data_qubits: 4,
            aux_qubits: 2,
            gates_per_block_half: 5,
            aux_reuse: AuxReuse::ReuseAcrossBlocks,
            seed: 5,
        };
        let c = generate(&cfg).unwrap();
        let lcs = lightcone_set(&c).unwrap();
        (c, lcs)
    }

    #[test]
    fn empty_prefix_is_one() {
        let (_c, lcs) = setup();
        let np = NoiseParams::new(1e-3, 0.5, 1e-2).unwrap();
        assert_eq!(prefix_likelihood(&[], &lcs, &np).unwrap(), 1.0);
    }

    #[test]
    fn full_prefix_equals_shot_likelihood() {
        let (_c, lcs) = setup();
        let np = NoiseParams::new(1e-3, 0.5, 1e-2).unwrap();
        let k = lcs.k();
        for pattern in 0..(1usize << k.min(6)) {
            let m: Vec<u8> = (0..k).map(|i| ((pattern >> i) & 1) as u8).collect();
            let full = crate::postselect::shot_likelihood(&m, &lcs, &np).unwrap();
            assert_eq!(prefix_likelihood(&m, &lcs, &np).unwrap(), full);
        }
    }

    #[test]
    fn prefix_bounds_full_likelihood() {
        let (_c, lcs) = setup();
        let np = NoiseParams::new(1e-3, 0.5, 1e-2).unwrap();
        let k = lcs.k();
        let m: Vec<u8> = (0..k).map(|i| (i % 2) as u8).collect();
        let full = crate::postselect::shot_likelihood(&m, &lcs, &np).unwrap();
        for j in 0..=k {
            assert!(prefix_likelihood(&m[..j], &lcs, &np).unwrap() >= full);
        }
    }

    #[test]
    fn zero_threshold_never_aborts() {
        let (c, lcs) = setup();
        let np = NoiseParams::new(0.01, 0.5, 0.01).unwrap();
        let policy = PostSelectPolicy::new(0.0, Strategy::AllResetPoints).unwrap();
        let rep = simulate_with_abort(&c, &lcs, &np, &policy, 2000, 1).unwrap();
        assert_eq!(rep.aborted_fraction, 0.0);
        assert_eq!(rep.mean_gates_saved, 0.0);
        assert!(rep.decisions_consistent);
    }

    #[test]
    fn forced_early_failure_saves_later_blocks() {
        let (c, lcs) = setup();
        // q = 0, r = 1: a forced failure in the first block's cone flips
        // every cone containing it deterministically and nothing else
        // fires; p stays positive so the model can blame gate errors.
        let np = NoiseParams::new(0.01, 1.0, 0.0).unwrap();
        let first_cone = &lcs.cones[0];
        let g = *first_cone.gate_ids.iter().next().unwrap();
        let forced: BTreeSet<u32> = [g].into_iter().collect();
        let mut rng = shot_rng(0, 0);
        let shot = sample_shot_with_failures(&lcs, &np, &forced, &mut rng);
        assert_eq!(shot.m[0], 1);
        // with q = 0 any observed 1 has likelihood factor 0 < threshold
        let policy = PostSelectPolicy::new(0.5, Strategy::AllResetPoints).unwrap();
        let mut log_sum = 0.0f64;
        let mut abort_at = None;
        for (i, cone) in lcs.cones.iter().enumerate() {
            if shot.m[i] == 1 && policy.sees(cone.kind) {
                log_sum += single_log_likelihood(cone.size(), &np);
                if log_sum.exp() < policy.threshold {
                    abort_at = Some(i);
                    break;
                }
            }
        }
        assert_eq!(abort_at, Some(0));
        assert!(c.gates_up_to(lcs.cones[0].after_gate) < c.gates.len());
    }

    #[test]
    fn abort_decisions_match_full_run() {
        let (c, lcs) = setup();
        let np = NoiseParams::new(0.02, 0.5, 0.02).unwrap();
        for th in [0.2, 0.5, 0.9] {
            let policy = PostSelectPolicy::new(th, Strategy::AllResetPoints).unwrap();
            let rep = simulate_with_abort(&c, &lcs, &np, &policy, 5000, 77).unwrap();
            assert!(rep.decisions_consistent, "threshold {th}");
            let total = c.gates.len() as f64;
            assert!((rep.mean_gates_executed + rep.mean_gates_saved - total).abs() < 1e-9);
        }
    }

    #[test]
    fn no_validation_is_rejected() {
        let (c, lcs) = setup();
        let np = NoiseParams::new(0.01, 0.5, 0.01).unwrap();
        let policy = PostSelectPolicy::new(0.5, Strategy::NoValidation).unwrap();
        assert_eq!(
            simulate_with_abort(&c, &lcs, &np, &policy, 10, 0).unwrap_err(),
            AbortError::NoValidation
        );
    }
}
