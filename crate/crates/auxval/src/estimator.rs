//! Retained-fraction, bias, variance, and FP/FN figures from
//! decision-tagged shot batches.
//!
//! Rates over empty denominators (e.g. the false-negative rate of a batch
//! with no corrupted shots) are reported as NaN.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise_sim::ShotRecord;
use crate::postselect::DecisionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionStats {
    pub f_good: f64,
    pub f_detectable: f64,
    pub f_undetectable: f64,
    pub f_retain: f64,
    pub p_retain_given_good: f64,
    pub p_retain_given_corrupted: f64,
    /// Good shots rejected / good shots.
    pub fp_rate: f64,
    /// Corrupted shots accepted / corrupted shots.
    pub fn_rate: f64,
    pub n_shots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceEstimate {
    /// In units of delta.
    pub bias: f64,
    /// 1 / f_retain.
    pub variance_inflation: f64,
    pub delta: f64,
    pub sigma_sq: f64,
    pub n_shots: usize,
    pub variance: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("empty shot batch")]
    EmptyInput,
    #[error("{shots} shots but {decisions} decisions")]
    LengthMismatch { shots: usize, decisions: usize },
    #[error("all shots rejected (f_retain = 0)")]
    AllRejected,
    #[error("invalid argument: {0}")]
    BadArgument(String),
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

pub fn selection_stats(
    shots: &[ShotRecord],
    decisions: &[DecisionRecord],
) -> Result<SelectionStats, EstimatorError> {
    if shots.is_empty() {
        return Err(EstimatorError::EmptyInput);
    }
    if shots.len() != decisions.len() {
        return Err(EstimatorError::LengthMismatch {
            shots: shots.len(),
            decisions: decisions.len(),
        });
    }
    let n = shots.len();
    let mut n_good = 0usize;
    let mut n_det = 0usize;
    let mut n_undet = 0usize;
    let mut acc_good = 0usize;
    let mut acc_det = 0usize;
    let mut acc_corrupted = 0usize;
    let mut accepted = 0usize;
    for (s, d) in shots.iter().zip(decisions) {
        let acc = d.accepted();
        accepted += acc as usize;
        if !s.corrupted {
            n_good += 1;
            acc_good += acc as usize;
        } else {
            acc_corrupted += acc as usize;
            if s.detectable {
                n_det += 1;
                acc_det += acc as usize;
            } else {
                n_undet += 1;
            }
        }
    }
    let n_corrupted = n_det + n_undet;
    Ok(SelectionStats {
        f_good: n_good as f64 / n as f64,
        f_detectable: n_det as f64 / n as f64,
        f_undetectable: n_undet as f64 / n as f64,
        f_retain: accepted as f64 / n as f64,
        p_retain_given_good: ratio(acc_good, n_good),
        p_retain_given_corrupted: ratio(acc_det, n_det),
        fp_rate: ratio(n_good - acc_good, n_good),
        fn_rate: ratio(acc_corrupted, n_corrupted),
        n_shots: n,
    })
}

fn weighted(coeff: f64, prob: f64) -> f64 {
    // a zero-weight class contributes nothing even when its conditional
    // probability is undefined (NaN)
    if coeff == 0.0 {
        0.0
    } else {
        coeff * prob
    }
}

/// Model-side retained fraction:
/// (f_good + f_undetectable) * Pr(retain|good) + f_detectable * Pr(retain|corrupted).
pub fn predicted_f_retain(stats: &SelectionStats) -> f64 {
    weighted(stats.f_good + stats.f_undetectable, stats.p_retain_given_good)
        + weighted(stats.f_detectable, stats.p_retain_given_corrupted)
}

/// Bias in units of delta:
/// delta * (f_det * Pr(retain|corrupted) + f_undet * Pr(retain|good)) / f_retain.
pub fn bias_estimate(stats: &SelectionStats, delta: f64) -> Result<f64, EstimatorError> {
    if stats.f_retain == 0.0 {
        return Err(EstimatorError::AllRejected);
    }
    let retained_corruption = weighted(stats.f_detectable, stats.p_retain_given_corrupted)
        + weighted(stats.f_undetectable, stats.p_retain_given_good);
    Ok(delta * retained_corruption / stats.f_retain)
}

/// sigma^2 / (N * f_retain).
pub fn variance_estimate(sigma_sq: f64, n: usize, f_retain: f64) -> Result<f64, EstimatorError> {
    if n == 0 {
        return Err(EstimatorError::BadArgument("n must be >= 1".into()));
    }
    if !(f_retain > 0.0 && f_retain <= 1.0) {
        return Err(EstimatorError::BadArgument(format!(
            "f_retain = {f_retain} outside (0, 1]"
        )));
    }
    Ok(sigma_sq / (n as f64 * f_retain))
}

pub fn bias_variance(
    stats: &SelectionStats,
    delta: f64,
    sigma_sq: f64,
) -> Result<BiasVarianceEstimate, EstimatorError> {
    let bias = bias_estimate(stats, delta)?;
    let variance = variance_estimate(sigma_sq, stats.n_shots, stats.f_retain)?;
    Ok(BiasVarianceEstimate {
        bias,
        variance_inflation: 1.0 / stats.f_retain,
        delta,
        sigma_sq,
        n_shots: stats.n_shots,
        variance,
    })
}
