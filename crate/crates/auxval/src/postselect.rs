//! Likelihood model and threshold-based accept/reject decisions.
//!
//! For a measurement with cone size `G`, an observed 1 is error-free with
//! approximate probability `q / (G*r*p + q)`. The shot likelihood is the
//! product of these factors over all observed 1s; a shot is rejected when
//! the likelihood falls strictly below the threshold. Products are
//! accumulated in log space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit_ir::MeasKind;
use crate::lightcone::LightconeSet;
use crate::noise_sim::{NoiseParams, ShotRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "none")]
    NoValidation,
    #[serde(rename = "final")]
    FinalOnly,
    #[serde(rename = "all")]
    AllResetPoints,
}

impl Strategy {
    pub fn cli_name(&self) -> &'static str {
        match self {
            Strategy::NoValidation => "none",
            Strategy::FinalOnly => "final",
            Strategy::AllResetPoints => "all",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Strategy::NoValidation),
            "final" => Ok(Strategy::FinalOnly),
            "all" => Ok(Strategy::AllResetPoints),
            other => Err(format!("unknown strategy `{other}` (expected none|final|all)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostSelectPolicy {
    pub threshold: f64,
    pub strategy: Strategy,
}

#[derive(Debug, Error, PartialEq)]
pub enum PostSelectError {
    #[error("threshold {0} is outside [0, 1]")]
    BadThreshold(f64),
    #[error("measurement vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

impl PostSelectPolicy {
    pub fn new(threshold: f64, strategy: Strategy) -> Result<Self, PostSelectError> {
        if !(0.0..=1.0).contains(&threshold) || threshold.is_nan() {
            return Err(PostSelectError::BadThreshold(threshold));
        }
        Ok(PostSelectPolicy { threshold, strategy })
    }

    /// Whether a measurement of the given kind is visible to this strategy.
    pub fn sees(&self, kind: MeasKind) -> bool {
        match self.strategy {
            Strategy::NoValidation => false,
            Strategy::FinalOnly => kind == MeasKind::Final,
            Strategy::AllResetPoints => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub decision: Decision,
    pub likelihood: f64,
}

impl DecisionRecord {
    pub fn accepted(&self) -> bool {
        self.decision == Decision::Accept
    }
}

/// Probability that lightcone `i` is error-free given an observed 1 there.
pub fn single_likelihood(g_i: usize, np: &NoiseParams) -> f64 {
    let gate_term = g_i as f64 * np.r * np.p;
    if np.q == 0.0 {
        // Nothing can explain the 1 except a gate error, unless the cone
        // term is also zero, in which case nothing can have gone wrong.
        if gate_term == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        np.q / (gate_term + np.q)
    }
}

/// Natural log of the single-measurement factor; -inf when the factor is 0.
pub fn single_log_likelihood(g_i: usize, np: &NoiseParams) -> f64 {
    single_likelihood(g_i, np).ln()
}

/// Eq-style shot likelihood: product over observed 1s of the per-cone
/// factor; the empty product is 1.
pub fn shot_likelihood(
    m: &[u8],
    lcs: &LightconeSet,
    np: &NoiseParams,
) -> Result<f64, PostSelectError> {
    if m.len() != lcs.k() {
        return Err(PostSelectError::LengthMismatch { got: m.len(), expected: lcs.k() });
    }
    let mut log_sum = 0.0f64;
    for (bit, cone) in m.iter().zip(&lcs.cones) {
        if *bit == 1 {
            log_sum += single_log_likelihood(cone.size(), np);
        }
    }
    Ok(log_sum.exp())
}

/// Likelihood restricted to the measurements the policy's strategy can see.
pub fn visible_likelihood(
    m: &[u8],
    lcs: &LightconeSet,
    np: &NoiseParams,
    policy: &PostSelectPolicy,
) -> Result<f64, PostSelectError> {
    if m.len() != lcs.k() {
        return Err(PostSelectError::LengthMismatch { got: m.len(), expected: lcs.k() });
    }
    let mut log_sum = 0.0f64;
    for (bit, cone) in m.iter().zip(&lcs.cones) {
        if *bit == 1 && policy.sees(cone.kind) {
            log_sum += single_log_likelihood(cone.size(), np);
        }
    }
    Ok(log_sum.exp())
}

/// Accept iff the visible likelihood is >= the threshold (boundary accepted).
pub fn decide(
    shot: &ShotRecord,
    lcs: &LightconeSet,
    np: &NoiseParams,
    policy: &PostSelectPolicy,
) -> Result<DecisionRecord, PostSelectError> {
    let likelihood = visible_likelihood(&shot.m, lcs, np, policy)?;
    let decision = if likelihood >= policy.threshold { Decision::Accept } else { Decision::Reject };
    Ok(DecisionRecord { decision, likelihood })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_ir::parse_circuit;
    use crate::lightcone::lightcone_set;

    fn approx(a: f64, b: f64) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} != {b}");
    }

    #[test]
    fn empty_cone_factor_is_one() {
        let np = NoiseParams::new(0.5, 0.5, 0.1).unwrap();
        approx(single_likelihood(0, &np), 1.0);
    }

    #[test]
    fn no_gate_errors_factor_is_one() {
        let np = NoiseParams::new(0.0, 0.5, 0.1).unwrap();
        approx(single_likelihood(1000, &np), 1.0);
    }

    #[test]
    fn worked_example_value() {
        let np = NoiseParams::new(1e-3, 0.5, 1e-2).unwrap();
        approx(single_likelihood(100, &np), 1.0 / 6.0);
    }

    #[test]
    fn degenerate_q_zero() {
        let np = NoiseParams::new(0.0, 0.0, 0.0).unwrap();
        approx(single_likelihood(0, &np), 1.0);
        let np = NoiseParams::new(0.1, 0.5, 0.0).unwrap();
        approx(single_likelihood(10, &np), 0.0);
    }

    fn two_cone_lcs() -> LightconeSet {
        // two auxes, each with a private 100-gate chain
        let mut t = String::from("qubits 2\nrole 0 aux\nrole 1 aux\n");
        for i in 0..100 {
            t.push_str(&format!("gate {} a{} 0\n", i, i));
        }
        for i in 100..200 {
            t.push_str(&format!("gate {} b{} 1\n", i, i));
        }
        t.push_str("measure 1 0 after 99 kind final\nmeasure 2 1 after 199 kind final\n");
        lightcone_set(&parse_circuit(&t).unwrap()).unwrap()
    }

    #[test]
    fn all_zero_vector_has_likelihood_one() {
        let lcs = two_cone_lcs();
        let np = NoiseParams::new(1e-3, 0.5, 1e-2).unwrap();
        approx(shot_likelihood(&[0, 0], &lcs, &np).unwrap(), 1.0);
    }

    #[test]
    fn two_ones_multiply() {
        let lcs = two_cone_lcs();
        let np = NoiseParams::new(1e-3, 0.5, 1e-2).unwrap();
        approx(shot_likelihood(&[1, 1], &lcs, &np).unwrap(), 1.0 / 36.0);
    }

    #[test]
    fn q_zero_one_observed_gives_zero() {
        let lcs = two_cone_lcs();
        let np = NoiseParams::new(1e-3, 0.5, 0.0).unwrap();
        approx(shot_likelihood(&[1, 0], &lcs, &np).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let lcs = two_cone_lcs();
        let np = NoiseParams::new(1e-3, 0.5, 1e-2).unwrap();
        assert!(matches!(
            shot_likelihood(&[1], &lcs, &np),
            Err(PostSelectError::LengthMismatch { .. })
        ));
    }

    fn shot(m: Vec<u8>) -> ShotRecord {
        ShotRecord {
            failed_gates: vec![],
            true_premeasure: vec![0; m.len()],
            m,
            corrupted: false,
            detectable: false,
            final_output_flipped: false,
        }
    }

    #[test]
    fn no_validation_accepts_everything() {
        let lcs = two_cone_lcs();
        let np = NoiseParams::new(1e-3, 0.5, 1e-2).unwrap();
        let policy = PostSelectPolicy::new(1.0, Strategy::NoValidation).unwrap();
        let d = decide(&shot(vec![1, 1]), &lcs, &np, &policy).unwrap();
        assert!(d.accepted());
        approx(d.likelihood, 1.0);
    }

    #[test]
    fn threshold_boundaries() {
        let lcs = two_cone_lcs();
        let np = NoiseParams::new(1e-3, 0.5, 1e-2).unwrap();
        let lax = PostSelectPolicy::new(0.0, Strategy::AllResetPoints).unwrap();
        assert!(decide(&shot(vec![1, 1]), &lcs, &np, &lax).unwrap().accepted());
        let strict = PostSelectPolicy::new(1.0, Strategy::AllResetPoints).unwrap();
        assert!(!decide(&shot(vec![1, 0]), &lcs, &np, &strict).unwrap().accepted());
        assert!(decide(&shot(vec![0, 0]), &lcs, &np, &strict).unwrap().accepted());
    }

    #[test]
    fn flipping_a_bit_never_raises_likelihood() {
        let lcs = two_cone_lcs();
        let np = NoiseParams::new(1e-3, 0.5, 1e-2).unwrap();
        for base in [[0u8, 0], [0, 1], [1, 0]] {
            let p0 = shot_likelihood(&base, &lcs, &np).unwrap();
            for i in 0..2 {
                if base[i] == 0 {
                    let mut flipped = base;
                    flipped[i] = 1;
                    let p1 = shot_likelihood(&flipped, &lcs, &np).unwrap();
                    assert!(p1 <= p0);
                }
            }
        }
    }

    #[test]
    fn bad_threshold_rejected() {
        assert!(PostSelectPolicy::new(1.5, Strategy::FinalOnly).is_err());
        assert!(PostSelectPolicy::new(f64::NAN, Strategy::FinalOnly).is_err());
    }
}
