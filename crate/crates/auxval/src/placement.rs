//! Greedy selection of validation measurement locations.
//!
//! Candidates are scored by marginal lightcone coverage, penalized linearly
//! for overlap with already-chosen cones and for a per-candidate latency
//! cost. Marginal coverage is submodular, so greedy selection carries the
//! usual (1 - 1/e) guarantee.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::circuit_ir::{Circuit, GateId, MeasKind, MeasurementPoint, ResetCandidate};
use crate::lightcone::cone_at;

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementConfig {
    /// Maximum number of measurements to place.
    pub budget: usize,
    /// Linear penalty per overlapping cone gate.
    pub overlap_penalty: f64,
    /// Per-candidate latency cost; absent entries cost 0.
    pub latency_cost: BTreeMap<ResetCandidate, f64>,
}

impl PlacementConfig {
    pub fn new(budget: usize, overlap_penalty: f64) -> Self {
        PlacementConfig { budget, overlap_penalty, latency_cost: BTreeMap::new() }
    }

    pub fn validate(&self) -> Result<(), PlacementError> {
        if !(self.overlap_penalty >= 0.0 && self.overlap_penalty.is_finite()) {
            return Err(PlacementError::BadConfig(format!(
                "overlap_penalty = {} must be finite and >= 0",
                self.overlap_penalty
            )));
        }
        for (cand, cost) in &self.latency_cost {
            if !(*cost >= 0.0 && cost.is_finite()) {
                return Err(PlacementError::BadConfig(format!(
                    "latency cost {cost} for {cand:?} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    fn cost_of(&self, cand: &ResetCandidate) -> f64 {
        self.latency_cost.get(cand).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error("invalid placement config: {0}")]
    BadConfig(String),
    #[error("candidate is already chosen")]
    AlreadyChosen,
}

fn candidate_cone(c: &Circuit, cand: &ResetCandidate) -> BTreeSet<GateId> {
    cone_at(c, cand.qubit, cand.after, 0, MeasKind::MidCircuit).gate_ids
}

fn score_against_union(
    cone: &BTreeSet<GateId>,
    union: &BTreeSet<GateId>,
    cost: f64,
    overlap_penalty: f64,
) -> f64 {
    let overlap = cone.intersection(union).count();
    let fresh = cone.len() - overlap;
    fresh as f64 - overlap_penalty * overlap as f64 - cost
}

/// Marginal new-gate coverage minus overlap penalty minus latency cost.
pub fn score_candidate(
    cand: &ResetCandidate,
    chosen: &[ResetCandidate],
    c: &Circuit,
    cfg: &PlacementConfig,
) -> Result<f64, PlacementError> {
    cfg.validate()?;
    if chosen.contains(cand) {
        return Err(PlacementError::AlreadyChosen);
    }
    let mut union = BTreeSet::new();
    for s in chosen {
        union.extend(candidate_cone(c, s));
    }
    Ok(score_against_union(&candidate_cone(c, cand), &union, cfg.cost_of(cand), cfg.overlap_penalty))
}

/// Greedy placement: repeatedly take the best-scoring candidate until the
/// budget is spent or no candidate scores above zero. Ties break toward
/// the earlier position, then the smaller qubit id. Returned points are in
/// circuit order with ids 1..k; a point at the circuit end is Final.
pub fn select_placements(
    c: &Circuit,
    cfg: &PlacementConfig,
) -> Result<Vec<MeasurementPoint>, PlacementError> {
    cfg.validate()?;
    let mut remaining: Vec<(ResetCandidate, BTreeSet<GateId>)> = c
        .candidate_resets
        .iter()
        .map(|cand| (*cand, candidate_cone(c, cand)))
        .collect();
    let mut union: BTreeSet<GateId> = BTreeSet::new();
    let mut chosen: Vec<ResetCandidate> = Vec::new();
    while chosen.len() < cfg.budget && !remaining.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for (idx, (cand, cone)) in remaining.iter().enumerate() {
            let score = score_against_union(cone, &union, cfg.cost_of(cand), cfg.overlap_penalty);
            let better = match best {
                None => true,
                Some((bidx, bscore)) => {
                    let b = &remaining[bidx].0;
                    score > bscore
                        || (score == bscore && (cand.after, cand.qubit) < (b.after, b.qubit))
                }
            };
            if better {
                best = Some((idx, score));
            }
        }
        let (idx, score) = best.unwrap();
        if score <= 0.0 {
            break;
        }
        let (cand, cone) = remaining.remove(idx);
        union.extend(cone);
        chosen.push(cand);
    }
    chosen.sort();
    let end = c.end_position();
    Ok(chosen
        .iter()
        .enumerate()
        .map(|(i, cand)| MeasurementPoint {
            id: i as u32 + 1,
            qubit: cand.qubit,
            after_gate: cand.after,
            kind: if cand.after == end { MeasKind::Final } else { MeasKind::MidCircuit },
        })
        .collect())
}

/// Replace a circuit's measurements with the given points.
pub fn instrument(c: &Circuit, points: Vec<MeasurementPoint>) -> Circuit {
    let mut out = c.clone();
    out.measurements = points;
    out.measurements.sort_by_key(|m| (m.after_gate, m.id));
    out
}

/// Instrument every reset candidate, assigning ids in circuit order.
pub fn instrument_all(c: &Circuit) -> Circuit {
    let end = c.end_position();
    let mut cands = c.candidate_resets.clone();
    cands.sort_by_key(|rc| (rc.after, rc.qubit));
    let points = cands
        .iter()
        .enumerate()
        .map(|(i, cand)| MeasurementPoint {
            id: i as u32 + 1,
            qubit: cand.qubit,
            after_gate: cand.after,
            kind: if cand.after == end { MeasKind::Final } else { MeasKind::MidCircuit },
        })
        .collect();
    instrument(c, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit_ir::parse_circuit;

    // Two auxes with private chains of different lengths plus one shared tail.
    fn sample() -> Circuit {
        let text = "qubits 3\nrole 1 aux\nrole 2 aux\n\
                    gate 0 a 0 1\ngate 1 b 0 1\ngate 2 c 0 1\n\
                    gate 3 d 0 2\ngate 4 e 0 2\n\
                    reset_candidate 1 after 2\nreset_candidate 2 after 4\n";
        parse_circuit(text).unwrap()
    }

    #[test]
    fn first_score_is_cone_size() {
        let c = sample();
        let cfg = PlacementConfig::new(2, 3.0);
        let cand = c.candidate_resets[0];
        assert_eq!(score_candidate(&cand, &[], &c, &cfg).unwrap(), 3.0);
    }

    #[test]
    fn fully_covered_candidate_scores_negative_penalty() {
        let text = "qubits 2\nrole 1 aux\n\
                    gate 0 a 0 1\ngate 1 b 0 1\n\
                    reset_candidate 1 after 0\nreset_candidate 1 after 1\n";
        let c = parse_circuit(text).unwrap();
        let early = ResetCandidate { qubit: 1, after: crate::circuit_ir::Position::AfterGate(0) };
        let late = ResetCandidate { qubit: 1, after: crate::circuit_ir::Position::AfterGate(1) };
        let cfg = PlacementConfig::new(2, 2.5);
        // early cone {0} is fully inside late cone {0,1}
        assert_eq!(score_candidate(&early, &[late], &c, &cfg).unwrap(), -2.5);
    }

    #[test]
    fn zero_budget_selects_nothing() {
        let c = sample();
        assert!(select_placements(&c, &PlacementConfig::new(0, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn disjoint_cones_both_selected() {
        let text = "qubits 4\nrole 1 aux\nrole 3 aux\n\
                    gate 0 a 0 1\ngate 1 b 2 3\n\
                    reset_candidate 1 after 0\nreset_candidate 3 after 1\n";
        let c = parse_circuit(text).unwrap();
        let sel = select_placements(&c, &PlacementConfig::new(2, 1.0)).unwrap();
        assert_eq!(sel.len(), 2);
    }

    #[test]
    fn budget_one_takes_max_coverage() {
        let c = sample();
        let sel = select_placements(&c, &PlacementConfig::new(1, 0.0)).unwrap();
        assert_eq!(sel.len(), 1);
        // aux 1's cone is {0,1,2}; aux 2's cone is {0,1,2,3,4} (shares qubit 0)
        assert_eq!(sel[0].qubit, 2);
    }

    #[test]
    fn latency_cost_can_veto() {
        let c = sample();
        let mut cfg = PlacementConfig::new(2, 0.0);
        for cand in &c.candidate_resets {
            cfg.latency_cost.insert(*cand, 100.0);
        }
        assert!(select_placements(&c, &cfg).unwrap().is_empty());
    }

    #[test]
    fn end_position_points_are_final() {
        let c = sample();
        let sel = select_placements(&c, &PlacementConfig::new(2, 0.0)).unwrap();
        for p in &sel {
            if p.after_gate == c.end_position() {
                assert_eq!(p.kind, MeasKind::Final);
            } else {
                assert_eq!(p.kind, MeasKind::MidCircuit);
            }
        }
        let instrumented = instrument(&c, sel);
        instrumented.validate().unwrap();
    }

    #[test]
    fn invalid_config_rejected() {
        let c = sample();
        assert!(select_placements(&c, &PlacementConfig::new(1, -1.0)).is_err());
    }
}
