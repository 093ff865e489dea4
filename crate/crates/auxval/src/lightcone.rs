//! Backward lightcones of validation measurements.
//!
//! The lightcone of a measurement is the set of gates that can causally
//! influence its outcome: backward reachability over the relation
//! "u precedes v and shares an operand", seeded by the measured qubit.
//! Mid-circuit measurements do not prune the cones of later measurements.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::circuit_ir::{Circuit, GateId, MeasKind, MeasurementPoint, Position, QubitId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lightcone {
    pub measurement_id: u32,
    pub qubit: QubitId,
    pub after_gate: Position,
    pub kind: MeasKind,
    pub gate_ids: BTreeSet<GateId>,
}

impl Lightcone {
    pub fn size(&self) -> usize {
        self.gate_ids.len()
    }

    pub fn contains(&self, g: GateId) -> bool {
        self.gate_ids.contains(&g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LightconeSet {
    /// One cone per measurement point, in circuit measurement order.
    pub cones: Vec<Lightcone>,
    /// Symmetric pairwise intersection sizes; diagonal holds the cone sizes.
    pub overlap: Vec<Vec<usize>>,
    pub union_size: usize,
}

impl LightconeSet {
    pub fn k(&self) -> usize {
        self.cones.len()
    }

    /// True when gate `g` lies in at least one cone.
    pub fn covers(&self, g: GateId) -> bool {
        self.cones.iter().any(|c| c.contains(g))
    }

    pub fn union(&self) -> BTreeSet<GateId> {
        let mut u = BTreeSet::new();
        for c in &self.cones {
            u.extend(c.gate_ids.iter().copied());
        }
        u
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LightconeError {
    #[error("measurement {0} does not belong to the circuit")]
    UnknownMeasurement(u32),
    #[error("circuit has no measurements")]
    NoMeasurements,
}

/// Backward sweep from the measurement position: a gate is in the cone iff
/// it touches the measured qubit or shares an operand with a later cone gate.
pub fn backward_lightcone(c: &Circuit, m: &MeasurementPoint) -> Result<Lightcone, LightconeError> {
    if !c.measurements.iter().any(|mm| mm == m) {
        return Err(LightconeError::UnknownMeasurement(m.id));
    }
    Ok(cone_at(c, m.qubit, m.after_gate, m.id, m.kind))
}

pub(crate) fn cone_at(
    c: &Circuit,
    qubit: QubitId,
    after_gate: Position,
    measurement_id: u32,
    kind: MeasKind,
) -> Lightcone {
    let upto = c.gates_up_to(after_gate);
    let mut active: BTreeSet<QubitId> = BTreeSet::new();
    active.insert(qubit);
    let mut gate_ids = BTreeSet::new();
    for g in c.gates[..upto].iter().rev() {
        if g.operands.iter().any(|q| active.contains(q)) {
            gate_ids.insert(g.id);
            active.extend(g.operands.iter().copied());
        }
    }
    Lightcone { measurement_id, qubit, after_gate, kind, gate_ids }
}

pub fn lightcone_set(c: &Circuit) -> Result<LightconeSet, LightconeError> {
    if c.measurements.is_empty() {
        return Err(LightconeError::NoMeasurements);
    }
    let cones: Vec<Lightcone> = c
        .measurements
        .iter()
        .map(|m| cone_at(c, m.qubit, m.after_gate, m.id, m.kind))
        .collect();
    let k = cones.len();
    let mut overlap = vec![vec![0usize; k]; k];
    for i in 0..k {
        overlap[i][i] = cones[i].size();
        for j in i + 1..k {
            let n = cones[i].gate_ids.intersection(&cones[j].gate_ids).count();
            overlap[i][j] = n;
            overlap[j][i] = n;
        }
    }
    let union_size = {
        let mut u = BTreeSet::new();
        for c in &cones {
            u.extend(c.gate_ids.iter().copied());
        }
        u.len()
    };
    Ok(LightconeSet { cones, overlap, union_size })
}
