//! Circuit representation and its line-oriented text format.
//!
//! A circuit is a strict total order of gates over a fixed set of qubits.
//! Gate labels are opaque strings; no unitary semantics are attached. The
//! only structure the rest of the toolkit consumes is operand sharing
//! (for lightcones) and the auxiliary reset points.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type QubitId = u32;
pub type GateId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitRole {
    Data,
    Auxiliary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qubit {
    pub id: QubitId,
    pub role: QubitRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub id: GateId,
    pub label: String,
    pub operands: Vec<QubitId>,
    pub block_id: Option<u32>,
}

/// Circuit position a measurement or reset candidate is anchored to:
/// either before all gates or immediately after a given gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Position {
    Start,
    AfterGate(GateId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasKind {
    MidCircuit,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementPoint {
    pub id: u32,
    pub qubit: QubitId,
    pub after_gate: Position,
    pub kind: MeasKind,
}

/// A position where an auxiliary qubit is structurally expected to be |0>,
/// whether or not a validation measurement is actually placed there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResetCandidate {
    pub qubit: QubitId,
    pub after: Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub qubits: Vec<Qubit>,
    pub gates: Vec<Gate>,
    pub measurements: Vec<MeasurementPoint>,
    pub candidate_resets: Vec<ResetCandidate>,
}

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: semantic error: {msg}")]
    Semantic { line: usize, msg: String },
    #[error("invalid circuit: {0}")]
    Invalid(String),
    #[error("gate {0} is missing a block id")]
    MissingBlockId(GateId),
}

impl Circuit {
    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn role_of(&self, q: QubitId) -> Option<QubitRole> {
        self.qubits.get(q as usize).map(|qu| qu.role)
    }

    /// Position anchor of the last gate, or Start for an empty circuit.
    pub fn end_position(&self) -> Position {
        match self.gates.last() {
            Some(g) => Position::AfterGate(g.id),
            None => Position::Start,
        }
    }

    /// Number of gates at or before `pos` in program order.
    pub fn gates_up_to(&self, pos: Position) -> usize {
        match pos {
            Position::Start => 0,
            Position::AfterGate(id) => self.gates.partition_point(|g| g.id <= id),
        }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        for (i, q) in self.qubits.iter().enumerate() {
            if q.id as usize != i {
                return Err(CircuitError::Invalid(format!(
                    "qubit ids must be contiguous from 0, found {} at index {}",
                    q.id, i
                )));
            }
        }
        let n = self.qubits.len() as u32;
        let mut prev: Option<GateId> = None;
        for g in &self.gates {
            if let Some(p) = prev {
                if g.id <= p {
                    return Err(CircuitError::Invalid(format!(
                        "gate ids not strictly increasing at gate {}",
                        g.id
                    )));
                }
            }
            prev = Some(g.id);
            if g.operands.is_empty() {
                return Err(CircuitError::Invalid(format!("gate {} has no operands", g.id)));
            }
            let mut seen = BTreeSet::new();
            for &q in &g.operands {
                if q >= n {
                    return Err(CircuitError::Invalid(format!(
                        "gate {} references unknown qubit {}",
                        g.id, q
                    )));
                }
                if !seen.insert(q) {
                    return Err(CircuitError::Invalid(format!(
                        "gate {} has duplicate operand {}",
                        g.id, q
                    )));
                }
            }
        }
        let gate_ids: BTreeSet<GateId> = self.gates.iter().map(|g| g.id).collect();
        let check_pos = |pos: Position, what: &str| -> Result<(), CircuitError> {
            if let Position::AfterGate(id) = pos {
                if !gate_ids.contains(&id) {
                    return Err(CircuitError::Invalid(format!(
                        "{what} anchored after unknown gate {id}"
                    )));
                }
            }
            Ok(())
        };
        for rc in &self.candidate_resets {
            if rc.qubit >= n {
                return Err(CircuitError::Invalid(format!(
                    "reset candidate on unknown qubit {}",
                    rc.qubit
                )));
            }
            if self.role_of(rc.qubit) != Some(QubitRole::Auxiliary) {
                return Err(CircuitError::Invalid(format!(
                    "reset candidate on non-auxiliary qubit {}",
                    rc.qubit
                )));
            }
            check_pos(rc.after, "reset candidate")?;
        }
        let candidates: BTreeSet<ResetCandidate> = self.candidate_resets.iter().copied().collect();
        let mut seen_meas = BTreeSet::new();
        let mut prev_key: Option<(Position, u32)> = None;
        for m in &self.measurements {
            if m.qubit >= n || self.role_of(m.qubit) != Some(QubitRole::Auxiliary) {
                return Err(CircuitError::Invalid(format!(
                    "measurement {} on non-auxiliary qubit {}",
                    m.id, m.qubit
                )));
            }
            check_pos(m.after_gate, "measurement")?;
            if !seen_meas.insert((m.qubit, m.after_gate)) {
                return Err(CircuitError::Invalid(format!(
                    "duplicate measurement at qubit {} / {:?}",
                    m.qubit, m.after_gate
                )));
            }
            let key = (m.after_gate, m.id);
            if let Some(p) = prev_key {
                if key < p {
                    return Err(CircuitError::Invalid(
                        "measurements not ordered by position".into(),
                    ));
                }
            }
            prev_key = Some(key);
            if m.kind == MeasKind::MidCircuit
                && !candidates.contains(&ResetCandidate { qubit: m.qubit, after: m.after_gate })
            {
                return Err(CircuitError::Invalid(format!(
                    "mid-circuit measurement {} is not at a reset candidate",
                    m.id
                )));
            }
        }
        Ok(())
    }
}

fn parse_position(tok: &str, line: usize) -> Result<Position, CircuitError> {
    if tok == "start" {
        Ok(Position::Start)
    } else {
        tok.parse::<GateId>()
            .map(Position::AfterGate)
            .map_err(|_| CircuitError::Syntax { line, msg: format!("bad position `{tok}`") })
    }
}

fn position_str(pos: Position) -> String {
    match pos {
        Position::Start => "start".into(),
        Position::AfterGate(id) => id.to_string(),
    }
}

/// Parse the line-oriented circuit format. See the crate README for the grammar.
pub fn parse_circuit(text: &str) -> Result<Circuit, CircuitError> {
    let mut qubits: Vec<Qubit> = Vec::new();
    let mut gates: Vec<Gate> = Vec::new();
    let mut measurements: Vec<MeasurementPoint> = Vec::new();
    let mut candidates: Vec<ResetCandidate> = Vec::new();
    let mut saw_qubits = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let syntax = |msg: String| CircuitError::Syntax { line, msg };
        let semantic = |msg: String| CircuitError::Semantic { line, msg };
        match toks[0] {
            "qubits" => {
                if toks.len() != 2 {
                    return Err(syntax("expected `qubits <n>`".into()));
                }
                if saw_qubits {
                    return Err(semantic("duplicate qubits declaration".into()));
                }
                let n: u32 = toks[1]
                    .parse()
                    .map_err(|_| syntax(format!("bad qubit count `{}`", toks[1])))?;
                qubits = (0..n).map(|id| Qubit { id, role: QubitRole::Data }).collect();
                saw_qubits = true;
            }
            "role" => {
                if toks.len() != 3 {
                    return Err(syntax("expected `role <qubit_id> data|aux`".into()));
                }
                let id: u32 =
                    toks[1].parse().map_err(|_| syntax(format!("bad qubit id `{}`", toks[1])))?;
                let role = match toks[2] {
                    "data" => QubitRole::Data,
                    "aux" => QubitRole::Auxiliary,
                    other => return Err(syntax(format!("unknown role `{other}`"))),
                };
                let q = qubits
                    .get_mut(id as usize)
                    .ok_or_else(|| semantic(format!("unknown qubit id {id}")))?;
                q.role = role;
            }
            "gate" => {
                if toks.len() < 4 {
                    return Err(syntax("expected `gate <id> <label> <q0> [...]`".into()));
                }
                let id: GateId =
                    toks[1].parse().map_err(|_| syntax(format!("bad gate id `{}`", toks[1])))?;
                if let Some(last) = gates.last() {
                    if id <= last.id {
                        return Err(semantic(format!(
                            "gate id {id} not greater than previous gate {}",
                            last.id
                        )));
                    }
                }
                let label = toks[2].to_string();
                let mut operands = Vec::new();
                let mut block_id = None;
                for tok in &toks[3..] {
                    if let Some(b) = tok.strip_prefix("block=") {
                        block_id = Some(
                            b.parse::<u32>()
                                .map_err(|_| syntax(format!("bad block id `{b}`")))?,
                        );
                    } else {
                        let q: QubitId =
                            tok.parse().map_err(|_| syntax(format!("bad operand `{tok}`")))?;
                        if q as usize >= qubits.len() {
                            return Err(semantic(format!("unknown qubit id {q}")));
                        }
                        if operands.contains(&q) {
                            return Err(semantic(format!("duplicate operand {q}")));
                        }
                        operands.push(q);
                    }
                }
                if operands.is_empty() {
                    return Err(semantic("gate with no operands".into()));
                }
                gates.push(Gate { id, label, operands, block_id });
            }
            "reset_candidate" => {
                if toks.len() != 4 || toks[2] != "after" {
                    return Err(syntax("expected `reset_candidate <qubit_id> after <gate_id>`".into()));
                }
                let q: QubitId =
                    toks[1].parse().map_err(|_| syntax(format!("bad qubit id `{}`", toks[1])))?;
                if q as usize >= qubits.len() {
                    return Err(semantic(format!("unknown qubit id {q}")));
                }
                if qubits[q as usize].role != QubitRole::Auxiliary {
                    return Err(semantic(format!("reset candidate on data qubit {q}")));
                }
                let after = parse_position(toks[3], line)?;
                candidates.push(ResetCandidate { qubit: q, after });
            }
            "measure" => {
                if toks.len() != 7 || toks[3] != "after" || toks[5] != "kind" {
                    return Err(syntax(
                        "expected `measure <id> <qubit_id> after <gate_id>|start kind mid|final`"
                            .into(),
                    ));
                }
                let id: u32 =
                    toks[1].parse().map_err(|_| syntax(format!("bad measurement id `{}`", toks[1])))?;
                let q: QubitId =
                    toks[2].parse().map_err(|_| syntax(format!("bad qubit id `{}`", toks[2])))?;
                if q as usize >= qubits.len() {
                    return Err(semantic(format!("unknown qubit id {q}")));
                }
                if qubits[q as usize].role != QubitRole::Auxiliary {
                    return Err(semantic(format!("validation measurement on data qubit {q}")));
                }
                let after_gate = parse_position(toks[4], line)?;
                let kind = match toks[6] {
                    "mid" => MeasKind::MidCircuit,
                    "final" => MeasKind::Final,
                    other => return Err(syntax(format!("unknown measurement kind `{other}`"))),
                };
                measurements.push(MeasurementPoint { id, qubit: q, after_gate, kind });
            }
            other => return Err(CircuitError::Syntax { line, msg: format!("unknown directive `{other}`") }),
        }
    }

    candidates.sort();
    candidates.dedup();
    measurements.sort_by_key(|m| (m.after_gate, m.id));
    let c = Circuit { qubits, gates, measurements, candidate_resets: candidates };
    c.validate()?;
    Ok(c)
}

/// Serialize to the same text format; output reparses to an equal circuit.
pub fn serialize_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qubits {}", c.qubits.len());
    for q in &c.qubits {
        if q.role == QubitRole::Auxiliary {
            let _ = writeln!(out, "role {} aux", q.id);
        }
    }
    for g in &c.gates {
        let _ = write!(out, "gate {} {}", g.id, g.label);
        for q in &g.operands {
            let _ = write!(out, " {q}");
        }
        if let Some(b) = g.block_id {
            let _ = write!(out, " block={b}");
        }
        out.push('\n');
    }
    let mut candidates = c.candidate_resets.clone();
    candidates.sort();
    for rc in &candidates {
        let _ = writeln!(out, "reset_candidate {} after {}", rc.qubit, position_str(rc.after));
    }
    for m in &c.measurements {
        let kind = match m.kind {
            MeasKind::MidCircuit => "mid",
            MeasKind::Final => "final",
        };
        let _ = writeln!(
            out,
            "measure {} {} after {} kind {}",
            m.id,
            m.qubit,
            position_str(m.after_gate),
            kind
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum BlockVerdict {
    Pass,
    Fail(String),
}

/// Structural uncomputation check: each block must read as a forward half
/// followed by its label-wise mirror (same operands, `_inv`-marked labels),
/// and every auxiliary touched in the block must have a reset candidate at
/// the block's last gate.
pub fn check_uncomputation_structure(
    c: &Circuit,
) -> Result<Vec<(u32, BlockVerdict)>, CircuitError> {
    let mut blocks: BTreeMap<u32, Vec<&Gate>> = BTreeMap::new();
    for g in &c.gates {
        let b = g.block_id.ok_or(CircuitError::MissingBlockId(g.id))?;
        blocks.entry(b).or_default().push(g);
    }
    let candidates: BTreeSet<ResetCandidate> = c.candidate_resets.iter().copied().collect();
    let mut out = Vec::new();
    for (block, gates) in blocks {
        out.push((block, block_verdict(c, &gates, &candidates)));
    }
    Ok(out)
}

fn labels_mirror(a: &str, b: &str) -> bool {
    b.strip_suffix("_inv") == Some(a) || a.strip_suffix("_inv") == Some(b)
}

fn block_verdict(
    c: &Circuit,
    gates: &[&Gate],
    candidates: &BTreeSet<ResetCandidate>,
) -> BlockVerdict {
    let n = gates.len();
    if n % 2 != 0 {
        return BlockVerdict::Fail("odd gate count".into());
    }
    for i in 0..n / 2 {
        let fwd = gates[i];
        let rev = gates[n - 1 - i];
        if !labels_mirror(&fwd.label, &rev.label) {
            return BlockVerdict::Fail(format!(
                "gate {} label `{}` is not the inverse of gate {} label `{}`",
                rev.id, rev.label, fwd.id, fwd.label
            ));
        }
        if fwd.operands != rev.operands {
            return BlockVerdict::Fail(format!(
                "gates {} and {} act on different operands",
                fwd.id, rev.id
            ));
        }
    }
    let block_end = gates.last().map(|g| Position::AfterGate(g.id)).unwrap_or(Position::Start);
    for g in gates {
        for &q in &g.operands {
            if c.role_of(q) == Some(QubitRole::Auxiliary)
                && !candidates.contains(&ResetCandidate { qubit: q, after: block_end })
            {
                return BlockVerdict::Fail(format!(
                    "auxiliary {q} has no reset candidate at block end"
                ));
            }
        }
    }
    BlockVerdict::Pass
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        "qubits 2\nrole 1 aux\ngate 0 cx 0 1\nreset_candidate 1 after 0\nmeasure 1 1 after 0 kind final\n"
    }

    #[test]
    fn parses_minimal_circuit() {
        let c = parse_circuit(minimal()).unwrap();
        assert_eq!(c.gates.len(), 1);
        assert_eq!(c.measurements.len(), 1);
        assert_eq!(c.measurements[0].kind, MeasKind::Final);
    }

    #[test]
    fn rejects_measurement_on_data_qubit() {
        let text = "qubits 2\ngate 0 cx 0 1\nmeasure 1 0 after 0 kind final\n";
        let err = parse_circuit(text).unwrap_err();
        assert!(matches!(err, CircuitError::Semantic { .. }), "{err}");
    }

    #[test]
    fn rejects_non_monotone_gate_ids() {
        let text = "qubits 1\ngate 5 a 0\ngate 3 b 0\n";
        assert!(matches!(parse_circuit(text).unwrap_err(), CircuitError::Semantic { .. }));
    }

    #[test]
    fn rejects_unknown_qubit() {
        let text = "qubits 1\ngate 0 a 7\n";
        assert!(matches!(parse_circuit(text).unwrap_err(), CircuitError::Semantic { .. }));
    }

    #[test]
    fn serialize_of_empty_circuit_is_minimal() {
        let c = Circuit {
            qubits: vec![Qubit { id: 0, role: QubitRole::Data }],
            gates: vec![],
            measurements: vec![],
            candidate_resets: vec![],
        };
        assert_eq!(serialize_circuit(&c), "qubits 1\n");
    }

    #[test]
    fn serialize_is_deterministic_and_round_trips() {
        let c = parse_circuit(minimal()).unwrap();
        let s1 = serialize_circuit(&c);
        let s2 = serialize_circuit(&c);
        assert_eq!(s1, s2);
        assert_eq!(parse_circuit(&s1).unwrap(), c);
    }

    #[test]
    fn uncomputation_palindrome_passes() {
        let text = "qubits 2\nrole 1 aux\n\
                    gate 0 a 0 1 block=0\ngate 1 b 0 1 block=0\n\
                    gate 2 b_inv 0 1 block=0\ngate 3 a_inv 0 1 block=0\n\
                    reset_candidate 1 after 3\n";
        let c = parse_circuit(text).unwrap();
        let verdicts = check_uncomputation_structure(&c).unwrap();
        assert_eq!(verdicts, vec![(0, BlockVerdict::Pass)]);
    }

    #[test]
    fn uncomputation_length_mismatch_fails() {
        let text = "qubits 2\nrole 1 aux\n\
                    gate 0 a 0 1 block=0\ngate 1 b 0 1 block=0\ngate 2 a_inv 0 1 block=0\n\
                    reset_candidate 1 after 2\n";
        let c = parse_circuit(text).unwrap();
        let verdicts = check_uncomputation_structure(&c).unwrap();
        assert!(matches!(verdicts[0].1, BlockVerdict::Fail(_)));
    }

    #[test]
    fn uncomputation_requires_block_ids() {
        let text = "qubits 1\ngate 0 a 0\n";
        let c = parse_circuit(text).unwrap();
        assert_eq!(
            check_uncomputation_structure(&c).unwrap_err(),
            CircuitError::MissingBlockId(0)
        );
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "# header\n\nqubits 1\n# trailing\n";
        let c = parse_circuit(text).unwrap();
        assert_eq!(c.n_qubits(), 1);
    }
}
