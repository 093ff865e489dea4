//! Synthetic multi-block compute/uncompute circuit generator.
//!
//! Each block is a forward half of random gates, every gate touching at
//! least one auxiliary and one data qubit of the block, followed by its
//! mirrored inverse half. Auxiliaries used in a block get a reset candidate
//! at block end; every auxiliary gets a candidate at circuit end. All
//! candidates are instrumented as measurements by default; strategies
//! restrict which ones a filter actually looks at.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit_ir::{Circuit, Gate, Position, Qubit, QubitId, QubitRole, ResetCandidate};
use crate::placement::instrument_all;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxReuse {
    ReuseAcrossBlocks,
    FreshPerBlock,
}

impl std::str::FromStr for AuxReuse {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "across" => Ok(AuxReuse::ReuseAcrossBlocks),
            "fresh" => Ok(AuxReuse::FreshPerBlock),
            other => Err(format!("unknown reuse mode `{other}` (expected across|fresh)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_blocks: usize,
    pub data_qubits: usize,
    pub aux_qubits: usize,
    pub gates_per_block_half: usize,
    pub aux_reuse: AuxReuse,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_blocks: 4,
            data_qubits: 6,
            aux_qubits: 3,
            gates_per_block_half: 20,
            aux_reuse: AuxReuse::ReuseAcrossBlocks,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    BadConfig(String),
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.n_blocks == 0 || self.data_qubits == 0 || self.aux_qubits == 0
            || self.gates_per_block_half == 0
        {
            return Err(GenError::BadConfig("all counts must be positive".into()));
        }
        if self.aux_reuse == AuxReuse::FreshPerBlock && self.aux_qubits < self.n_blocks {
            return Err(GenError::BadConfig(format!(
                "fresh-per-block needs at least one auxiliary per block ({} blocks, {} aux)",
                self.n_blocks, self.aux_qubits
            )));
        }
        Ok(())
    }
}

pub fn generate(cfg: &GeneratorConfig) -> Result<Circuit, GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.data_qubits;
    let a = cfg.aux_qubits;
    let data_ids: Vec<QubitId> = (0..d as u32).collect();
    let aux_ids: Vec<QubitId> = (d as u32..(d + a) as u32).collect();

    let mut qubits: Vec<Qubit> = data_ids.iter().map(|&id| Qubit { id, role: QubitRole::Data }).collect();
    qubits.extend(aux_ids.iter().map(|&id| Qubit { id, role: QubitRole::Auxiliary }));

    let per_block_aux = match cfg.aux_reuse {
        AuxReuse::ReuseAcrossBlocks => a,
        AuxReuse::FreshPerBlock => a / cfg.n_blocks,
    };

    let mut gates: Vec<Gate> = Vec::new();
    let mut candidates: BTreeSet<ResetCandidate> = BTreeSet::new();
    let mut next_id: u32 = 0;

    for b in 0..cfg.n_blocks {
        let block_aux: Vec<QubitId> = match cfg.aux_reuse {
            AuxReuse::ReuseAcrossBlocks => aux_ids.clone(),
            AuxReuse::FreshPerBlock => {
                aux_ids[b * per_block_aux..(b + 1) * per_block_aux].to_vec()
            }
        };
        let n_block_data = rng.random_range(1..=d);
        let block_data: Vec<QubitId> =
            data_ids.choose_multiple(&mut rng, n_block_data).copied().collect();

        let mut forward: Vec<Gate> = Vec::new();
        for i in 0..cfg.gates_per_block_half {
            let aux = *block_aux.choose(&mut rng).unwrap();
            let n_data = rng.random_range(1..=2.min(block_data.len()));
            let mut operands: Vec<QubitId> =
                block_data.choose_multiple(&mut rng, n_data).copied().collect();
            operands.push(aux);
            forward.push(Gate {
                id: 0, // assigned below
                label: format!("g{b}_{i}"),
                operands,
                block_id: Some(b as u32),
            });
        }
        let mut block_gates = forward.clone();
        for g in forward.iter().rev() {
            let mut inv = g.clone();
            inv.label = format!("{}_inv", g.label);
            block_gates.push(inv);
        }
        let mut touched_aux: BTreeSet<QubitId> = BTreeSet::new();
        for mut g in block_gates {
            g.id = next_id;
            next_id += 1;
            for &q in &g.operands {
                if q >= d as u32 {
                    touched_aux.insert(q);
                }
            }
            gates.push(g);
        }
        let block_end = Position::AfterGate(next_id - 1);
        for q in touched_aux {
            candidates.insert(ResetCandidate { qubit: q, after: block_end });
        }
    }

    let end = Position::AfterGate(next_id - 1);
    for &q in &aux_ids {
        candidates.insert(ResetCandidate { qubit: q, after: end });
    }

    let circuit = Circuit {
        qubits,
        gates,
        measurements: Vec::new(),
        candidate_resets: candidates.into_iter().collect(),
    };
    let circuit = instrument_all(&circuit);
    debug_assert!(circuit.validate().is_ok());
    Ok(circuit)
}
