//! Gate-level circuit analysis and Monte Carlo simulation toolkit for
//! auxiliary-qubit validation with likelihood-based post-selection.
//!
//! The pipeline: generate or parse a circuit with compute/uncompute block
//! structure ([`circuit_gen`], [`circuit_ir`]), compute the backward
//! lightcone of each validation measurement ([`lightcone`]), sample shots
//! under a three-parameter stochastic noise model ([`noise_sim`]), filter
//! them with a likelihood threshold ([`postselect`]), and aggregate
//! retained-fraction / bias / variance and FP/FN figures ([`estimator`]).
//! [`placement`] chooses which reset points to instrument, [`early_abort`]
//! quantifies runtime saved by aborting doomed shots, and [`experiments`]
//! drives the whole study from a single config.

pub mod circuit_gen;
pub mod circuit_ir;
pub mod early_abort;
pub mod estimator;
pub mod experiments;
pub mod lightcone;
pub mod noise_sim;
pub mod placement;
pub mod postselect;
