//! Quantum typicality rules: mutual typicality measures, trajectory graphs,
//! worked scenarios, statistical typicality bounds, stochastic twins and a
//! free-particle wave-packet model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod graph;
mod num;
pub mod random;
pub mod scenario_file;
pub mod scenarios;
pub mod stat;
pub mod structure;
pub mod twin;
pub mod typicality;
pub mod wavepacket;

pub use error::{Error, Result};
pub use structure::{QuantumStructure, SSet, Step};
pub use typicality::{exclusion_measure, mutual_typicality, TypicalityReport, Verdict};
