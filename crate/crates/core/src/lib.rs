//! Execution-based evaluation of generated quantum solver scripts.
//!
//! The crate bundles classical reference solvers for five problem families
//! (Fermi-Hubbard, transverse-field Ising, MaxCut, Schwinger dynamics and H2
//! full CI), the generate-execute-verify loop that drives a language model
//! against them, and the statistics used to summarize campaigns.

pub mod operator;
pub mod registry;
pub mod solvers;
pub mod prompt;
pub mod gateway;
pub mod sandbox;
pub mod adjudicator;
pub mod episode;
pub mod stats;
pub mod report;
