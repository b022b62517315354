//! Synthetic START-triage benchmark toolkit.
//!
//! Generates tag-verified triage cases through pluggable chat backends,
//! certifies them with a three-stage validator, samples replicate datasets,
//! scores models on tag prediction and runs the statistics used to compare
//! synthetic and expert-authored benchmarks.

pub mod corpus;
pub mod gateway;
pub mod evaluation;
pub mod generation;
pub mod review;
pub mod sampling;
pub mod stats;
pub mod schema;
pub mod triage;
pub mod validation;

pub use triage::{classify, minimal_info_satisfied, ClassifyError, SynStartsCase, TriageTag, Vitals};
