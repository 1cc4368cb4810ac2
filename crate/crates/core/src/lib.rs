//! Collaboration analytics over patent-like data: exact-set team sequences,
//! inventor-pair sequences, hit-anchored repetition series, switch events,
//! and the rank-sum and regression tests used to compare them.

pub mod analyses;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod output;
pub mod sequences;
pub mod stats;
pub mod synth;
pub mod workspace;
