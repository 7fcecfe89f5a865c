//! Experiment ingestion, execution orchestration, persistence, and
//! reporting for the chasing-controller benchmarks.

pub mod config;
pub mod csvio;
pub mod experiment;
pub mod lemma;
pub mod plot;
