//! File formats and artifact plumbing: CSV ingestion, IRF tables, chain
//! serialization, synthetic data generation, configuration files, and run
//! manifests.

pub mod chain_store;
pub mod config_file;
pub mod csv_data;
pub mod manifest;
pub mod synth;
