//! Scratchpad-memory design-space exploration for capsule-network accelerators.
//!
//! The pipeline is: load a [`workload::WorkloadTrace`], enumerate candidate
//! [`memconfig::MemoryOrganization`]s, price each one with a
//! [`costmodel::CostTable`], keep the Pareto front and write a report bundle.

pub mod calibrate;
pub mod cli;
pub mod costmodel;
pub mod dse;
pub mod error;
pub mod estimate;
pub mod evaluator;
pub mod memconfig;
pub mod report;
pub mod units;
pub mod workload;

pub use error::{Error, Result};

/// Directory holding the shipped workload, anchor and cost-table files.
pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}
