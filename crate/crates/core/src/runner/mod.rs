//! Experiment orchestration: configuration, the per-shot streaming loop,
//! the convergence rule and trace export.

mod config;
mod experiment;
mod export;
mod stopping;
pub mod verify;

pub use config::{ExperimentConfig, StateSpec, StoppingConfig};
pub use experiment::{
    run_experiment, run_seed, run_single, ExperimentOutput, MomentTrace, RunSummary, TracePoint,
};
pub use export::{
    csv_header, csv_rows, read_csv, read_json, write_csv, write_json, write_outputs, CsvRow,
};
pub use stopping::{stopping_rule_step, successive_close, StoppingRule};

/// Name and version written into every JSON output.
pub const SOFTWARE: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
