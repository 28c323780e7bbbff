//! Experiment harness: jump-coefficient sweeps over adaptive meshes with
//! iteration tables, spectra and condition numbers written as CSV.

pub mod config;
pub mod experiment;
pub mod table;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, Experiment};
pub use table::{emit_spectrum, emit_table, format_table, parse_table, ResultTable, Row};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("table line {line}: {msg}")]
    Table { line: usize, msg: String },

    #[error(transparent)]
    Core(#[from] jumpmg::Error),
}
