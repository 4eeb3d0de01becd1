//! Data ingestion, configuration and the `simulate`, `estimate` and `mc`
//! commands behind the `hurst` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod mc;
pub mod report;

pub use commands::run_estimate;
pub use error::{CliError, Result};
pub use ingest::ingest_csv;
pub use mc::{run_mc_study, McStudy};
pub use report::{to_json, RunReport};
