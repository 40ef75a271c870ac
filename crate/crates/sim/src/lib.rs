//! Config-driven runner around `cqi-core`: one JSON config in, one CSV or
//! JSON artifact out.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{ExperimentConfig, Format, Kind};
pub use error::SimError;
pub use run::{execute, run, run_file};
