//! Pipeline orchestration behind the `reasonpath` command.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use config::{Overrides, RunConfig};
pub use error::CliError;
pub use report::MetricsReport;
