//! Operator surface for gazeforge: dataset generation, calibration, training,
//! evaluation, plots and the end-to-end pipeline.

pub mod acquisition;
pub mod commands;
pub mod config;
pub mod evaluate;
pub mod output;
pub mod pipeline;
pub mod plot;
pub mod split;

use thiserror::Error;

pub use commands::{run, Cli};
pub use config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("stage `{stage}` failed")]
    Stage {
        stage: &'static str,
        #[source]
        source: anyhow::Error,
    },
    /// A measured quantity fell short of a requested threshold.
    #[error("threshold not met: {what} is {value:.4}, required {required:.4}")]
    Threshold {
        what: String,
        value: f64,
        required: f64,
    },
}

/// Exit status for an error: 2 for threshold failures, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<CliError>() {
        Some(CliError::Threshold { .. }) => 2,
        _ => 1,
    }
}
