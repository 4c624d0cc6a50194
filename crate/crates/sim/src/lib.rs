//! Configuration, experiment orchestration and file output for the
//! `gfra-core` receivers.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{Algorithm, ExperimentConfig, Mode, Preset};
pub use experiment::{run_experiment, ExperimentOutput, MetricsRecord, RunOptions};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] gfra_core::Error),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
