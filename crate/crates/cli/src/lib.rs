//! Configuration, experiment orchestration and file output for `dmra-core`.

pub mod config;
pub mod experiment;
pub mod output;
pub mod plot;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_ensemble, run_experiment, ExperimentError, ExperimentOutput, Mode};
