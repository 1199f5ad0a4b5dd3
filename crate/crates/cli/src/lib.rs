//! Experiment configs and the `simulate`, `converge`, `verify` and `oracle`
//! commands behind the `tauleap` binary.

pub mod commands;
pub mod config;

pub use commands::{run, Command, Failure, Outcome, EXIT_CONFIG, EXIT_GUARDED, EXIT_OK};
pub use config::{parse_config, ConfigError, ExperimentConfig, Overrides};
