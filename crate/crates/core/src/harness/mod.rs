//! Experiment configuration, Monte-Carlo sweeps and result files.

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{load_config, ExperimentConfig, DEFAULT_TOML};
pub use output::{read_results, write_results, RESULTS_HEADER};
pub use sweep::{ber_floor, run_experiment, ExperimentResult, FloorResult, ResultRow};
