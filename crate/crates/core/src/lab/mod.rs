//! Verification laboratory: statistics, deterministic replica streams,
//! the experiment runner and trajectory export.

pub mod experiment;
pub mod export;
pub mod rng;
pub mod stats;

pub use experiment::{run_experiment, ExperimentConfig, ExperimentKind, LevelStat, Params, Report};
pub use export::{export_trajectory, trajectory_rows, Model};
pub use rng::replica_rng;
