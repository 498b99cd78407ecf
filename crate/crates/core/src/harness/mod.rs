//! Configuration, persistence, evaluation, ablations, the teleop server and
//! the command line.

mod ablation;
mod checkpoint;
pub mod cli;
mod config;
mod evaluate;
mod records;
pub mod teleop;

pub use ablation::{
    final_return, parallel_map, run_ablation_oob, run_ablation_safety, run_sessions,
    write_ablation, Band, OobAblation, OobRow, SafetyAblation, SafetyRow, OOB_MODES, SAFETY_MODES,
};
pub use checkpoint::{
    Checkpoint, Progress, RngCursors, TaskCheckpoint, CHECKPOINT_ENCODING, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
pub use config::{ExperimentConfig, ExperimentSection};
pub use evaluate::{
    evaluate_commands, evaluate_controller, evaluate_policy, EvalOptions, TaskStats,
};
pub use records::{read_curves, write_curves, write_curves_file, write_table, CURVE_COLUMNS};
pub use teleop::{serve_teleop, TeleopOptions, TeleopServer};

use std::path::Path;

use thiserror::Error;

use crate::tasks::TaskError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        HarnessError::Io(format!("{}: {e}", path.display()))
    }
}
