//! Seeded planar-walker simulator.
//!
//! The walker has a planar pose, a torso tilt (roll, pitch) that decides
//! falls, and a gait phase oscillator. Three surfaces change how stride
//! turns into motion and how noisy the torso is; the doormat additionally
//! catches feet until the command is shaken hard enough.

mod dynamics;
mod observe;
mod terrain;
mod trace;
mod walker;

pub use dynamics::{
    boundary_check, butterworth, filter_coefficient, reset, safety_margin, step, validate_action,
    wrap_angle, Action, BoundaryStatus, Dynamics, Pose, ResetMode, StepEvents, StepOutcome,
    WalkerState, NEAR_BOUNDARY, PITCH_LIMIT, RESET_COST_SECONDS, RESET_TILT_JITTER, ROLL_LIMIT,
};
pub use observe::{frame_of, observe, Frame, History};
pub use terrain::{Terrain, TerrainKind, Workspace};
pub use trace::{read_trace, write_trace, TraceRecord};
pub use walker::Walker;

use thiserror::Error;

/// Control period, seconds (50 Hz).
pub const DT: f64 = 0.02;
pub const ACTION_DIM: usize = 4;
pub const HISTORY_LEN: usize = 6;
pub const FRAME_DIM: usize = 8;
pub const OBS_DIM: usize = HISTORY_LEN * FRAME_DIM;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("action component {index} = {value} outside [-1, 1]")]
    ActionOutOfRange { index: usize, value: f64 },
    #[error("action has {0} components, expected 4")]
    ActionDimension(usize),
    #[error("cannot step a fallen walker; reset first")]
    Fallen,
    #[error("unknown terrain {0:?} (flat, mattress, doormat)")]
    UnknownTerrain(String),
    #[error("invalid workspace {0:?}; expected <width>x<height> in meters")]
    InvalidWorkspace(String),
}
