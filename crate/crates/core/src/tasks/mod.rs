//! Multi-task machinery: task vectors, the displacement reward, the
//! center-pointing scheduler and the outer training loop.

mod compose;
mod reward;
mod scheduler;
mod session;

pub use compose::{compose_controller, ComposeOptions, Controller};
pub use reward::{task_reward, EpisodeFrame, SMOOTHNESS_WEIGHT};
pub use scheduler::{center_bearing, select_task, SchedulerMode};
pub use session::{
    training_session, RunRecord, SafetyMode, SessionConfig, SessionState, DEFAULT_HORIZON,
    DEFAULT_REWARD_SCALE,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::approx::ApproxError;
use crate::env::EnvError;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("unknown task set {0:?} (two_task, four_task)")]
    UnknownTaskSet(String),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} controllers, got {got}")]
    ControllerCount { expected: usize, got: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
}

/// Desired motion: planar displacement weights in the episode-start frame
/// plus a yaw-rate weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskVector {
    pub name: String,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl TaskVector {
    pub fn new(name: &str, w1: f64, w2: f64, w3: f64) -> Self {
        Self {
            name: name.to_string(),
            w1,
            w2,
            w3,
        }
    }

    pub fn forward() -> Self {
        Self::new("forward", 1.0, 0.0, 0.0)
    }

    pub fn backward() -> Self {
        Self::new("backward", -1.0, 0.0, 0.0)
    }

    pub fn turn_left() -> Self {
        Self::new("turn-left", 0.0, 0.0, 0.5)
    }

    pub fn turn_right() -> Self {
        Self::new("turn-right", 0.0, 0.0, -0.5)
    }

    pub fn weights(&self) -> [f64; 3] {
        [self.w1, self.w2, self.w3]
    }

    pub fn is_counter_of(&self, other: &TaskVector) -> bool {
        self.w1 == -other.w1 && self.w2 == -other.w2 && self.w3 == -other.w3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSetPreset {
    TwoTask,
    FourTask,
}

impl FromStr for TaskSetPreset {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two_task" | "two-task" => Ok(Self::TwoTask),
            "four_task" | "four-task" => Ok(Self::FourTask),
            other => Err(TaskError::UnknownTaskSet(other.to_string())),
        }
    }
}

impl fmt::Display for TaskSetPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TwoTask => "two_task",
            Self::FourTask => "four_task",
        })
    }
}

/// Ordered task list; the order fixes scheduler tie-breaks and learner indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub tasks: Vec<TaskVector>,
}

impl TaskSet {
    pub fn preset(preset: TaskSetPreset) -> Self {
        let mut tasks = vec![TaskVector::forward(), TaskVector::backward()];
        if preset == TaskSetPreset::FourTask {
            tasks.push(TaskVector::turn_left());
            tasks.push(TaskVector::turn_right());
        }
        Self { tasks }
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize, TaskError> {
        self.tasks
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| TaskError::UnknownTask(name.to_string()))
    }

    pub fn counter_of(&self, index: usize) -> Option<usize> {
        let task = self.tasks.get(index)?;
        self.tasks.iter().position(|t| t.is_counter_of(task))
    }

    pub fn is_closed_under_counter(&self) -> bool {
        (0..self.len()).all(|i| self.counter_of(i).is_some())
    }

    pub fn names(&self) -> Vec<&str> {
        self.tasks.iter().map(|t| t.name.as_str()).collect()
    }
}
