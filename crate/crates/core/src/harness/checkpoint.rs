//! Versioned single-file checkpoints.
//!
//! A checkpoint is one JSON object. Its header fields `format`, `version`
//! and `encoding` are checked before anything else is decoded. Every
//! parameter and optimizer array is a base64 string of little-endian
//! IEEE-754 f64 values, row-major.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::sac::{LearnerRecord, LearnerState};
use crate::tasks::{Controller, SessionConfig, SessionState, TaskSet};

pub const CHECKPOINT_FORMAT: &str = "autowalk-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_ENCODING: &str = "base64 f64 little-endian row-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskCheckpoint {
    pub name: String,
    pub learner: LearnerRecord,
}

/// Stream positions at save time, as decimal `u128` strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngCursors {
    pub walker: String,
    pub actions: String,
    pub replay: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Progress {
    pub episodes: u64,
    pub total_steps: u64,
    pub falls: u64,
    pub escapes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub encoding: String,
    pub config: SessionConfig,
    pub tasks: Vec<TaskCheckpoint>,
    pub rng: RngCursors,
    pub progress: Progress,
}

#[derive(Deserialize)]
struct Header {
    format: Option<String>,
    version: Option<u32>,
    encoding: Option<String>,
}

impl Checkpoint {
    pub fn from_session(session: &SessionState) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            encoding: CHECKPOINT_ENCODING.into(),
            config: session.config.clone(),
            tasks: session
                .tasks
                .tasks
                .iter()
                .zip(&session.learners)
                .map(|(t, l)| TaskCheckpoint {
                    name: t.name.clone(),
                    learner: l.to_record(),
                })
                .collect(),
            rng: RngCursors {
                walker: session.walker.rng_word_pos().to_string(),
                actions: session.action_rng_word_pos().to_string(),
                replay: session
                    .buffers
                    .iter()
                    .map(|b| b.rng_word_pos().to_string())
                    .collect(),
            },
            progress: Progress {
                episodes: session.episodes,
                total_steps: session.total_steps,
                falls: session.falls,
                escapes: session.escapes,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let bad = |m: String| HarnessError::Checkpoint(m);
        let header: Header =
            serde_json::from_str(text).map_err(|e| bad(format!("not a checkpoint file: {e}")))?;
        if header.format.as_deref() != Some(CHECKPOINT_FORMAT) {
            return Err(bad(format!(
                "format field is {:?}, expected {CHECKPOINT_FORMAT:?}",
                header.format
            )));
        }
        if header.version != Some(CHECKPOINT_VERSION) {
            return Err(bad(format!(
                "unsupported version {:?}, this build reads version {CHECKPOINT_VERSION}",
                header.version
            )));
        }
        if header.encoding.as_deref() != Some(CHECKPOINT_ENCODING) {
            return Err(bad(format!(
                "unsupported array encoding {:?}",
                header.encoding
            )));
        }
        let ckpt: Self =
            serde_json::from_str(text).map_err(|e| bad(format!("parse error: {e}")))?;
        let expected = ckpt.config.trained_tasks();
        let names: Vec<&str> = ckpt.tasks.iter().map(|t| t.name.as_str()).collect();
        if names != expected.names() {
            return Err(bad(format!(
                "task list {names:?} does not match the configured set {:?}",
                expected.names()
            )));
        }
        // Decode every network once so that corrupt arrays surface here.
        ckpt.learners()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_json()).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Checkpoint(m) => {
                HarnessError::Checkpoint(format!("{}: {m}", path.display()))
            }
            other => other,
        })
    }

    pub fn task_set(&self) -> TaskSet {
        self.config.trained_tasks()
    }

    pub fn learners(&self) -> Result<Vec<LearnerState>, HarnessError> {
        self.tasks
            .iter()
            .map(|t| {
                LearnerState::from_record(&t.learner)
                    .map_err(|e| HarnessError::Checkpoint(format!("task {}: {e}", t.name)))
            })
            .collect()
    }

    pub fn controller(&self) -> Result<Controller, HarnessError> {
        let policies = self.learners()?.into_iter().map(|l| l.actor).collect();
        Ok(Controller::new(
            self.task_set(),
            policies,
            self.config.reward_scale,
        )?)
    }
}
