use std::collections::VecDeque;

use super::{WalkerState, ACTION_DIM, FRAME_DIM, HISTORY_LEN, OBS_DIM};

/// One proprioceptive frame: `[roll, pitch, sin z, cos z, last action (4)]`.
pub type Frame = [f64; FRAME_DIM];

pub fn frame_of(state: &WalkerState) -> Frame {
    let mut f = [0.0; FRAME_DIM];
    f[0] = state.roll;
    f[1] = state.pitch;
    f[2] = state.phase.sin();
    f[3] = state.phase.cos();
    f[4..4 + ACTION_DIM].copy_from_slice(&state.prev_actions[0]);
    f
}

/// Rolling window of the last six frames, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    frames: VecDeque<Frame>,
}

impl History {
    /// A fresh episode: the initial frame repeated to fill the window.
    pub fn new(initial: &WalkerState) -> Self {
        let f = frame_of(initial);
        Self {
            frames: std::iter::repeat_n(f, HISTORY_LEN).collect(),
        }
    }

    pub fn push(&mut self, state: &WalkerState) {
        self.frames.pop_front();
        self.frames.push_back(frame_of(state));
    }

    pub fn frames(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter()
    }
}

pub fn observe(history: &History) -> Vec<f64> {
    let mut obs = Vec::with_capacity(OBS_DIM);
    for f in history.frames() {
        obs.extend_from_slice(f);
    }
    obs
}
