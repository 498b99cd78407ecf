use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    observe, reset, step, Dynamics, EnvError, History, ResetMode, StepOutcome, Terrain,
    WalkerState, Workspace,
};

/// A walker on one terrain inside one workspace, with its own noise stream.
#[derive(Debug, Clone)]
pub struct Walker {
    pub terrain: Terrain,
    pub workspace: Workspace,
    pub dynamics: Dynamics,
    state: WalkerState,
    history: History,
    rng: ChaCha8Rng,
}

impl Walker {
    pub fn new(terrain: Terrain, workspace: Workspace, dynamics: Dynamics, seed: u64) -> Self {
        let state = WalkerState::default();
        Self {
            terrain,
            workspace,
            dynamics,
            history: History::new(&state),
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn state(&self) -> &WalkerState {
        &self.state
    }

    /// Overrides the simulator state and restarts the observation window from it.
    pub fn set_state(&mut self, state: WalkerState) {
        self.history = History::new(&state);
        self.state = state;
    }

    pub fn observation(&self) -> Vec<f64> {
        observe(&self.history)
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError> {
        let out = step(
            &self.state,
            action,
            &self.terrain,
            &self.workspace,
            &self.dynamics,
            &mut self.rng,
        )?;
        self.state = out.state.clone();
        self.history.push(&self.state);
        Ok(out)
    }

    /// Starts a new episode; returns the simulated seconds the reset costs.
    pub fn reset(&mut self, mode: ResetMode) -> f64 {
        let (state, cost) = reset(&self.state, mode, &mut self.rng);
        self.set_state(state);
        cost
    }

    pub fn rng_word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn set_rng_word_pos(&mut self, pos: u128) {
        self.rng.set_word_pos(pos);
    }
}
