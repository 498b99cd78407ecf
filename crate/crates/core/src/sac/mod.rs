//! Safety-constrained soft actor-critic for one task.

mod learner;
mod replay;
mod transition;

pub use learner::{
    lambda_step, log_alpha_step, mse_step, ActorReport, Constraint, Diagnostics, LambdaSignal,
    LearnerRecord, LearnerState, NextActions, SacConfig,
};
pub use replay::{Batch, ReplayBuffer, DEFAULT_CAPACITY};
pub use transition::{bellman_target, TerminationKind, Transition};

#[cfg(test)]
mod tests;
