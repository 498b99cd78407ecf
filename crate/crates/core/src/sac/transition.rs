use serde::{Deserialize, Serialize};

use crate::env::ACTION_DIM;

/// Why a transition is the last of its episode, if it is.
///
/// Only a fall is a true terminal. Boundary and horizon cut-offs leave the
/// walker in a perfectly viable state, so their targets still bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationKind {
    Running,
    FallTerminal,
    BoundaryTimeout,
    EpisodeTimeout,
}

impl TerminationKind {
    pub fn bootstraps(self) -> bool {
        !matches!(self, TerminationKind::FallTerminal)
    }

    pub fn ends_episode(self) -> bool {
        !matches!(self, TerminationKind::Running)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// Safety margin of the post-step state.
    pub safety: f64,
    pub kind: TerminationKind,
}

/// One-step backup shared by the reward and safety critics.
///
/// `next_value` is whatever the caller bootstraps from; it is ignored at a
/// true terminal.
pub fn bellman_target(reward: f64, kind: TerminationKind, gamma: f64, next_value: f64) -> f64 {
    if kind.bootstraps() {
        reward + gamma * next_value
    } else {
        reward
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fall_does_not_bootstrap() {
        assert_eq!(
            bellman_target(-0.05, TerminationKind::FallTerminal, 0.99, 123.0),
            -0.05
        );
        assert_eq!(
            bellman_target(-0.1, TerminationKind::FallTerminal, 0.99, 5.0),
            -0.1
        );
    }

    #[test]
    fn boundary_timeout_bootstraps() {
        // next value = min target Q − α·logπ = 2.0 − (−0.1)
        let t = bellman_target(0.1, TerminationKind::BoundaryTimeout, 0.99, 2.0 + 0.1);
        assert!((t - 2.179).abs() < 1e-12);
        let s = bellman_target(0.2, TerminationKind::Running, 0.99, 1.0);
        assert!((s - 1.19).abs() < 1e-12);
    }

    #[test]
    fn myopic_discount_returns_reward() {
        for kind in [
            TerminationKind::Running,
            TerminationKind::FallTerminal,
            TerminationKind::BoundaryTimeout,
            TerminationKind::EpisodeTimeout,
        ] {
            assert_eq!(bellman_target(0.37, kind, 0.0, 9.0), 0.37);
        }
    }

    #[test]
    fn safe_fixed_point() {
        let margin = 0.25;
        let gamma = 0.99;
        let v = margin / (1.0 - gamma);
        let t = bellman_target(margin, TerminationKind::Running, gamma, v);
        assert!((t - v).abs() < 1e-12);
    }
}
