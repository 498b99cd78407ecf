use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use super::TaskSet;
use crate::env::Pose;

/// How the next episode's task is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerMode {
    /// The task whose motion points at the workspace center.
    Center,
    /// Cycle through the tasks regardless of pose.
    RoundRobin,
    /// Train only the first task of the set; the standard-RL baseline.
    SingleTask,
}

/// Workspace center in the robot frame: `(ahead, left)` components.
pub fn center_bearing(robot: &Pose, center: [f64; 2]) -> [f64; 2] {
    let (dx, dy) = (center[0] - robot.x, center[1] - robot.y);
    let (s, c) = robot.yaw.sin_cos();
    [c * dx + s * dy, -s * dx + c * dy]
}

/// Center-pointing choice for the two- and four-task layouts.
///
/// Tasks are looked up by role (forward/backward/turn-left/turn-right)
/// through their weight signs, so any ordering of a preset works; on an
/// exact sector boundary the lower index wins.
pub fn select_task(robot: &Pose, center: [f64; 2], tasks: &TaskSet) -> usize {
    let [ahead, left] = center_bearing(robot, center);
    let role =
        |pred: &dyn Fn(&[f64; 3]) -> bool| tasks.tasks.iter().position(|t| pred(&t.weights()));
    let forward = role(&|w| w[0] > 0.0);
    let backward = role(&|w| w[0] < 0.0);
    let turn_left = role(&|w| w[0] == 0.0 && w[2] > 0.0);
    let turn_right = role(&|w| w[0] == 0.0 && w[2] < 0.0);

    let (Some(forward), Some(backward)) = (forward, backward) else {
        return 0;
    };
    let (Some(turn_left), Some(turn_right)) = (turn_left, turn_right) else {
        return if ahead >= 0.0 { forward } else { backward };
    };

    let bearing = left.atan2(ahead);
    // Candidates in index order so that ties resolve to the lowest index.
    let mut sectors = [
        (forward, bearing.abs() <= FRAC_PI_4),
        (backward, bearing.abs() >= 3.0 * FRAC_PI_4),
        (turn_left, (FRAC_PI_4..=3.0 * FRAC_PI_4).contains(&bearing)),
        (
            turn_right,
            (-3.0 * FRAC_PI_4..=-FRAC_PI_4).contains(&bearing),
        ),
    ];
    sectors.sort_by_key(|&(index, _)| index);
    sectors
        .iter()
        .find(|(_, hit)| *hit)
        .map(|&(index, _)| index)
        .unwrap_or(forward)
}
