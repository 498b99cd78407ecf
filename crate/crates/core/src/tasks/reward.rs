use super::TaskVector;
use crate::env::{wrap_angle, Action, Pose};

/// Weight of the squared command second difference.
pub const SMOOTHNESS_WEIGHT: f64 = 0.001;

/// Torso heading at the start of an episode; displacement is scored in this frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeFrame {
    /// Rotation matrix `[[c, −s], [s, c]]` of the start yaw.
    pub rotation: [[f64; 2]; 2],
    pub origin: Pose,
}

impl EpisodeFrame {
    pub fn at(origin: Pose) -> Self {
        let (s, c) = origin.yaw.sin_cos();
        Self {
            rotation: [[c, -s], [s, c]],
            origin,
        }
    }

    /// `R⁻¹ · v`; the transpose, since the matrix is a rotation.
    pub fn to_local(&self, v: [f64; 2]) -> [f64; 2] {
        let r = &self.rotation;
        [
            r[0][0] * v[0] + r[1][0] * v[1],
            r[0][1] * v[0] + r[1][1] * v[1],
        ]
    }
}

/// Per-step task reward.
///
/// `window` is ordered oldest first: `a_{t−2}, a_{t−1}, a_t`.
pub fn task_reward(
    frame: &EpisodeFrame,
    prev: &Pose,
    cur: &Pose,
    window: &[Action; 3],
    task: &TaskVector,
) -> f64 {
    let local = frame.to_local([cur.x - prev.x, cur.y - prev.y]);
    let turn = wrap_angle(cur.yaw - prev.yaw);
    let [a2, a1, a0] = window;
    let accel: f64 = (0..a0.len())
        .map(|i| {
            let d = a0[i] - 2.0 * a1[i] + a2[i];
            d * d
        })
        .sum();
    task.w1 * local[0] + task.w2 * local[1] + task.w3 * turn - SMOOTHNESS_WEIGHT * accel
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pose(x: f64, y: f64, yaw: f64) -> Pose {
        Pose { x, y, yaw }
    }

    const STILL: [Action; 3] = [[0.3, -0.2, 0.1, 0.0]; 3];

    #[test]
    fn forward_substitution() {
        let frame = EpisodeFrame::at(pose(0.0, 0.0, 0.0));
        let r = task_reward(
            &frame,
            &pose(0.0, 0.0, 0.0),
            &pose(0.1, 0.05, 0.2),
            &STILL,
            &TaskVector::forward(),
        );
        assert!((r - 0.1).abs() < 1e-15);
    }

    #[test]
    fn turn_substitution() {
        let frame = EpisodeFrame::at(pose(0.0, 0.0, 0.0));
        let r = task_reward(
            &frame,
            &pose(1.0, 1.0, 0.1),
            &pose(1.0, 1.0, 0.5),
            &STILL,
            &TaskVector::turn_left(),
        );
        assert!((r - 0.2).abs() < 1e-15);
    }

    #[test]
    fn smoothness_penalty_on_a_step() {
        let frame = EpisodeFrame::at(pose(0.0, 0.0, 0.0));
        let mut window = [[0.0; 4]; 3];
        window[2][1] = 1.0;
        let p = pose(0.0, 0.0, 0.0);
        let r = task_reward(&frame, &p, &p, &window, &TaskVector::forward());
        assert!((r + 0.001).abs() < 1e-15);
    }

    #[test]
    fn yaw_difference_wraps() {
        let frame = EpisodeFrame::at(pose(0.0, 0.0, 0.0));
        let r = task_reward(
            &frame,
            &pose(0.0, 0.0, PI - 0.05),
            &pose(0.0, 0.0, -PI + 0.05),
            &STILL,
            &TaskVector::new("spin", 0.0, 0.0, 1.0),
        );
        assert!((r - 0.1).abs() < 1e-12);
    }

    #[test]
    fn episode_frame_is_a_rotation() {
        for yaw in [-3.0, -0.4, 0.0, 1.2, 3.1] {
            let r = EpisodeFrame::at(pose(0.0, 0.0, yaw)).rotation;
            let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
            assert!((det - 1.0).abs() < 1e-15);
            let dot = r[0][0] * r[0][1] + r[1][0] * r[1][1];
            assert!(dot.abs() < 1e-15);
        }
    }

    fn rotate(p: &Pose, angle: f64, shift: [f64; 2]) -> Pose {
        let (s, c) = angle.sin_cos();
        pose(
            c * p.x - s * p.y + shift[0],
            s * p.x + c * p.y + shift[1],
            wrap_angle(p.yaw + angle),
        )
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (-5.0f64..5.0, -5.0f64..5.0, -PI..PI).prop_map(|(x, y, yaw)| pose(x, y, yaw))
    }

    fn arb_window() -> impl Strategy<Value = [Action; 3]> {
        prop::array::uniform3(prop::array::uniform4(-1.0f64..1.0))
    }

    fn arb_task() -> impl Strategy<Value = TaskVector> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_map(|(a, b, c)| TaskVector::new("t", a, b, c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn invariant_under_rigid_motion(
            origin in arb_pose(),
            prev in arb_pose(),
            step in (-0.05f64..0.05, -0.05f64..0.05, -0.3f64..0.3),
            window in arb_window(),
            task in arb_task(),
            angle in -PI..PI,
            shift in prop::array::uniform2(-10.0f64..10.0),
        ) {
            let cur = pose(prev.x + step.0, prev.y + step.1, wrap_angle(prev.yaw + step.2));
            let base = task_reward(&EpisodeFrame::at(origin), &prev, &cur, &window, &task);
            let moved = task_reward(
                &EpisodeFrame::at(rotate(&origin, angle, shift)),
                &rotate(&prev, angle, shift),
                &rotate(&cur, angle, shift),
                &window,
                &task,
            );
            prop_assert!((base - moved).abs() < 1e-12, "{} vs {}", base, moved);
        }

        #[test]
        fn counter_task_negates_displacement_reward(
            origin in arb_pose(),
            prev in arb_pose(),
            step in (-0.05f64..0.05, -0.05f64..0.05),
            a in prop::array::uniform4(-1.0f64..1.0),
            w in (-1.0f64..1.0, -1.0f64..1.0),
        ) {
            let frame = EpisodeFrame::at(origin);
            let cur = pose(prev.x + step.0, prev.y + step.1, prev.yaw);
            let window = [a; 3];
            let task = TaskVector::new("t", w.0, w.1, 0.0);
            let counter = TaskVector::new("c", -w.0, -w.1, 0.0);
            let r = task_reward(&frame, &prev, &cur, &window, &task);
            let rc = task_reward(&frame, &prev, &cur, &window, &counter);
            prop_assert_eq!(r, -rc);
        }
    }
}
