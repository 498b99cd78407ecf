//! Planar walker dynamics.
//!
//! Per 20 ms step: the raw command is low-pass filtered, the gait phase
//! advances at a rate trimmed by the fourth action channel, stride thrust
//! is the filtered stride drive times `sin(phase)`, and the torso tilt is a
//! leaky integrator driven by locomotion speed plus command jerk.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EnvError, Terrain, Workspace, ACTION_DIM, DT};

pub const PITCH_LIMIT: f64 = PI / 12.0;
pub const ROLL_LIMIT: f64 = PI / 6.0;
/// Distance to a wall at which outbound motion ends the episode.
pub const NEAR_BOUNDARY: f64 = 0.3;
pub const RESET_COST_SECONDS: f64 = 12.0;
pub const RESET_TILT_JITTER: f64 = 0.02;
const FILTER_CUTOFF_HZ: f64 = 5.0;
const BASE_GAIT_HZ: f64 = 2.5;
const TILT_RETENTION: f64 = 0.95;
const SNAG_SLIP_FACTOR: f64 = 0.1;
const SNAG_RELEASE_JERK: f64 = 0.8;

pub type Action = [f64; ACTION_DIM];

/// Coefficient `c` of the first-order low-pass filter: `exp(−2π·f_c·dt)`.
pub fn filter_coefficient() -> f64 {
    (-TAU * FILTER_CUTOFF_HZ * DT).exp()
}

pub fn butterworth(prev_filtered: &Action, raw: &Action) -> Action {
    let c = filter_coefficient();
    let mut out = [0.0; ACTION_DIM];
    for i in 0..ACTION_DIM {
        out[i] = c * prev_filtered[i] + (1.0 - c) * raw[i];
    }
    out
}

/// Tilt headroom before a fall; negative once either limit is exceeded.
pub fn safety_margin(state: &WalkerState) -> f64 {
    (PITCH_LIMIT - state.pitch.abs()).min(ROLL_LIMIT - state.roll.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryStatus {
    Inside,
    NearAndOutbound,
    Outside,
}

/// Classifies the walker against the workspace using its last-step velocity.
pub fn boundary_check(state: &WalkerState, workspace: &Workspace) -> BoundaryStatus {
    if !workspace.contains(state.x, state.y) {
        return BoundaryStatus::Outside;
    }
    // (distance to wall, outward normal · velocity)
    let walls = [
        (workspace.half_width - state.x, state.vx),
        (workspace.half_width + state.x, -state.vx),
        (workspace.half_height - state.y, state.vy),
        (workspace.half_height + state.y, -state.vy),
    ];
    let (distance, outward) =
        walls.into_iter().fold(
            (f64::INFINITY, 0.0),
            |best, w| if w.0 < best.0 { w } else { best },
        );
    if distance < NEAR_BOUNDARY && outward > 0.0 {
        BoundaryStatus::NearAndOutbound
    } else {
        BoundaryStatus::Inside
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerState {
    pub x: f64,
    pub y: f64,
    /// Heading in (−π, π].
    pub yaw: f64,
    pub roll: f64,
    pub pitch: f64,
    pub prev_roll: f64,
    pub prev_pitch: f64,
    /// Gait phase in [0, 2π).
    pub phase: f64,
    pub filtered: Action,
    /// `[a_{t−1}, a_{t−2}]`, raw commands.
    pub prev_actions: [Action; 2],
    /// Planar velocity over the last step, m/s.
    pub vx: f64,
    pub vy: f64,
    pub snagged: bool,
    pub step_index: u64,
}

impl Default for WalkerState {
    fn default() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            yaw: 0.0,
            roll: 0.0,
            pitch: 0.0,
            prev_roll: 0.0,
            prev_pitch: 0.0,
            phase: 0.0,
            filtered: [0.0; ACTION_DIM],
            prev_actions: [[0.0; ACTION_DIM]; 2],
            vx: 0.0,
            vy: 0.0,
            snagged: false,
            step_index: 0,
        }
    }
}

impl WalkerState {
    pub fn pose(&self) -> Pose {
        Pose {
            x: self.x,
            y: self.y,
            yaw: self.yaw,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    pub fall: bool,
    pub out_of_workspace: bool,
    pub near_boundary_outbound: bool,
    pub snag_started: bool,
    pub snag_ended: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: WalkerState,
    pub pose_before: Pose,
    pub pose_after: Pose,
    pub safety: f64,
    pub events: StepEvents,
}

/// Tunable parts of the dynamics law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dynamics {
    /// Draw tilt noise from the rng; off gives a fully deterministic walker.
    pub noise: bool,
    /// Tilt excitation per unit of command jerk `‖a_t − a_{t−1}‖`, rad/s.
    pub jerk_tilt_gain: f64,
    /// Tilt excitation per unit of thrust or turn speed, rad/s per m/s.
    pub speed_tilt_gain: f64,
}

impl Default for Dynamics {
    fn default() -> Self {
        Self {
            noise: true,
            jerk_tilt_gain: 0.05,
            speed_tilt_gain: 1.5,
        }
    }
}

/// Maps into (−π, π]; angles already in range are returned unchanged.
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

pub fn validate_action(action: &[f64]) -> Result<Action, EnvError> {
    if action.len() != ACTION_DIM {
        return Err(EnvError::ActionDimension(action.len()));
    }
    let mut out = [0.0; ACTION_DIM];
    for (i, &a) in action.iter().enumerate() {
        if !(-1.0..=1.0).contains(&a) {
            return Err(EnvError::ActionOutOfRange { index: i, value: a });
        }
        out[i] = a;
    }
    Ok(out)
}

/// Advances the walker by one control step.
pub fn step<R: Rng + ?Sized>(
    state: &WalkerState,
    action: &[f64],
    terrain: &Terrain,
    workspace: &Workspace,
    dynamics: &Dynamics,
    rng: &mut R,
) -> Result<StepOutcome, EnvError> {
    let action = validate_action(action)?;
    if safety_margin(state) < 0.0 {
        return Err(EnvError::Fallen);
    }
    let mut next = state.clone();
    let mut events = StepEvents::default();

    let jerk = action
        .iter()
        .zip(&state.prev_actions[0])
        .map(|(a, p)| (a - p) * (a - p))
        .sum::<f64>()
        .sqrt();

    if terrain.snag_probability > 0.0 {
        if state.snagged {
            if jerk > SNAG_RELEASE_JERK {
                next.snagged = false;
                events.snag_ended = true;
            }
        } else if rng.random::<f64>() < terrain.snag_probability {
            next.snagged = true;
            events.snag_started = true;
        }
    }

    next.filtered = butterworth(&state.filtered, &action);
    let [stride, balance, turn, trim] = next.filtered;
    next.phase = (state.phase + TAU * BASE_GAIT_HZ * (0.5 + 0.5 * trim) * DT).rem_euclid(TAU);
    let s = next.phase.sin();

    let thrust = 0.5 * stride * s;
    let slip = if next.snagged {
        terrain.slip_gain * SNAG_SLIP_FACTOR
    } else {
        terrain.slip_gain
    };
    let advance = thrust * slip * DT;
    let (sin_yaw, cos_yaw) = state.yaw.sin_cos();
    next.x = state.x + advance * cos_yaw;
    next.y = state.y + advance * sin_yaw;
    let turn_rate = 1.5 * turn * s.abs();
    next.yaw = wrap_angle(state.yaw + turn_rate * DT);
    next.vx = (next.x - state.x) / DT;
    next.vy = (next.y - state.y) / DT;

    let jerk_gain = dynamics.jerk_tilt_gain;
    let speed_gain = dynamics.speed_tilt_gain;
    let (eta_p, eta_r) = if dynamics.noise {
        (
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    } else {
        (0.0, 0.0)
    };
    let noise_scale = terrain.tilt_noise * DT.sqrt();
    next.prev_pitch = state.pitch;
    next.prev_roll = state.roll;
    next.pitch = TILT_RETENTION * state.pitch
        + (speed_gain * thrust.abs() + jerk_gain * jerk - 0.5 * balance * state.pitch) * DT
        + noise_scale * eta_p;
    next.roll = TILT_RETENTION * state.roll
        + (speed_gain * (1.5 * turn * s).abs() + jerk_gain * jerk) * DT
        + noise_scale * eta_r;

    next.prev_actions = [action, state.prev_actions[0]];
    next.step_index = state.step_index + 1;

    let safety = safety_margin(&next);
    if safety < 0.0 {
        events.fall = true;
    } else {
        match boundary_check(&next, workspace) {
            BoundaryStatus::Outside => events.out_of_workspace = true,
            BoundaryStatus::NearAndOutbound => events.near_boundary_outbound = true,
            BoundaryStatus::Inside => {}
        }
    }

    Ok(StepOutcome {
        pose_before: state.pose(),
        pose_after: next.pose(),
        state: next,
        safety,
        events,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// Next episode starts where the last one ended.
    EpisodeStart,
    AfterFall,
    /// The walker left the workspace and is carried back.
    AfterEscape,
}

/// Returns the fresh state and the simulated time the reset costs, seconds.
pub fn reset<R: Rng + ?Sized>(
    state: &WalkerState,
    mode: ResetMode,
    rng: &mut R,
) -> (WalkerState, f64) {
    let (x, y, yaw, cost) = match mode {
        ResetMode::EpisodeStart => (state.x, state.y, state.yaw, 0.0),
        ResetMode::AfterFall | ResetMode::AfterEscape => {
            let yaw = wrap_angle(rng.random_range(-PI..PI));
            (0.0, 0.0, yaw, RESET_COST_SECONDS)
        }
    };
    let pitch = rng.random_range(-RESET_TILT_JITTER..=RESET_TILT_JITTER);
    let roll = rng.random_range(-RESET_TILT_JITTER..=RESET_TILT_JITTER);
    let next = WalkerState {
        x,
        y,
        yaw,
        roll,
        pitch,
        prev_roll: roll,
        prev_pitch: pitch,
        step_index: state.step_index,
        ..WalkerState::default()
    };
    (next, cost)
}
