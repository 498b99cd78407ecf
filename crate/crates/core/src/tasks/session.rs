use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    select_task, task_reward, EpisodeFrame, SchedulerMode, TaskError, TaskSet, TaskSetPreset,
};
use crate::env::{
    Action, Dynamics, ResetMode, Terrain, TerrainKind, Walker, Workspace, ACTION_DIM, DT, OBS_DIM,
    RESET_COST_SECONDS,
};
use crate::sac::{Constraint, LearnerState, ReplayBuffer, SacConfig, TerminationKind, Transition};

/// 10 s at 50 Hz, shorter than one 12 s reset.
pub const DEFAULT_HORIZON: usize = 500;

/// Multiplies the per-step task reward so that a steady hand-written gait
/// earns a little over 25 per full episode on flat ground.
pub const DEFAULT_REWARD_SCALE: f64 = 10.0;

/// How falls are discouraged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyMode {
    /// Constrained learning with a learned multiplier.
    Lagrangian,
    /// Reward shaping `r + w·f_s`; the multiplier stays at zero.
    FixedWeight(f64),
    /// Plain soft actor-critic.
    None,
}

impl SafetyMode {
    pub fn shaping_weight(self) -> f64 {
        match self {
            SafetyMode::FixedWeight(w) => w,
            _ => 0.0,
        }
    }

    pub fn label(self) -> String {
        match self {
            SafetyMode::Lagrangian => "lagrangian".into(),
            SafetyMode::FixedWeight(w) => format!("fixed_weight_{w:.1}"),
            SafetyMode::None => "none".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    pub terrain: TerrainKind,
    pub workspace: Workspace,
    pub task_set: TaskSetPreset,
    pub scheduler: SchedulerMode,
    pub safety: SafetyMode,
    pub seed: u64,
    /// Environment steps per trained task; the session runs this many
    /// times the number of tasks it trains.
    pub steps_per_task: u64,
    pub horizon: usize,
    pub reward_scale: f64,
    /// End an episode early when the walker is near a wall and heading out.
    pub boundary_termination: bool,
    pub dynamics: Dynamics,
    pub sac: SacConfig,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            terrain: TerrainKind::Flat,
            workspace: Workspace::LARGE,
            task_set: TaskSetPreset::TwoTask,
            scheduler: SchedulerMode::Center,
            safety: SafetyMode::Lagrangian,
            seed: 0,
            steps_per_task: 60_000,
            horizon: DEFAULT_HORIZON,
            reward_scale: DEFAULT_REWARD_SCALE,
            boundary_termination: true,
            dynamics: Dynamics::default(),
            sac: SacConfig::default(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |m: String| Err(TaskError::InvalidConfig(m));
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return bad(format!(
                "reward_scale must be positive, got {}",
                self.reward_scale
            ));
        }
        if let SafetyMode::FixedWeight(w) = self.safety {
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("safety fixed_weight must be >= 0, got {w}"));
            }
        }
        if !(self.dynamics.jerk_tilt_gain.is_finite() && self.dynamics.jerk_tilt_gain >= 0.0) {
            return bad("dynamics.jerk_tilt_gain must be >= 0".into());
        }
        self.sac.validate().map_err(TaskError::InvalidConfig)
    }

    /// Tasks this session trains, in learner order.
    pub fn trained_tasks(&self) -> TaskSet {
        let mut set = TaskSet::preset(self.task_set);
        if self.scheduler == SchedulerMode::SingleTask {
            set.tasks.truncate(1);
        }
        set
    }

    /// The learner configuration implied by the safety mode.
    pub fn learner_config(&self) -> SacConfig {
        let mut sac = self.sac.clone();
        if self.safety != SafetyMode::Lagrangian {
            sac.constraint = Constraint::Disabled;
        }
        sac
    }
}

/// One per-episode log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub episode: u64,
    pub task: String,
    pub steps: u64,
    /// Scaled task reward only; shaping terms are excluded so that modes compare.
    pub episode_return: f64,
    pub cumulative_falls: u64,
    pub cumulative_oob: u64,
    /// Seconds, including reset costs.
    pub cumulative_sim_time: f64,
    pub lambda: f64,
    pub alpha: f64,
}

/// Derived sub-seeds so every stream in a session is independent.
fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        ^ stream
}

/// Everything one training run owns. Learners and buffers are indexed by task.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub config: SessionConfig,
    pub tasks: TaskSet,
    pub learners: Vec<LearnerState>,
    pub buffers: Vec<ReplayBuffer>,
    pub walker: Walker,
    pub episodes: u64,
    pub total_steps: u64,
    pub falls: u64,
    pub escapes: u64,
    pub records: Vec<RunRecord>,
    action_rng: ChaCha8Rng,
    round_robin: usize,
}

impl SessionState {
    pub fn new(config: SessionConfig) -> Result<Self, TaskError> {
        config.validate()?;
        let tasks = config.trained_tasks();
        let sac = config.learner_config();
        let mut learners = Vec::with_capacity(tasks.len());
        let mut buffers = Vec::with_capacity(tasks.len());
        for k in 0..tasks.len() as u64 {
            learners.push(LearnerState::new(
                sac.clone(),
                OBS_DIM,
                sub_seed(config.seed, 10 + k),
            )?);
            buffers.push(ReplayBuffer::new(
                sac.buffer_capacity,
                sub_seed(config.seed, 20 + k),
            ));
        }
        let mut walker = Walker::new(
            Terrain::of(config.terrain),
            config.workspace,
            config.dynamics,
            sub_seed(config.seed, 1),
        );
        // Start at the center facing a random direction; no cost is charged.
        walker.reset(ResetMode::AfterFall);
        Ok(Self {
            action_rng: ChaCha8Rng::seed_from_u64(sub_seed(config.seed, 2)),
            config,
            tasks,
            learners,
            buffers,
            walker,
            episodes: 0,
            total_steps: 0,
            falls: 0,
            escapes: 0,
            records: Vec::new(),
            round_robin: 0,
        })
    }

    pub fn action_rng_word_pos(&self) -> u128 {
        self.action_rng.get_word_pos()
    }

    pub fn budget(&self) -> u64 {
        self.config.steps_per_task * self.tasks.len() as u64
    }

    pub fn is_done(&self) -> bool {
        self.total_steps >= self.budget()
    }

    /// Simulated seconds so far: stepping time plus one reset cost per fall or escape.
    pub fn sim_time(&self) -> f64 {
        self.total_steps as f64 * DT + RESET_COST_SECONDS * (self.falls + self.escapes) as f64
    }

    fn next_task(&mut self) -> usize {
        match self.config.scheduler {
            SchedulerMode::Center => {
                select_task(&self.walker.state().pose(), [0.0, 0.0], &self.tasks)
            }
            SchedulerMode::RoundRobin => {
                let k = self.round_robin % self.tasks.len();
                self.round_robin += 1;
                k
            }
            SchedulerMode::SingleTask => 0,
        }
    }

    /// Runs one episode and returns its log row, or `None` once the budget is spent.
    pub fn run_episode(&mut self) -> Result<Option<RunRecord>, TaskError> {
        if self.is_done() {
            return Ok(None);
        }
        let k = self.next_task();
        let task = self.tasks.tasks[k].clone();
        let frame = EpisodeFrame::at(self.walker.state().pose());
        let budget = self.budget();
        let scale = self.config.reward_scale;
        let shaping = self.config.safety.shaping_weight();

        let mut steps = 0u64;
        let mut episode_return = 0.0;
        let mut kind = TerminationKind::Running;
        let mut escaped = false;
        while !kind.ends_episode() {
            let obs = self.walker.observation();
            let sampled = self.learners[k].act(&obs, &mut self.action_rng)?;
            let mut action: Action = [0.0; ACTION_DIM];
            action.copy_from_slice(&sampled);
            let [prev1, prev2] = self.walker.state().prev_actions;
            let out = self.walker.step(&action)?;
            steps += 1;
            self.total_steps += 1;

            let reward = scale
                * task_reward(
                    &frame,
                    &out.pose_before,
                    &out.pose_after,
                    &[prev2, prev1, action],
                    &task,
                );
            episode_return += reward;

            let ev = out.events;
            kind = if ev.fall {
                TerminationKind::FallTerminal
            } else if ev.out_of_workspace {
                escaped = true;
                TerminationKind::BoundaryTimeout
            } else if ev.near_boundary_outbound && self.config.boundary_termination {
                TerminationKind::BoundaryTimeout
            } else if steps as usize >= self.config.horizon || self.total_steps >= budget {
                TerminationKind::EpisodeTimeout
            } else {
                TerminationKind::Running
            };

            self.buffers[k].push(Transition {
                obs,
                action,
                reward: reward + shaping * out.safety,
                next_obs: self.walker.observation(),
                safety: out.safety,
                kind,
            });
            self.learners[k].train_step(&mut self.buffers[k])?;
        }

        let mode = if kind == TerminationKind::FallTerminal {
            self.falls += 1;
            ResetMode::AfterFall
        } else if escaped {
            self.escapes += 1;
            ResetMode::AfterEscape
        } else {
            ResetMode::EpisodeStart
        };
        self.walker.reset(mode);

        let learner = &self.learners[k];
        let record = RunRecord {
            seed: self.config.seed,
            episode: self.episodes,
            task: task.name.clone(),
            steps,
            episode_return,
            cumulative_falls: self.falls,
            cumulative_oob: self.escapes,
            cumulative_sim_time: self.sim_time(),
            lambda: learner.lambda,
            alpha: learner.alpha(),
        };
        self.episodes += 1;
        if self.episodes.is_multiple_of(50) {
            log::info!(
                "seed {} episode {} steps {}/{} falls {} oob {}",
                self.config.seed,
                self.episodes,
                self.total_steps,
                budget,
                self.falls,
                self.escapes
            );
        }
        self.records.push(record.clone());
        Ok(Some(record))
    }
}

/// Runs episodes until the step budget is spent.
pub fn training_session(config: SessionConfig) -> Result<SessionState, TaskError> {
    let mut session = SessionState::new(config)?;
    while session.run_episode()?.is_some() {}
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny(seed: u64, steps: u64) -> SessionConfig {
        SessionConfig {
            seed,
            steps_per_task: steps,
            horizon: 60,
            sac: SacConfig {
                hidden: vec![8, 8],
                batch_size: 8,
                warmup: 16,
                ..SacConfig::default()
            },
            ..SessionConfig::default()
        }
    }

    #[test]
    fn zero_budget_is_empty() {
        let s = training_session(tiny(0, 0)).unwrap();
        assert!(s.records.is_empty());
        assert_eq!((s.falls, s.escapes, s.total_steps), (0, 0, 0));
        assert_eq!(s.sim_time(), 0.0);
    }

    #[test]
    fn budget_and_time_accounting() {
        let s = training_session(tiny(3, 150)).unwrap();
        assert_eq!(s.total_steps, 300);
        let steps: u64 = s.records.iter().map(|r| r.steps).sum();
        assert_eq!(steps, 300);
        let last = s.records.last().unwrap();
        let expected = 300.0 * DT + 12.0 * (last.cumulative_falls + last.cumulative_oob) as f64;
        assert!((last.cumulative_sim_time - expected).abs() < 1e-9);
        for pair in s.records.windows(2) {
            assert!(pair[1].cumulative_falls >= pair[0].cumulative_falls);
            assert!(pair[1].cumulative_oob >= pair[0].cumulative_oob);
            assert!(pair[1].cumulative_sim_time >= pair[0].cumulative_sim_time);
            assert_eq!(pair[1].episode, pair[0].episode + 1);
        }
        assert!(s.records.iter().all(|r| r.steps as usize <= 60));
    }

    #[test]
    fn sessions_are_reproducible() {
        let a = training_session(tiny(5, 100)).unwrap();
        let b = training_session(tiny(5, 100)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.learners, b.learners);
        let c = training_session(tiny(6, 100)).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn learners_and_buffers_stay_per_task() {
        let s = training_session(tiny(7, 200)).unwrap();
        let mut seen = vec![0usize; s.tasks.len()];
        for r in &s.records {
            seen[s.tasks.index_of(&r.task).unwrap()] += r.steps as usize;
        }
        for (k, buffer) in s.buffers.iter().enumerate() {
            assert_eq!(buffer.len(), seen[k]);
        }
        assert_ne!(s.learners[0].actor, s.learners[1].actor);
    }

    #[test]
    fn single_task_trains_one_learner() {
        let config = SessionConfig {
            scheduler: SchedulerMode::SingleTask,
            ..tiny(1, 80)
        };
        let s = training_session(config).unwrap();
        assert_eq!(s.learners.len(), 1);
        assert_eq!(s.total_steps, 80);
        assert!(s.records.iter().all(|r| r.task == "forward"));
    }

    #[test]
    fn round_robin_alternates() {
        let config = SessionConfig {
            scheduler: SchedulerMode::RoundRobin,
            ..tiny(2, 200)
        };
        let s = training_session(config).unwrap();
        for (i, r) in s.records.iter().enumerate() {
            assert_eq!(r.task, s.tasks.tasks[i % 2].name);
        }
    }

    #[test]
    fn non_lagrangian_modes_pin_lambda() {
        for safety in [SafetyMode::None, SafetyMode::FixedWeight(1.0)] {
            let s = training_session(SessionConfig {
                safety,
                ..tiny(4, 60)
            })
            .unwrap();
            assert!(s.records.iter().all(|r| r.lambda == 0.0));
        }
    }

    #[test]
    fn zero_fixed_weight_matches_plain_sac() {
        let a = training_session(SessionConfig {
            safety: SafetyMode::FixedWeight(0.0),
            ..tiny(9, 80)
        })
        .unwrap();
        let b = training_session(SessionConfig {
            safety: SafetyMode::None,
            ..tiny(9, 80)
        })
        .unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.learners, b.learners);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let config = SessionConfig {
            horizon: 0,
            ..tiny(0, 10)
        };
        assert!(matches!(
            SessionState::new(config),
            Err(TaskError::InvalidConfig(_))
        ));
    }
}
