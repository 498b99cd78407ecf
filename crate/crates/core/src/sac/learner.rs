//! Single-task learner: twin reward critics, one safety critic, a squashed
//! Gaussian actor, an entropy temperature and a Lagrange multiplier.
//!
//! Every gradient round runs, in order: critic regression, actor step,
//! multiplier step, temperature step.

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{bellman_target, Batch, ReplayBuffer};
use crate::approx::{
    AdamRecord, AdamState, ApproxError, GaussianPolicyHead, Mlp, NetworkRecord, PolicyBatch,
};
use crate::env::ACTION_DIM;

/// How the safety constraint enters the actor objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Learn λ by dual descent and add `−λ·S` to the actor loss.
    Lagrangian,
    /// λ pinned at zero; the safety critic is neither trained nor used.
    Disabled,
}

/// Which estimate of the constraint drives the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSignal {
    /// Stored per-step margins `f_s` from the batch.
    InstantMargin,
    /// Safety critic `S(s, a)` at fresh policy actions.
    SafetyCritic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub warmup: usize,
    pub buffer_capacity: usize,
    pub gradient_steps: usize,
    pub constraint: Constraint,
    pub lambda_init: f64,
    pub lambda_lr: f64,
    pub lambda_signal: LambdaSignal,
    pub alpha_init: f64,
    pub alpha_lr: f64,
    pub target_entropy: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: crate::approx::DEFAULT_HIDDEN.to_vec(),
            gamma: 0.99,
            tau: 0.005,
            learning_rate: crate::approx::DEFAULT_LEARNING_RATE,
            batch_size: 256,
            warmup: 1000,
            buffer_capacity: super::DEFAULT_CAPACITY,
            gradient_steps: 2,
            constraint: Constraint::Lagrangian,
            lambda_init: 1.0,
            lambda_lr: 0.01,
            lambda_signal: LambdaSignal::InstantMargin,
            alpha_init: 1.0,
            alpha_lr: 3e-4,
            target_entropy: -(ACTION_DIM as f64),
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("sac.{name} must be positive, got {v}"))
            }
        };
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(format!(
                "sac.hidden must list positive widths, got {:?}",
                self.hidden
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("sac.gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(format!("sac.tau must lie in [0, 1], got {}", self.tau));
        }
        positive("learning_rate", self.learning_rate)?;
        positive("alpha_init", self.alpha_init)?;
        if self.batch_size == 0 {
            return Err("sac.batch_size must be positive".into());
        }
        if self.buffer_capacity < self.batch_size {
            return Err("sac.buffer_capacity must hold at least one batch".into());
        }
        if self.gradient_steps == 0 {
            return Err("sac.gradient_steps must be positive".into());
        }
        if !(self.lambda_init.is_finite() && self.lambda_init >= 0.0) {
            return Err(format!(
                "sac.lambda_init must be >= 0, got {}",
                self.lambda_init
            ));
        }
        if !(self.lambda_lr.is_finite() && self.lambda_lr >= 0.0) {
            return Err(format!(
                "sac.lambda_lr must be >= 0, got {}",
                self.lambda_lr
            ));
        }
        if !(self.alpha_lr.is_finite() && self.alpha_lr >= 0.0) {
            return Err(format!("sac.alpha_lr must be >= 0, got {}", self.alpha_lr));
        }
        if !self.target_entropy.is_finite() {
            return Err("sac.target_entropy must be finite".into());
        }
        Ok(())
    }
}

/// Projected dual descent on `J(λ) = λ·signal`.
pub fn lambda_step(lambda: f64, lr: f64, signal: f64) -> f64 {
    (lambda - lr * signal).max(0.0)
}

/// Dual descent on `log α` for `J = −log α · (log π + target)`.
pub fn log_alpha_step(log_alpha: f64, lr: f64, mean_log_prob: f64, target_entropy: f64) -> f64 {
    log_alpha + lr * (mean_log_prob + target_entropy)
}

/// Half-MSE-free regression step: one Adam update of `net` toward `targets`.
/// Returns the mean squared error before the update.
pub fn mse_step(
    net: &mut Mlp,
    opt: &mut AdamState,
    input: ArrayView2<f64>,
    targets: &Array1<f64>,
) -> Result<f64, ApproxError> {
    let cache = net.forward_batch(input)?;
    let pred = cache.output.column(0);
    let residual = &pred - targets;
    let n = residual.len() as f64;
    let loss = residual.mapv(|r| r * r).sum() / n;
    let upstream = residual.mapv(|r| 2.0 * r / n).insert_axis(Axis(1));
    let (grads, _) = net.backward(&cache, upstream.view(), true)?;
    opt.step_mlp(net, &grads.expect("requested"))?;
    Ok(loss)
}

fn critic_input(obs: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
    concatenate![Axis(1), *obs, *actions]
}

fn column(net: &Mlp, input: ArrayView2<f64>) -> Result<Array1<f64>, ApproxError> {
    Ok(net.forward_batch(input)?.output.column(0).to_owned())
}

/// Actions drawn from the current actor at the batch's successor states.
#[derive(Debug, Clone)]
pub struct NextActions {
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Diagnostics {
    pub q_loss: f64,
    pub s_loss: f64,
    pub actor_loss: f64,
    pub mean_log_prob: f64,
    pub lambda: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ActorReport {
    pub loss: f64,
    pub mean_log_prob: f64,
    pub mean_safety_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub config: SacConfig,
    pub actor: GaussianPolicyHead,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub s_critic: Mlp,
    pub s_target: Mlp,
    pub lambda: f64,
    pub log_alpha: f64,
    pub actor_opt: AdamState,
    pub q1_opt: AdamState,
    pub q2_opt: AdamState,
    pub s_opt: AdamState,
    seed: u64,
    rng: ChaCha8Rng,
}

impl LearnerState {
    pub fn new(config: SacConfig, obs_dim: usize, seed: u64) -> Result<Self, ApproxError> {
        let mut init = ChaCha8Rng::seed_from_u64(seed);
        let actor = GaussianPolicyHead::new(obs_dim, &config.hidden, ACTION_DIM, &mut init)?;
        let mut critic_sizes = vec![obs_dim + ACTION_DIM];
        critic_sizes.extend_from_slice(&config.hidden);
        critic_sizes.push(1);
        let q1 = Mlp::new(&critic_sizes, &mut init)?;
        let q2 = Mlp::new(&critic_sizes, &mut init)?;
        let s_critic = Mlp::new(&critic_sizes, &mut init)?;
        let lr = config.learning_rate;
        let update_seed = seed ^ 0x5eed_u64.rotate_left(32);
        Ok(Self {
            actor_opt: AdamState::for_mlp(&actor.trunk, lr),
            q1_opt: AdamState::for_mlp(&q1, lr),
            q2_opt: AdamState::for_mlp(&q2, lr),
            s_opt: AdamState::for_mlp(&s_critic, lr),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            s_target: s_critic.clone(),
            actor,
            q1,
            q2,
            s_critic,
            lambda: match config.constraint {
                Constraint::Lagrangian => config.lambda_init,
                Constraint::Disabled => 0.0,
            },
            log_alpha: config.alpha_init.ln(),
            seed: update_seed,
            rng: ChaCha8Rng::seed_from_u64(update_seed),
            config,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.obs_dim()
    }

    fn gaussian(&mut self, rows: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, ACTION_DIM), || self.rng.sample(StandardNormal))
    }

    /// Stochastic action for data collection, noise drawn from `rng`.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<Vec<f64>, ApproxError> {
        let noise: Vec<f64> = (0..ACTION_DIM)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Ok(self.actor.sample(obs, &noise)?.0)
    }

    pub fn act_deterministic(&self, obs: &[f64]) -> Result<Vec<f64>, ApproxError> {
        self.actor.deterministic(obs)
    }

    pub fn sample_next(&mut self, next_obs: &Array2<f64>) -> Result<NextActions, ApproxError> {
        let noise = self.gaussian(next_obs.nrows());
        let pb = self.actor.sample_batch(next_obs.view(), noise)?;
        Ok(NextActions {
            actions: pb.actions,
            log_probs: pb.log_probs,
        })
    }

    /// Reward-critic targets: `r + γ·(min Q̄(s′, a′) − α·log π(a′|s′))`, no bootstrap at a fall.
    pub fn q_targets(&self, batch: &Batch, next: &NextActions) -> Result<Array1<f64>, ApproxError> {
        let input = critic_input(&batch.next_obs, &next.actions);
        let q1 = column(&self.q1_target, input.view())?;
        let q2 = column(&self.q2_target, input.view())?;
        let alpha = self.alpha();
        Ok(Array1::from_shape_fn(batch.len(), |r| {
            let soft_value = q1[r].min(q2[r]) - alpha * next.log_probs[r];
            bellman_target(
                batch.rewards[r],
                batch.kinds[r],
                self.config.gamma,
                soft_value,
            )
        }))
    }

    /// Safety-critic targets: `f_s + γ·S̄(s′, a′)`, no entropy term, no bootstrap at a fall.
    pub fn s_targets(&self, batch: &Batch, next: &NextActions) -> Result<Array1<f64>, ApproxError> {
        let input = critic_input(&batch.next_obs, &next.actions);
        let s = column(&self.s_target, input.view())?;
        Ok(Array1::from_shape_fn(batch.len(), |r| {
            bellman_target(batch.safety[r], batch.kinds[r], self.config.gamma, s[r])
        }))
    }

    fn trains_safety(&self) -> bool {
        self.config.constraint == Constraint::Lagrangian
    }

    /// One regression step per critic, then Polyak-averages the targets.
    /// Returns `(mean reward-critic loss, safety-critic loss)`.
    pub fn critic_update(&mut self, batch: &Batch) -> Result<(f64, f64), ApproxError> {
        let next = self.sample_next(&batch.next_obs)?;
        let q_targets = self.q_targets(batch, &next)?;
        let input = critic_input(&batch.obs, &batch.actions);
        let l1 = mse_step(&mut self.q1, &mut self.q1_opt, input.view(), &q_targets)?;
        let l2 = mse_step(&mut self.q2, &mut self.q2_opt, input.view(), &q_targets)?;
        let tau = self.config.tau;
        self.q1_target.polyak_update(&self.q1, tau)?;
        self.q2_target.polyak_update(&self.q2, tau)?;
        let mut s_loss = 0.0;
        if self.trains_safety() {
            let s_targets = self.s_targets(batch, &next)?;
            s_loss = mse_step(
                &mut self.s_critic,
                &mut self.s_opt,
                input.view(),
                &s_targets,
            )?;
            self.s_target.polyak_update(&self.s_critic, tau)?;
        }
        Ok((0.5 * (l1 + l2), s_loss))
    }

    /// Reparameterized step on `E[α·log π(a|s) − min Q(s,a) − λ·S(s,a)]`.
    pub fn actor_update(&mut self, batch: &Batch) -> Result<ActorReport, ApproxError> {
        let noise = self.gaussian(batch.len());
        let pb = self.actor.sample_batch(batch.obs.view(), noise)?;
        self.actor_step(batch, pb)
    }

    fn actor_step(&mut self, batch: &Batch, pb: PolicyBatch) -> Result<ActorReport, ApproxError> {
        let rows = batch.len();
        let n = rows as f64;
        let obs_dim = batch.obs.ncols();
        let alpha = self.alpha();
        let lambda = self.lambda;
        let input = critic_input(&batch.obs, &pb.actions);

        let c1 = self.q1.forward_batch(input.view())?;
        let c2 = self.q2.forward_batch(input.view())?;
        let mut up1 = Array2::zeros((rows, 1));
        let mut up2 = Array2::zeros((rows, 1));
        let mut q_min = Array1::zeros(rows);
        for r in 0..rows {
            let (a, b) = (c1.output[[r, 0]], c2.output[[r, 0]]);
            if a <= b {
                q_min[r] = a;
                up1[[r, 0]] = -1.0 / n;
            } else {
                q_min[r] = b;
                up2[[r, 0]] = -1.0 / n;
            }
        }
        let (_, g1) = self.q1.backward(&c1, up1.view(), false)?;
        let (_, g2) = self.q2.backward(&c2, up2.view(), false)?;
        let mut dl_da = g1.slice(s![.., obs_dim..]).to_owned();
        dl_da += &g2.slice(s![.., obs_dim..]);

        let mut safety_values = None;
        if self.trains_safety() {
            let cs = self.s_critic.forward_batch(input.view())?;
            if lambda != 0.0 {
                let up = Array2::from_elem((rows, 1), -lambda / n);
                let (_, gs) = self.s_critic.backward(&cs, up.view(), false)?;
                dl_da += &gs.slice(s![.., obs_dim..]);
            }
            safety_values = Some(cs.output.column(0).to_owned());
        }

        let mut loss = 0.0;
        for r in 0..rows {
            loss += alpha * pb.log_probs[r] - q_min[r];
            if let Some(sv) = &safety_values {
                loss -= lambda * sv[r];
            }
        }
        loss /= n;

        let dl_dlogp = Array1::from_elem(rows, alpha / n);
        let grads = self.actor.backward(&pb, dl_da.view(), dl_dlogp.view())?;
        self.actor_opt.step_mlp(&mut self.actor.trunk, &grads)?;

        Ok(ActorReport {
            loss,
            mean_log_prob: pb.log_probs.sum() / n,
            mean_safety_value: safety_values.map_or(0.0, |sv| sv.sum() / n),
        })
    }

    /// Dual step on λ; a no-op when the constraint is disabled.
    pub fn lambda_update(&mut self, batch: &Batch, actor: &ActorReport) -> f64 {
        if self.config.constraint == Constraint::Disabled {
            self.lambda = 0.0;
            return 0.0;
        }
        let signal = match self.config.lambda_signal {
            LambdaSignal::InstantMargin => batch.safety.sum() / batch.len() as f64,
            LambdaSignal::SafetyCritic => actor.mean_safety_value,
        };
        self.lambda = lambda_step(self.lambda, self.config.lambda_lr, signal);
        self.lambda
    }

    pub fn alpha_update(&mut self, mean_log_prob: f64) -> f64 {
        self.log_alpha = log_alpha_step(
            self.log_alpha,
            self.config.alpha_lr,
            mean_log_prob,
            self.config.target_entropy,
        );
        self.alpha()
    }

    /// `gradient_steps` full rounds, or `None` while the buffer is below warm-up.
    pub fn train_step(
        &mut self,
        buffer: &mut ReplayBuffer,
    ) -> Result<Option<Diagnostics>, ApproxError> {
        if buffer.len() < self.config.warmup.max(self.config.batch_size) {
            return Ok(None);
        }
        let mut diag = Diagnostics::default();
        for _ in 0..self.config.gradient_steps {
            let batch = buffer
                .sample(self.config.batch_size)
                .expect("buffer holds at least one batch");
            let (q_loss, s_loss) = self.critic_update(&batch)?;
            let actor = self.actor_update(&batch)?;
            let lambda = self.lambda_update(&batch, &actor);
            let alpha = self.alpha_update(actor.mean_log_prob);
            diag = Diagnostics {
                q_loss,
                s_loss,
                actor_loss: actor.loss,
                mean_log_prob: actor.mean_log_prob,
                lambda,
                alpha,
            };
        }
        Ok(Some(diag))
    }

    pub fn to_record(&self) -> LearnerRecord {
        LearnerRecord {
            config: self.config.clone(),
            actor: NetworkRecord::from_mlp(&self.actor.trunk),
            q1: NetworkRecord::from_mlp(&self.q1),
            q2: NetworkRecord::from_mlp(&self.q2),
            q1_target: NetworkRecord::from_mlp(&self.q1_target),
            q2_target: NetworkRecord::from_mlp(&self.q2_target),
            s_critic: NetworkRecord::from_mlp(&self.s_critic),
            s_target: NetworkRecord::from_mlp(&self.s_target),
            actor_opt: AdamRecord::from_state(&self.actor_opt),
            q1_opt: AdamRecord::from_state(&self.q1_opt),
            q2_opt: AdamRecord::from_state(&self.q2_opt),
            s_opt: AdamRecord::from_state(&self.s_opt),
            lambda: self.lambda,
            log_alpha: self.log_alpha,
            rng_seed: self.seed,
            rng_word_pos: self.rng.get_word_pos().to_string(),
        }
    }

    pub fn from_record(rec: &LearnerRecord) -> Result<Self, ApproxError> {
        let actor = GaussianPolicyHead::from_trunk(rec.actor.to_mlp()?)?;
        let q1 = rec.q1.to_mlp()?;
        let q2 = rec.q2.to_mlp()?;
        let q1_target = rec.q1_target.to_mlp()?;
        let q2_target = rec.q2_target.to_mlp()?;
        let s_critic = rec.s_critic.to_mlp()?;
        let s_target = rec.s_target.to_mlp()?;
        let critic = q1.layer_sizes().to_vec();
        for net in [&q2, &q1_target, &q2_target, &s_critic, &s_target] {
            if net.layer_sizes() != critic.as_slice() {
                return Err(ApproxError::ArchitectureMismatch(
                    critic,
                    net.layer_sizes().to_vec(),
                ));
            }
        }
        if critic[0] != actor.obs_dim() + ACTION_DIM || actor.action_dim() != ACTION_DIM {
            return Err(ApproxError::MalformedRecord(
                "actor and critic input sizes disagree".into(),
            ));
        }
        let pos: u128 = rec
            .rng_word_pos
            .parse()
            .map_err(|_| ApproxError::MalformedRecord("bad rng cursor".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(rec.rng_seed);
        rng.set_word_pos(pos);
        if !(rec.lambda.is_finite() && rec.lambda >= 0.0 && rec.log_alpha.is_finite()) {
            return Err(ApproxError::MalformedRecord(
                "invalid dual variables".into(),
            ));
        }
        Ok(Self {
            config: rec.config.clone(),
            actor_opt: rec.actor_opt.to_state_for(&actor.trunk)?,
            q1_opt: rec.q1_opt.to_state_for(&q1)?,
            q2_opt: rec.q2_opt.to_state_for(&q2)?,
            s_opt: rec.s_opt.to_state_for(&s_critic)?,
            actor,
            q1,
            q2,
            q1_target,
            q2_target,
            s_critic,
            s_target,
            lambda: rec.lambda,
            log_alpha: rec.log_alpha,
            seed: rec.rng_seed,
            rng,
        })
    }
}

/// Serialized [`LearnerState`]; embedded in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerRecord {
    pub config: SacConfig,
    pub actor: NetworkRecord,
    pub q1: NetworkRecord,
    pub q2: NetworkRecord,
    pub q1_target: NetworkRecord,
    pub q2_target: NetworkRecord,
    pub s_critic: NetworkRecord,
    pub s_target: NetworkRecord,
    pub actor_opt: AdamRecord,
    pub q1_opt: AdamRecord,
    pub q2_opt: AdamRecord,
    pub s_opt: AdamRecord,
    pub lambda: f64,
    pub log_alpha: f64,
    pub rng_seed: u64,
    /// Decimal `u128`; JSON numbers cannot carry it losslessly.
    pub rng_word_pos: String,
}
