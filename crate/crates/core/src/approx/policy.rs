//! Tanh-squashed diagonal Gaussian policy.
//!
//! The trunk emits `[mean | log_std]`; a sample is `a = tanh(mean + std ⊙ ε)`
//! and its log-density carries the change-of-variables correction
//! `−Σ log(1 − tanh²(u))`, evaluated as `2·(ln 2 − u − softplus(−2u))`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::{check_len, ForwardCache, Mlp, MlpGrads, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
/// Largest magnitude an emitted action component may take.
const ACTION_LIMIT: f64 = 1.0 - f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicyHead {
    pub trunk: Mlp,
    action_dim: usize,
}

/// Everything a batched sample produces, kept for the reparameterized backward pass.
#[derive(Debug, Clone)]
pub struct PolicyBatch {
    pub cache: ForwardCache,
    pub noise: Array2<f64>,
    pub log_std: Array2<f64>,
    /// `true` where the raw log-std fell outside the clamp range (zero gradient).
    pub clamped: Array2<bool>,
    pub pre_squash: Array2<f64>,
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 − tanh²(u))` without cancellation for large `|u|`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

fn squash(u: f64) -> f64 {
    u.tanh().clamp(-ACTION_LIMIT, ACTION_LIMIT)
}

impl GaussianPolicyHead {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * action_dim);
        Ok(Self {
            trunk: Mlp::new(&sizes, rng)?,
            action_dim,
        })
    }

    pub fn from_trunk(trunk: Mlp) -> Result<Self> {
        let out = trunk.output_dim();
        if !out.is_multiple_of(2) {
            return Err(super::ApproxError::MalformedRecord(format!(
                "policy trunk output {out} is not even"
            )));
        }
        Ok(Self {
            trunk,
            action_dim: out / 2,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    /// Single-observation sample: returns the squashed action and its log-density.
    pub fn sample(&self, obs: &[f64], noise: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_len("policy noise", self.action_dim, noise.len())?;
        let out = self.trunk.forward(obs)?;
        let d = self.action_dim;
        let mut action = Vec::with_capacity(d);
        let mut log_prob = 0.0;
        for i in 0..d {
            let log_std = out[d + i].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let u = out[i] + log_std.exp() * noise[i];
            log_prob +=
                -0.5 * noise[i] * noise[i] - log_std - HALF_LN_2PI - log_one_minus_tanh_sq(u);
            action.push(squash(u));
        }
        Ok((action, log_prob))
    }

    /// `tanh(mean)`: the noise-free action used for evaluation.
    pub fn deterministic(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let out = self.trunk.forward(obs)?;
        Ok(out[..self.action_dim].iter().map(|&m| squash(m)).collect())
    }

    pub fn sample_batch(&self, obs: ArrayView2<f64>, noise: Array2<f64>) -> Result<PolicyBatch> {
        let d = self.action_dim;
        check_len("policy noise columns", d, noise.ncols())?;
        check_len("policy noise rows", obs.nrows(), noise.nrows())?;
        let cache = self.trunk.forward_batch(obs)?;
        let mean = cache.output.slice(s![.., ..d]);
        let raw_log_std = cache.output.slice(s![.., d..]);
        let clamped = raw_log_std.mapv(|v| !(LOG_STD_MIN..=LOG_STD_MAX).contains(&v));
        let log_std = raw_log_std.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        let pre_squash = &mean + &(log_std.mapv(f64::exp) * &noise);
        let actions = pre_squash.mapv(squash);
        let mut log_probs = Array1::zeros(obs.nrows());
        for (r, lp) in log_probs.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..d {
                let e = noise[[r, i]];
                acc += -0.5 * e * e
                    - log_std[[r, i]]
                    - HALF_LN_2PI
                    - log_one_minus_tanh_sq(pre_squash[[r, i]]);
            }
            *lp = acc;
        }
        Ok(PolicyBatch {
            cache,
            noise,
            log_std,
            clamped,
            pre_squash,
            actions,
            log_probs,
        })
    }

    /// Reparameterized gradient of `Σ_r [dl_dlogp_r · logπ_r + dl_daction_r · a_r]`.
    pub fn backward(
        &self,
        batch: &PolicyBatch,
        dl_daction: ArrayView2<f64>,
        dl_dlogp: ArrayView1<f64>,
    ) -> Result<MlpGrads> {
        let d = self.action_dim;
        let rows = batch.actions.nrows();
        check_len("action gradient rows", rows, dl_daction.nrows())?;
        check_len("action gradient columns", d, dl_daction.ncols())?;
        check_len("log-prob gradient", rows, dl_dlogp.len())?;
        let mut upstream = Array2::zeros((rows, 2 * d));
        for r in 0..rows {
            let w = dl_dlogp[r];
            for i in 0..d {
                let u = batch.pre_squash[[r, i]];
                let t = u.tanh();
                // ∂logπ/∂u = 2·tanh(u) from the squash correction
                let dl_du = dl_daction[[r, i]] * (1.0 - t * t) + w * 2.0 * t;
                upstream[[r, i]] = dl_du;
                if !batch.clamped[[r, i]] {
                    let std = batch.log_std[[r, i]].exp();
                    upstream[[r, d + i]] = dl_du * std * batch.noise[[r, i]] - w;
                }
            }
        }
        let (grads, _) = self.trunk.backward(&batch.cache, upstream.view(), true)?;
        Ok(grads.expect("requested"))
    }

    pub fn mean_log_prob(batch: &PolicyBatch) -> f64 {
        batch
            .log_probs
            .mean_axis(Axis(0))
            .map_or(0.0, |m| m.into_scalar())
    }
}
