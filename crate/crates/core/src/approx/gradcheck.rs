//! Central finite-difference verification of [`Mlp`] gradients.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Mlp, MlpGrads};

/// Absolute scale below which gradients are compared as absolute errors.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub step: f64,
    /// Caps the number of parameter coordinates probed; `None` checks all.
    pub max_params: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_params: Some(4096),
            seed: 0,
        }
    }
}

/// Max relative error between backprop and central differences of
/// `upstream · f(input)`.
pub fn finite_diff_check(net: &Mlp, input: &[f64], upstream: &[f64], cfg: &GradCheck) -> f64 {
    let (grads, d_input) = net
        .gradient(input, upstream)
        .expect("gradient check needs matching dimensions");
    compare_gradients(net, input, upstream, &grads, &d_input, cfg)
}

/// Same as [`finite_diff_check`] against caller-supplied analytic gradients.
///
/// Coordinates whose ±step perturbation flips any ReLU are skipped: the
/// difference quotient is meaningless across a kink.
pub fn compare_gradients(
    net: &Mlp,
    input: &[f64],
    upstream: &[f64],
    grads: &MlpGrads,
    d_input: &[f64],
    cfg: &GradCheck,
) -> f64 {
    let h = cfg.step;
    let base_mask = relu_mask(net, input);
    let objective = |n: &Mlp, x: &[f64]| -> Option<f64> {
        if relu_mask(n, x) != base_mask {
            return None;
        }
        let y = n.forward(x).ok()?;
        Some(y.iter().zip(upstream).map(|(a, b)| a * b).sum())
    };
    let mut worst: f64 = 0.0;
    let mut record = |analytic: f64, numeric: f64| {
        let err = (analytic - numeric).abs() / numeric.abs().max(REL_FLOOR);
        worst = worst.max(err);
    };

    let mut x = input.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = objective(net, &x);
        x[i] = orig - h;
        let minus = objective(net, &x);
        x[i] = orig;
        if let (Some(p), Some(m)) = (plus, minus) {
            record(d_input[i], (p - m) / (2.0 * h));
        }
    }

    let analytic: Vec<f64> = grads.slices().concat();
    let total = analytic.len();
    let coords: Vec<usize> = match cfg.max_params {
        Some(cap) if cap < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut idx = sample(&mut rng, total, cap).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..total).collect(),
    };
    let mut probe = net.clone();
    for flat in coords {
        let (tensor, offset) = locate(net, flat);
        let orig = probe.param_slices()[tensor][offset];
        probe.param_slices_mut()[tensor][offset] = orig + h;
        let plus = objective(&probe, input);
        probe.param_slices_mut()[tensor][offset] = orig - h;
        let minus = objective(&probe, input);
        probe.param_slices_mut()[tensor][offset] = orig;
        if let (Some(p), Some(m)) = (plus, minus) {
            record(analytic[flat], (p - m) / (2.0 * h));
        }
    }
    worst
}

fn locate(net: &Mlp, mut flat: usize) -> (usize, usize) {
    for (t, s) in net.param_slices().iter().enumerate() {
        if flat < s.len() {
            return (t, flat);
        }
        flat -= s.len();
    }
    panic!("parameter index out of range");
}

fn relu_mask(net: &Mlp, input: &[f64]) -> Vec<bool> {
    let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
    let cache = net.forward_batch(x).expect("dimension checked by caller");
    cache.layer_inputs[1..]
        .iter()
        .flat_map(|a| a.iter().map(|&v| v > 0.0).collect::<Vec<_>>())
        .collect()
}
