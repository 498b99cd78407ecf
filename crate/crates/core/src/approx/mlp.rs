use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::{check_len, ApproxError, Result};

/// Hidden layer widths used by every critic and policy unless overridden.
pub const DEFAULT_HIDDEN: [usize; 2] = [256, 256];

/// Fully connected network: ReLU on hidden layers, identity on the output.
///
/// Weight matrix `i` has shape `(layer_sizes[i + 1], layer_sizes[i])` and is
/// applied to row-major batches as `x · Wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
}

/// Parameter gradients, shaped exactly like the owning [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Activations retained by [`Mlp::forward_batch`] for the backward pass.
///
/// `layer_inputs[i]` is the input seen by layer `i` (so `layer_inputs[0]` is
/// the batch itself).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub layer_inputs: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(ApproxError::InvalidArchitecture(layer_sizes.to_vec()));
    }
    Ok(())
}

impl Mlp {
    /// Uniform initialization in `±1/√fan_in` for weights and biases.
    pub fn new<R: Rng + ?Sized>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.random_range(-bound..=bound)
            }));
            biases.push(Array1::from_shape_simple_fn(fan_out, || {
                rng.random_range(-bound..=bound)
            }));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes
                .windows(2)
                .map(|p| Array2::zeros((p[1], p[0])))
                .collect(),
            biases: layer_sizes[1..].iter().map(|&n| Array1::zeros(n)).collect(),
        })
    }

    pub fn from_parts(
        layer_sizes: &[usize],
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let layers = layer_sizes.len() - 1;
        check_len("weight matrices", layers, weights.len())?;
        check_len("bias vectors", layers, biases.len())?;
        for (i, pair) in layer_sizes.windows(2).enumerate() {
            if weights[i].dim() != (pair[1], pair[0]) {
                return Err(ApproxError::MalformedRecord(format!(
                    "layer {i} weight shape {:?}, expected {:?}",
                    weights[i].dim(),
                    (pair[1], pair[0])
                )));
            }
            check_len("bias", pair[1], biases[i].len())?;
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Parameter tensors in a fixed order: `w0, b0, w1, b1, ...`.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| {
                [
                    w.as_slice().expect("standard layout"),
                    b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| {
                [
                    w.as_slice_mut().expect("standard layout"),
                    b.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_dim(), input.len())?;
        let mut act = input.to_vec();
        let last = self.weights.len() - 1;
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = b.to_vec();
            for (r, out) in next.iter_mut().enumerate() {
                let row = w.row(r);
                let mut acc = 0.0;
                for (wv, xv) in row.iter().zip(&act) {
                    acc += wv * xv;
                }
                *out += acc;
                if i < last && *out <= 0.0 {
                    *out = 0.0;
                }
            }
            act = next;
        }
        Ok(act)
    }

    /// Batched forward pass over rows of `input`, keeping what backprop needs.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<ForwardCache> {
        check_len("network input columns", self.input_dim(), input.ncols())?;
        let last = self.weights.len() - 1;
        let mut layer_inputs = Vec::with_capacity(self.weights.len());
        let mut act = input.to_owned();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = act.dot(&w.t());
            z += b;
            if i < last {
                z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
            }
            layer_inputs.push(act);
            act = z;
        }
        Ok(ForwardCache {
            layer_inputs,
            output: act,
        })
    }

    /// Backpropagates `upstream` (one row per batch element, `∂L/∂output`).
    ///
    /// Returns parameter gradients when `want_params` is set, plus the
    /// gradient with respect to the batch input. Gradients are summed over
    /// the batch, so callers fold any `1/B` into `upstream`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
        want_params: bool,
    ) -> Result<(Option<MlpGrads>, Array2<f64>)> {
        check_len("upstream columns", self.output_dim(), upstream.ncols())?;
        check_len("upstream rows", cache.output.nrows(), upstream.nrows())?;
        let layers = self.weights.len();
        let mut grad_w = Vec::with_capacity(if want_params { layers } else { 0 });
        let mut grad_b = Vec::with_capacity(if want_params { layers } else { 0 });
        let mut delta = upstream.to_owned();
        for i in (0..layers).rev() {
            let input = &cache.layer_inputs[i];
            if want_params {
                grad_w.push(delta.t().dot(input).as_standard_layout().into_owned());
                grad_b.push(delta.sum_axis(Axis(0)));
            }
            let mut d_input = delta.dot(&self.weights[i]);
            if i > 0 {
                // layer_inputs[i] is a ReLU output: positive exactly where the unit was active.
                Zip::from(&mut d_input).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = d_input;
        }
        let grads = if want_params {
            grad_w.reverse();
            grad_b.reverse();
            Some(MlpGrads {
                weights: grad_w,
                biases: grad_b,
            })
        } else {
            None
        };
        Ok((grads, delta))
    }

    /// Exact gradients of `upstream · f(input)` for a single input vector.
    pub fn gradient(&self, input: &[f64], upstream: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        check_len("network input", self.input_dim(), input.len())?;
        check_len("upstream", self.output_dim(), upstream.len())?;
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let up = ArrayView2::from_shape((1, upstream.len()), upstream).expect("row vector");
        let cache = self.forward_batch(x)?;
        let (grads, d_input) = self.backward(&cache, up, true)?;
        Ok((
            grads.expect("requested"),
            d_input.into_raw_vec_and_offset().0,
        ))
    }

    /// Moves every parameter toward `source`: `θ ← (1−τ)·θ + τ·θ_src`.
    pub fn polyak_update(&mut self, source: &Mlp, tau: f64) -> Result<()> {
        if self.layer_sizes != source.layer_sizes {
            return Err(ApproxError::ArchitectureMismatch(
                self.layer_sizes.clone(),
                source.layer_sizes.clone(),
            ));
        }
        let keep = 1.0 - tau;
        for (t, s) in self.weights.iter_mut().zip(&source.weights) {
            Zip::from(t)
                .and(s)
                .for_each(|t, &s| *t = keep * *t + tau * s);
        }
        for (t, s) in self.biases.iter_mut().zip(&source.biases) {
            Zip::from(t)
                .and(s)
                .for_each(|t, &s| *t = keep * *t + tau * s);
        }
        Ok(())
    }
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net
                .weights
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            biases: net
                .biases
                .iter()
                .map(|b| Array1::zeros(b.raw_dim()))
                .collect(),
        }
    }

    /// Same ordering as [`Mlp::param_slices`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| {
                [
                    w.as_slice().expect("standard layout"),
                    b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.mapv_inplace(|v| v * factor);
        }
        for b in &mut self.biases {
            b.mapv_inplace(|v| v * factor);
        }
    }
}
