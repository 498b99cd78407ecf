//! Portable serialized forms of networks and optimizer state.
//!
//! Numeric arrays are stored as base64 of little-endian IEEE-754 `f64`
//! bytes, so a load reproduces every parameter bit for bit.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{AdamState, ApproxError, Mlp, Result};

pub const NETWORK_RECORD_VERSION: u32 = 1;

/// Little-endian `f64` array, base64 encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PackedF64(String);

impl PackedF64 {
    pub fn pack(values: &[f64]) -> Self {
        let mut bytes = Vec::with_capacity(values.len() * 8);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        Self(STANDARD.encode(bytes))
    }

    pub fn unpack(&self) -> Result<Vec<f64>> {
        let bytes = STANDARD
            .decode(&self.0)
            .map_err(|e| ApproxError::MalformedRecord(format!("base64: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(ApproxError::MalformedRecord(format!(
                "{} bytes is not a whole number of f64 values",
                bytes.len()
            )));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    /// Row-major weight matrices, one per layer.
    pub weights: Vec<PackedF64>,
    pub biases: Vec<PackedF64>,
}

impl NetworkRecord {
    pub fn from_mlp(net: &Mlp) -> Self {
        Self {
            version: NETWORK_RECORD_VERSION,
            layer_sizes: net.layer_sizes().to_vec(),
            weights: net
                .weights()
                .iter()
                .map(|w| PackedF64::pack(w.as_slice().expect("standard layout")))
                .collect(),
            biases: net
                .biases()
                .iter()
                .map(|b| PackedF64::pack(b.as_slice().expect("standard layout")))
                .collect(),
        }
    }

    pub fn to_mlp(&self) -> Result<Mlp> {
        if self.version != NETWORK_RECORD_VERSION {
            return Err(ApproxError::MalformedRecord(format!(
                "network record version {} (expected {NETWORK_RECORD_VERSION})",
                self.version
            )));
        }
        let sizes = &self.layer_sizes;
        if sizes.len() < 2
            || self.weights.len() != sizes.len() - 1
            || self.biases.len() != sizes.len() - 1
        {
            return Err(ApproxError::MalformedRecord(format!(
                "layer count mismatch for sizes {sizes:?}"
            )));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (i, pair) in sizes.windows(2).enumerate() {
            let w = self.weights[i].unpack()?;
            weights.push(
                Array2::from_shape_vec((pair[1], pair[0]), w)
                    .map_err(|e| ApproxError::MalformedRecord(format!("layer {i}: {e}")))?,
            );
            biases.push(Array1::from(self.biases[i].unpack()?));
        }
        Mlp::from_parts(sizes, weights, biases)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamRecord {
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub first_moment: Vec<PackedF64>,
    pub second_moment: Vec<PackedF64>,
}

impl AdamRecord {
    pub fn from_state(state: &AdamState) -> Self {
        Self {
            step_count: state.step_count,
            learning_rate: state.learning_rate,
            beta1: state.beta1,
            beta2: state.beta2,
            epsilon: state.epsilon,
            first_moment: state
                .first_moment
                .iter()
                .map(|m| PackedF64::pack(m))
                .collect(),
            second_moment: state
                .second_moment
                .iter()
                .map(|v| PackedF64::pack(v))
                .collect(),
        }
    }

    pub fn to_state(&self) -> Result<AdamState> {
        let first_moment = self
            .first_moment
            .iter()
            .map(PackedF64::unpack)
            .collect::<Result<Vec<_>>>()?;
        let second_moment = self
            .second_moment
            .iter()
            .map(PackedF64::unpack)
            .collect::<Result<Vec<_>>>()?;
        if first_moment.len() != second_moment.len()
            || first_moment
                .iter()
                .zip(&second_moment)
                .any(|(m, v)| m.len() != v.len())
        {
            return Err(ApproxError::MalformedRecord(
                "adam moment shapes differ".into(),
            ));
        }
        Ok(AdamState {
            first_moment,
            second_moment,
            step_count: self.step_count,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        })
    }

    /// Checks that the moments line up with `net`'s parameter tensors.
    pub fn to_state_for(&self, net: &Mlp) -> Result<AdamState> {
        let state = self.to_state()?;
        let lens: Vec<usize> = net.param_slices().iter().map(|s| s.len()).collect();
        let got: Vec<usize> = state.first_moment.iter().map(|m| m.len()).collect();
        if lens != got {
            return Err(ApproxError::MalformedRecord(format!(
                "adam moments {got:?} do not match network tensors {lens:?}"
            )));
        }
        Ok(state)
    }
}
