//! Small dense networks with hand-written backpropagation.
//!
//! Everything the learners need lives here: a ReLU multilayer perceptron
//! evaluated over row-major batches, Adam, Polyak averaging for target
//! networks, and the tanh-squashed Gaussian policy head.

mod adam;
mod gradcheck;
mod mlp;
mod policy;
mod record;

pub use adam::{AdamState, DEFAULT_LEARNING_RATE};
pub use gradcheck::{compare_gradients, finite_diff_check, GradCheck};
pub use mlp::{ForwardCache, Mlp, MlpGrads, DEFAULT_HIDDEN};
pub use policy::{GaussianPolicyHead, PolicyBatch, LOG_STD_MAX, LOG_STD_MIN};
pub use record::{AdamRecord, NetworkRecord, NETWORK_RECORD_VERSION};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("{what}: expected length {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("architecture mismatch: {0:?} vs {1:?}")]
    ArchitectureMismatch(Vec<usize>, Vec<usize>),
    #[error("invalid architecture {0:?}: need at least two positive layer sizes")]
    InvalidArchitecture(Vec<usize>),
    #[error("malformed network record: {0}")]
    MalformedRecord(String),
}

pub type Result<T> = std::result::Result<T, ApproxError>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(ApproxError::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
