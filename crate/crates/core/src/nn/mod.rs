//! Minimal differentiable-computation kernel.
//!
//! There is no computation graph: each layer exposes an explicit forward
//! and backward, and the agents module composes them by hand. Every
//! backward pass is verified against central finite differences (see the
//! `grad_checks` integration tests).

mod adam;
mod dense;
mod gradcheck;
mod gru;
pub mod linalg;
mod ops;
mod schedule;
mod tensor;

pub use adam::{adam_step, AdamHyper};
pub use dense::Dense;
pub use gradcheck::grad_check;
pub use gru::{GruCache, GruCell};
pub use ops::{
    gumbel_softmax, gumbel_softmax_backward, gumbel_softmax_sample, log_sum_exp, sample_gumbel,
    softmax_cross_entropy, softmax_in_place,
};
pub use schedule::TemperatureSchedule;
pub use tensor::{Parameter, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("target index {index} out of range for {len} logits")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("cannot evaluate an empty split")]
    EmptySplit,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
