//! Core library for the hierarchical reference game.
//!
//! A sender agent observes a concept, an object together with a relevance
//! vector marking which attributes matter in context, and emits a discrete
//! message. A receiver agent uses the message to pick the one object that
//! instantiates the concept out of a set of distractors. This crate provides
//! the concept domain types, dataset generation with controlled distractor
//! sampling, a small hand-rolled differentiable kernel (dense layers, a GRU
//! cell, relaxed categorical sampling, Adam), the agents and training loop,
//! and the information-theoretic and compositionality metrics used to
//! analyze the emergent languages.
//!
//! All numeric layers are generic over [`Scalar`]; `f32` is the training
//! type and `f64` backs the gradient-verification paths.

pub mod agents;
pub mod concept;
pub mod dataset;
pub mod metrics;
pub mod nn;
mod scalar;

pub use scalar::Scalar;

/// RNG used for every seeded operation. ChaCha output is identical across
/// platforms, which keeps datasets and training runs byte-reproducible.
pub type RunRng = rand_chacha::ChaCha8Rng;

pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type SenderParams32 = agents::SenderParams<f32>;
pub type ReceiverParams32 = agents::ReceiverParams<f32>;
pub type TrainedPair32 = agents::TrainedPair<f32>;
pub type TrainedPair64 = agents::TrainedPair<f64>;
