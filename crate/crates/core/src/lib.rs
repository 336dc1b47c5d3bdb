//! Budgeted active labeling.
//!
//! A pool of unlabeled samples is labeled over a fixed number of rounds. Each
//! round the current classifier scores the pool by least-confidence
//! uncertainty, the most uncertain samples are sent to an oracle, and the
//! classifier is fine-tuned on everything labeled so far with a per-batch
//! uncertainty-weighted cross-entropy loss.
//!
//! Module map:
//!
//! - [`data`]: samples, datasets, manifests, synthetic mixtures, holdout splits, round plans
//! - [`model`]: softmax / one-hidden-layer classifiers, losses, gradients, AdamW, cosine schedule
//! - [`strategy`]: uncertainty scores, batch loss weights, top-m query selection
//! - [`session`]: the labeling session state machine and simulated oracle
//! - [`eval`]: accuracy, representativeness divergence, baselines, experiment harness

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod seed;
pub mod session;
pub mod strategy;

pub use error::{Error, Result};
