//! The from-scratch probabilistic classifier and everything needed to train it.

mod checkpoint;
mod classifier;
mod loss;
mod optim;
mod schedule;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use classifier::{
    predict_proba, softmax, Architecture, Classifier, ClassifierParams, DenseLayer, Gradients, ProbVector,
};
pub use loss::{cross_entropy, grad_weighted_ce, weighted_batch_loss, weighted_ce_objective, Labeled, LOG_EPS};
pub use optim::{step, AdamWConfig, OptimizerState};
pub use schedule::{cosine_lr, TrainSchedule};
pub use train::{train, TrainStats};
