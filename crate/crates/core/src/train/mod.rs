//! Training: negative sampling, loss, rule penalty, Adam and the loop.

pub mod adam;
pub mod grad;
pub mod loss;
pub mod regularizer;
pub mod sampling;
mod trainer;

pub use adam::{adam_step, AdamState, OptimizerConfig};
pub use grad::{Gradients, SparseRows};
pub use loss::{adversarial_weights, log_sigmoid, positive_negative_loss, LossConfig, TripletLoss};
pub use regularizer::rule_regularization;
pub use sampling::{sample_negatives, sample_negatives_with, Corruption, CorruptionMode, NegativeBatch, Side};
pub use trainer::{batch_loss, train, train_with_observer, MetricsRow, Schedule, StopReason, TrainOutcome, Trainer};
