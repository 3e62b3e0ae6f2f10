//! Knowledge graph embeddings with relations as block-diagonal matrix
//! semigroup elements.
//!
//! Entities are vectors in `(ℝ^k)^n`; a relation is a block-diagonal linear
//! (optionally affine) map applied one `k × k` block at a time, and a triplet
//! `(h, r, t)` is scored by `‖M_r v_h − v_t‖₂`. Relations compose by matrix
//! multiplication, which is what the rule regularizer and the audit tooling
//! work with.
//!
//! Module map:
//!
//! * [`data`]: triplet/rule files, vocabulary, filter index.
//! * [`model`]: parameters, relation action, composition, scoring.
//! * [`train`]: negative sampling, loss and gradients, Adam, training loop.
//! * [`eval`]: filtered ranking and MR / MRR / Hits@N.
//! * [`audit`]: composition residuals of trained models.
//! * [`checkpoint`]: versioned binary checkpoints.
//! * [`config`]: experiment configuration files.

// `!(x > 0.0)` is how validation rejects NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod train;

pub use data::{DatasetSplits, FilterIndex, RuleConstraint, RuleTarget, Split, Triplet, Vocabulary};
pub use error::{Error, Result};
pub use eval::{Direction, RankQuery, RankReport};
pub use model::{BlockShape, InitScheme, Model, ModelConfig, RelationParams, Variant};
