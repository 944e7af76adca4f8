//! Retraining-based active learning for binary logistic regression.
//!
//! The crate provides
//!
//! * [`model`]: L2-regularized logistic regression fitted by Newton's method,
//! * [`data`]: dataset loading, standardization, seeded splits and the
//!   labeled/unlabeled pool,
//! * [`strategies`]: random and uncertainty sampling, expected error
//!   reduction (EER) and minimum loss increase (MLI), each with average,
//!   worst-case, best-case or uncertainty-weighted aggregation over the
//!   unknown label,
//! * [`experiment`]: the repeated-trial benchmark with learning curves,
//!   ALC, paired t-tests and average ranks,
//! * [`cli`]: configuration files and the CSV/text outputs of the
//!   `uncertal` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod experiment;
pub mod model;
pub mod strategies;

pub use data::{Dataset, Format, PoolState, Rng};
pub use experiment::{ExperimentConfig, NamedStrategy, TrialResult};
pub use model::{Label, Model, TrainConfig};
pub use strategies::{Aggregation, Criterion, SelectorKind, StrategySpec};
