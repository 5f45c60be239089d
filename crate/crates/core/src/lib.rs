//! Multi-task sparse feature learning with capped-l1,l1 regularization.
//!
//! The crate provides the multi-stage solver with a fixed threshold
//! ([`multistage::run_msmtfl`]) and with an adaptively estimated threshold
//! ([`multistage::run_msmtfl_at`]), the convex l1,1 and l2,1 baselines, a
//! seeded synthetic data generator, evaluation metrics, dataset/result I/O and
//! the experiment harness behind the `msmtfl` binary.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod model;
pub mod multistage;
pub mod rng;
pub mod threshold;
pub mod wlasso;

pub use error::{MtflError, Result};
pub use model::{
    capped_l1l1_objective, quadratic_loss, row_l1_norms, PenaltyVector, RowNormVector, Task,
    TaskDataset, WeightMatrix,
};
