//! Kernel regularized least squares on partitioned input spaces.
//!
//! The crate provides exact global KRLS, plain Nyström subsampling,
//! localized (per-cell) estimators and their combination, together with
//! parameter schedules, effective-dimension diagnostics, synthetic tasks with
//! known regularity, and an experiment engine that measures error decay rates
//! and fit cost.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod kernels;
pub mod krls;
pub mod linalg;
pub mod localized;
pub mod nystrom;
pub mod partition;
pub mod points;
pub mod seeding;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use kernels::{
    cross_gram, eval_kernel, gram, kernel_bound, BoxDomain, GramMatrix, KernelFamily, KernelSpec,
};
pub use points::Points;
