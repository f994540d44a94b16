//! Regularized stochastic gradient descent for operator learning in
//! vector-valued reproducing kernel Hilbert spaces.
//!
//! * [`kernel`]: output vectors, scalar kernels, Gram matrices.
//! * [`schedule`]: online and finite-horizon step-size / regularization rules.
//! * [`dual`]: the kernel-dual SGD estimator.
//! * [`spectral`]: a diagonal universe with exact error functionals.
//! * [`structured`]: surrogate structured prediction.
//! * [`pca`]: PCA encoder-decoder around the dual estimator.
//! * [`harness`]: experiment configuration, rate fitting and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod error;
pub mod harness;
pub mod kernel;
mod linalg;
pub mod pca;
pub mod rng;
pub mod schedule;
pub mod spectral;
pub mod structured;

pub use error::{Error, Result};
