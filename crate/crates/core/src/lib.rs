//! Mish and comparator activation functions with numerically stable scalar
//! math, elementwise forward/backward kernels, a small deterministic
//! neural-network engine, dataset loaders and loss/output landscape tools.
//!
//! The crate is organised bottom-up:
//!
//! * [`activation`]: exact scalar math in double precision.
//! * [`kernels`]: buffer-level forward/backward application and the
//!   microbenchmark harness.
//! * [`nn`]: dense/conv/batch-norm/dropout/pool layers with hand-written
//!   backward passes, initializers, optimizers and the training loop.
//! * [`data`]: IDX and CIFAR-10 binary loaders, Gaussian corruption and
//!   synthetic blobs.
//! * [`landscape`]: output landscapes, loss-surface slices, roughness metrics
//!   and grid export.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod data;
pub mod error;
pub mod kernels;
pub mod landscape;
mod linalg;
pub mod nn;
mod real;

pub use activation::{ActivationKind, MishDerivativeParts};
pub use data::{DataSplit, Dataset, Split};
pub use error::{Error, Result};
pub use landscape::{Field2D, GridSpec};
pub use kernels::{ActivationCache, BenchReport, Buffer, Pass, Precision, Variant};

pub use nn::{Network, NetworkSpec, RunResult, StatSummary, TrainConfig};
pub use real::Real;
