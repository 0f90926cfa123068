//! Small deterministic network engine with hand-written backward passes.
//!
//! Every layer keeps what its backward pass needs on a [`Tape`]; activation
//! layers call the elementwise kernels, so activation derivatives have a
//! single source.

pub mod conv;
mod gradcheck;
mod loss;
mod network;
mod optim;
mod spec;
mod stats;
mod tensor;
mod train;

pub use gradcheck::{gradcheck, GradCheckReport, GRADCHECK_FLOOR, GRADCHECK_STEP};
pub use loss::{argmax_rows, softmax, softmax_cross_entropy};
pub use network::{Gradients, Mode, Network, RunningStats, Tape};
pub use optim::{Optimizer, OptimizerConfig};
pub use spec::{
    build_cnn5, build_cnn6, build_mlp, build_mlp_for, build_plain_mlp, Initializer, LayerSpec,
    NetworkSpec, BN_EPS, BN_MOMENTUM,
};
pub use stats::{aggregate_runs, summarize, StatSummary};
pub use tensor::Tensor;
pub use train::{
    evaluate, train, train_network, EpochMetrics, RunResult, TrainConfig, EPOCH_CSV_HEADER,
    EVAL_BATCH,
};
