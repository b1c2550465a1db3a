//! A minimal rank-4 tensor engine with reverse-mode differentiation.
//!
//! Training runs in `f32`; gradient checks run the same code in `f64`.
//! Kernels parallelize over batch items only, and every reduction across
//! items runs in a fixed order, so results do not depend on thread count.

mod adam;
mod batchnorm;
mod gradcheck;
pub mod ops;
mod scalar;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use batchnorm::{batch_norm_eval, batch_norm_train, BatchNormState, BnMode};
pub use gradcheck::{grad_check, GradReport, REL_ERROR_FLOOR};
pub use ops::{
    activation, concat_channels, conv2d, pool2, sum, upsample2, weighted_sum, Activation, PoolKind,
};
pub use scalar::{matmul, Scalar};
pub use tape::{Op, Tape, Var};
pub use tensor::Tensor;
