//! Reverse-mode automatic differentiation over dense tensors, plus Adam.
//!
//! A [`Graph`] records every operation as it is evaluated. Calling
//! [`Graph::backward`] on a scalar node walks the record backwards and fills
//! in gradients for every node that (transitively) depends on a leaf created
//! with `requires_grad`. Non-smooth points use the usual subgradients:
//! ReLU and `abs` pass 0 at exactly 0, max-pooling routes to the lowest
//! index among ties, and Chamfer treats nearest neighbours as constant.

mod adam;
pub mod gradcheck;
mod graph;
mod ops;
mod tensor;

#[cfg(test)]
mod tests;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use graph::{Graph, Mode, NodeId};
pub use ops::{RunningStats, BATCH_NORM_EPS, BATCH_NORM_MOMENTUM};
pub use tensor::Tensor;
