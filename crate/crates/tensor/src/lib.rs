//! Dense `f64` tensors with a recording tape for reverse-mode differentiation.
//!
//! The op set is deliberately narrow: exactly the layers a small
//! convolutional encoder and MLP decoder need (valid strided convolution,
//! batch normalization, ReLU, dropout, affine maps), plus the reductions used
//! by vector-field reconstruction losses. [`Adam`] updates parameter slices
//! from the gradients returned by [`Tape::backward`].

mod adam;
mod conv;
mod error;
mod gemm;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use conv::{conv_output_extent, ConvGeometry};
pub use error::{Result, TensorError};
pub use tape::{BatchNormStats, FieldLossKind, Gradients, Mode, Tape, Var};
pub use tensor::Tensor;
