//! Differentiable layer primitives.
//!
//! Every primitive has a pure forward function and a matching backward
//! function. Backward functions accumulate into the `grad` buffers of the
//! [`ParamTensor`](crate::tensor::ParamTensor)s they receive and return the
//! gradient with respect to the layer input.

mod conv;
mod dense;
mod elementwise;
pub(crate) mod gemm;
mod norm;
mod pool;

pub use conv::{
    conv2d, conv2d_backward, conv2d_output_shape, transposed_conv2d, transposed_conv2d_backward,
    transposed_conv2d_output_shape, ConvGeometry,
};
pub use dense::{dense, dense_batch, dense_batch_backward};
pub use elementwise::{dropout2d, dropout2d_backward, elu, elu_backward, DropoutMask};
pub use norm::{group_norm, group_norm_backward, GroupNormCache, GROUP_NORM_EPS};
pub use pool::{max_pool2d, max_pool2d_backward};
