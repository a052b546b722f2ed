//! Forward and backward kernels for the layer kinds used by the network zoo,
//! plus the Adam update rule.
//!
//! Spatial tensors are channel-last: a single image is `H x W x C` and a batch
//! is `N x H x W x C`. Kernels accept either form and return the same rank
//! they were given.

mod adam;
mod conv;
mod dense;
mod elementwise;
mod norm;
mod pool;
mod softmax;
mod tensor;

use std::collections::BTreeMap;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, Padding};
pub use dense::{dense_backward, dense_forward, flatten};
pub use elementwise::{
    concatenate, concatenate_backward, dropout_backward, dropout_forward, relu, relu_backward,
    residual_add, residual_add_backward, DropoutMask,
};
pub use norm::{
    batchnorm_backward, batchnorm_forward, BatchNormCache, Mode, RunningStats, BN_EPSILON,
    BN_MOMENTUM,
};
pub use pool::{
    global_avg_pool, global_avg_pool_backward, maxpool2d, maxpool2d_backward, PoolIndices,
};
pub use softmax::{
    cross_entropy, softmax, softmax_backward, softmax_cross_entropy_backward, PROBABILITY_FLOOR,
};
pub use tensor::Tensor;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Named map from parameter name to tensor.
pub type ParamMap<T> = BTreeMap<String, Tensor<T>>;

/// Backward-pass output of one layer.
#[derive(Debug, Clone)]
pub struct LayerGradients<T> {
    pub parameter_grads: ParamMap<T>,
    pub input_grad: Tensor<T>,
}

impl<T: Scalar> LayerGradients<T> {
    pub fn new(input_grad: Tensor<T>) -> Self {
        Self {
            parameter_grads: BTreeMap::new(),
            input_grad,
        }
    }

    pub fn with_param(mut self, name: &str, grad: Tensor<T>) -> Self {
        self.parameter_grads.insert(name.to_string(), grad);
        self
    }

    pub fn param(&self, name: &str) -> Option<&Tensor<T>> {
        self.parameter_grads.get(name)
    }
}

/// Interprets a rank-3 or rank-4 tensor as `(N, H, W, C)`; the flag is set
/// when the input was a single rank-3 image.
pub(crate) fn batch_view<T: Scalar>(
    op: &'static str,
    t: &Tensor<T>,
) -> Result<(usize, usize, usize, usize, bool)> {
    match *t.shape() {
        [h, w, c] => Ok((1, h, w, c, true)),
        [n, h, w, c] => Ok((n, h, w, c, false)),
        _ => Err(Error::shape(
            op,
            format!("expected H x W x C or N x H x W x C, got {:?}", t.shape()),
        )),
    }
}

pub(crate) fn restore_rank<T: Scalar>(t: Tensor<T>, single: bool) -> Tensor<T> {
    if single {
        let shape = t.shape()[1..].to_vec();
        t.reshape(shape).expect("dropping a unit batch axis")
    } else {
        t
    }
}
