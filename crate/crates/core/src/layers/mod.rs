//! Forward and backward kernels for every layer the network topologies use.
//!
//! Sequences are `B x T x C` tensors (batch, time, channels).

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod gru;
mod pool;

pub use activation::{dropout, dropout_backward, relu, relu_backward, sigmoid, sigmoid_backward};
pub use batchnorm::{
    batchnorm_apply, batchnorm_backward, batchnorm_forward, BatchNormCache, BatchNormParams, BN_EPSILON,
    BN_MOMENTUM, BN_PARAM_NAMES,
};
pub use conv::{conv1d_backward, conv1d_forward, ConvCache, ConvParams, CONV_PARAM_NAMES};
pub use dense::{dense_backward, dense_forward, DenseCache, DenseParams, DENSE_PARAM_NAMES};
pub use gru::{gru_backward, gru_forward, GruCache, GruParams, GRU_PARAM_NAMES};
pub use pool::{maxpool_time_backward, maxpool_time_forward, MaxPoolCache};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Gradients produced by one backward call.
#[derive(Debug, Clone)]
pub struct LayerGradients {
    /// One tensor per parameter, in the layer's parameter order.
    pub params: Vec<Tensor>,
    /// Gradient with respect to the layer input.
    pub input: Tensor,
    /// Gradient with respect to a recurrent initial state, when there is one.
    pub initial_state: Option<Tensor>,
}

/// `(B, T, C)` of a sequence tensor.
pub fn seq_dims(x: &Tensor) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [b, t, c] if t >= 1 => Ok((b, t, c)),
        _ => Err(Error::invalid(format!(
            "expected a B x T x C sequence with T >= 1, got shape {:?}",
            x.shape()
        ))),
    }
}

/// Fills `w` with Glorot-uniform draws, `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(w: &mut Tensor, fan_in: usize, fan_out: usize, rng: &mut RngStream) {
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    for v in w.data_mut() {
        *v = rng.uniform_range(-limit, limit);
    }
}
