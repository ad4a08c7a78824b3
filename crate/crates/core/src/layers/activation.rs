//! Element-wise activations and dropout.

use super::Mode;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid as sig, RngStream, Tensor};

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sig)
}

/// Backward through a sigmoid given its *output* `y`.
pub fn sigmoid_backward(y: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    y.zip_map(upstream, |s, g| g * s * (1.0 - s))
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Subgradient at zero is zero.
pub fn relu_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    x.zip_map(upstream, |v, g| if v > 0.0 { g } else { 0.0 })
}

/// Inverted dropout. Returns the output and the multiplicative mask
/// (`0` or `1/(1-p)` per element) used in train mode.
pub fn dropout(x: &Tensor, p: f64, rng: &mut RngStream, mode: Mode) -> Result<(Tensor, Option<Tensor>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("dropout probability must lie in [0, 1), got {p}")));
    }
    if mode == Mode::Eval || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let mut mask = Tensor::zeros(x.shape());
    for m in mask.data_mut() {
        *m = if rng.uniform() < p { 0.0 } else { keep };
    }
    let out = x.zip_map(&mask, |a, b| a * b)?;
    Ok((out, Some(mask)))
}

pub fn dropout_backward(mask: Option<&Tensor>, upstream: &Tensor) -> Result<Tensor> {
    match mask {
        Some(m) => upstream.zip_map(m, |g, k| g * k),
        None => Ok(upstream.clone()),
    }
}
