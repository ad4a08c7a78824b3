//! Fully connected layer, applied per time step on sequences.

use serde::{Deserialize, Serialize};

use super::{glorot_uniform, LayerGradients};
use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    /// `O x I`
    pub weights: Tensor,
    /// `O`
    pub bias: Tensor,
}

pub const DENSE_PARAM_NAMES: [&str; 2] = ["weights", "bias"];

impl DenseParams {
    pub fn init(inputs: usize, outputs: usize, rng: &mut RngStream) -> Self {
        let mut weights = Tensor::zeros(&[outputs, inputs]);
        glorot_uniform(&mut weights, inputs, outputs, rng);
        Self {
            weights,
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    x: Tensor,
}

/// `y = W x + b` along the last axis of `x`; leading axes are batch/time.
pub fn dense_forward(p: &DenseParams, x: &Tensor) -> Result<(Tensor, DenseCache)> {
    let (o, i) = (p.outputs(), p.inputs());
    p.bias.expect_shape("dense bias", &[o])?;
    let last = *x.shape().last().unwrap_or(&0);
    if last != i {
        return Err(Error::shape("dense_forward", &[i], &[last]));
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = o;
    let mut out = Tensor::zeros(&shape);
    let w = p.weights.data();
    for (dst, src) in out.data_mut().chunks_exact_mut(o).zip(x.data().chunks_exact(i)) {
        for (r, y) in dst.iter_mut().enumerate() {
            let row = &w[r * i..(r + 1) * i];
            *y = p.bias.data()[r] + row.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok((out, DenseCache { x: x.clone() }))
}

pub fn dense_backward(p: &DenseParams, cache: &DenseCache, upstream: &Tensor) -> Result<LayerGradients> {
    let (o, i) = (p.outputs(), p.inputs());
    let mut shape = cache.x.shape().to_vec();
    *shape.last_mut().unwrap() = o;
    upstream.expect_shape("dense_backward upstream", &shape)?;
    let mut dw = Tensor::zeros(&[o, i]);
    let mut db = Tensor::zeros(&[o]);
    let mut dx = Tensor::zeros(cache.x.shape());
    let w = p.weights.data();
    for ((g, src), dsrc) in upstream
        .data()
        .chunks_exact(o)
        .zip(cache.x.data().chunks_exact(i))
        .zip(dx.data_mut().chunks_exact_mut(i))
    {
        for (r, &gv) in g.iter().enumerate() {
            if gv == 0.0 {
                continue;
            }
            db.data_mut()[r] += gv;
            let dwr = &mut dw.data_mut()[r * i..(r + 1) * i];
            let wr = &w[r * i..(r + 1) * i];
            for k in 0..i {
                dwr[k] += gv * src[k];
                dsrc[k] += gv * wr[k];
            }
        }
    }
    Ok(LayerGradients {
        params: vec![dw, db],
        input: dx,
        initial_state: None,
    })
}
