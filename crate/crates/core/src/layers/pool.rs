//! Max pooling along the time axis.

use super::seq_dims;
use crate::error::Result;
use crate::numerics::Tensor;

#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    /// Winning time index per `(b, c)`; the earliest maximum on ties.
    argmax: Vec<usize>,
    batch: usize,
    steps: usize,
    channels: usize,
}

impl MaxPoolCache {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Reduces `B x T x C` to `B x C` by taking the maximum over time.
pub fn maxpool_time_forward(x: &Tensor) -> Result<(Tensor, MaxPoolCache)> {
    let (bsz, steps, c) = seq_dims(x)?;
    let xd = x.data();
    let mut out = Tensor::zeros(&[bsz, c]);
    let mut argmax = vec![0usize; bsz * c];
    for b in 0..bsz {
        for j in 0..c {
            let mut best = (0, xd[b * steps * c + j]);
            for t in 1..steps {
                let v = xd[(b * steps + t) * c + j];
                if v > best.1 {
                    best = (t, v);
                }
            }
            argmax[b * c + j] = best.0;
            out.set2(b, j, best.1);
        }
    }
    Ok((
        out,
        MaxPoolCache {
            argmax,
            batch: bsz,
            steps,
            channels: c,
        },
    ))
}

/// Routes each pooled gradient back to its argmax position.
pub fn maxpool_time_backward(cache: &MaxPoolCache, upstream: &Tensor) -> Result<Tensor> {
    let (bsz, steps, c) = (cache.batch, cache.steps, cache.channels);
    upstream.expect_shape("maxpool_time_backward upstream", &[bsz, c])?;
    let mut dx = Tensor::zeros(&[bsz, steps, c]);
    let dd = dx.data_mut();
    for b in 0..bsz {
        for j in 0..c {
            let t = cache.argmax[b * c + j];
            dd[(b * steps + t) * c + j] += upstream.get2(b, j);
        }
    }
    Ok(dx)
}
