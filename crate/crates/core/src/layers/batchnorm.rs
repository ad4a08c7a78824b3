//! Per-channel batch normalization over the batch and time axes.

use serde::{Deserialize, Serialize};

use super::{seq_dims, LayerGradients, Mode};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub momentum: f64,
    pub epsilon: f64,
}

pub const BN_PARAM_NAMES: [&str; 2] = ["gamma", "beta"];

impl BatchNormParams {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], 1.0),
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Folds a train-mode batch's statistics into the running estimates
    /// (unbiased variance). Eval-mode caches are ignored.
    pub fn update_running_stats(&mut self, cache: &BatchNormCache) {
        if cache.mode != Mode::Train {
            return;
        }
        let unbias = cache.count as f64 / (cache.count - 1) as f64;
        let mom = self.momentum;
        for (rm, m) in self.running_mean.data_mut().iter_mut().zip(&cache.batch_mean) {
            *rm = (1.0 - mom) * *rm + mom * m;
        }
        for (rv, v) in self.running_var.data_mut().iter_mut().zip(&cache.batch_var) {
            *rv = (1.0 - mom) * *rv + mom * v * unbias;
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    normalized: Tensor,
    inv_std: Vec<f64>,
    mode: Mode,
    count: usize,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

/// Normalizes each channel of `x` (`B x T x C`).
///
/// In [`Mode::Train`] batch statistics are used and the running statistics
/// are updated in place; [`Mode::Eval`] uses the running statistics.
pub fn batchnorm_forward(
    p: &mut BatchNormParams,
    x: &Tensor,
    mode: Mode,
) -> Result<(Tensor, BatchNormCache)> {
    let (out, cache) = batchnorm_apply(p, x, mode)?;
    if mode == Mode::Train {
        p.update_running_stats(&cache);
    }
    Ok((out, cache))
}

/// [`batchnorm_forward`] without the running-statistics update; the batch
/// statistics stay in the cache for [`BatchNormParams::update_running_stats`].
pub fn batchnorm_apply(
    p: &BatchNormParams,
    x: &Tensor,
    mode: Mode,
) -> Result<(Tensor, BatchNormCache)> {
    let (bsz, steps, c) = seq_dims(x)?;
    if c != p.channels() {
        return Err(Error::shape("batchnorm_forward", &[bsz, steps, p.channels()], x.shape()));
    }
    let count = bsz * steps;
    let xd = x.data();
    let (mean, var) = match mode {
        Mode::Train => {
            if count < 2 {
                return Err(Error::invalid(format!(
                    "batch norm in train mode needs B*T >= 2, got {count}"
                )));
            }
            let mut mean = vec![0.0; c];
            for row in xd.chunks_exact(c) {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= count as f64);
            let mut var = vec![0.0; c];
            for row in xd.chunks_exact(c) {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s /= count as f64);
            (mean, var)
        }
        Mode::Eval => (p.running_mean.data().to_vec(), p.running_var.data().to_vec()),
    };

    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + p.epsilon).sqrt()).collect();
    let mut normalized = Tensor::zeros(x.shape());
    let mut out = Tensor::zeros(x.shape());
    let (g, bta) = (p.gamma.data(), p.beta.data());
    for ((nrow, orow), xrow) in normalized
        .data_mut()
        .chunks_exact_mut(c)
        .zip(out.data_mut().chunks_exact_mut(c))
        .zip(xd.chunks_exact(c))
    {
        for j in 0..c {
            let xn = (xrow[j] - mean[j]) * inv_std[j];
            nrow[j] = xn;
            orow[j] = g[j] * xn + bta[j];
        }
    }
    Ok((
        out,
        BatchNormCache {
            normalized,
            inv_std,
            mode,
            count,
            batch_mean: mean,
            batch_var: var,
        },
    ))
}

pub fn batchnorm_backward(
    p: &BatchNormParams,
    cache: &BatchNormCache,
    upstream: &Tensor,
) -> Result<LayerGradients> {
    upstream.expect_shape("batchnorm_backward upstream", cache.normalized.shape())?;
    let c = p.channels();
    let count = upstream.len() / c;
    let mut dgamma = vec![0.0; c];
    let mut dbeta = vec![0.0; c];
    for (urow, nrow) in upstream
        .data()
        .chunks_exact(c)
        .zip(cache.normalized.data().chunks_exact(c))
    {
        for j in 0..c {
            dbeta[j] += urow[j];
            dgamma[j] += urow[j] * nrow[j];
        }
    }
    let g = p.gamma.data();
    let mut dx = Tensor::zeros(upstream.shape());
    for ((drow, urow), nrow) in dx
        .data_mut()
        .chunks_exact_mut(c)
        .zip(upstream.data().chunks_exact(c))
        .zip(cache.normalized.data().chunks_exact(c))
    {
        for j in 0..c {
            drow[j] = match cache.mode {
                Mode::Train => {
                    g[j] * cache.inv_std[j] / count as f64
                        * (count as f64 * urow[j] - dbeta[j] - nrow[j] * dgamma[j])
                }
                Mode::Eval => g[j] * cache.inv_std[j] * urow[j],
            };
        }
    }
    Ok(LayerGradients {
        params: vec![Tensor::vector(dgamma), Tensor::vector(dbeta)],
        input: dx,
        initial_state: None,
    })
}
