//! Minibatch training with per-layer optimizer variants and L2 clipping.

use serde::{Deserialize, Serialize};

use super::network::{Network, Topology};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::metrics::BCE_CLAMP;
use crate::numerics::{RngStream, Tensor};
use crate::optim::{clip_gradients_l2, OptimConfig, OptimizerState, Variant};
use crate::pipeline::TrainingSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optim: OptimConfig,
    pub clip_threshold: f64,
    pub minibatch: usize,
    /// `None` resolves per topology (150 GRU-family, 100 TCN-family).
    pub epochs: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optim: OptimConfig::default(),
            clip_threshold: 1.0,
            minibatch: 30,
            epochs: None,
        }
    }
}

impl TrainConfig {
    pub fn epochs_for(&self, topology: Topology) -> usize {
        self.epochs.unwrap_or_else(|| topology.default_epochs())
    }

    pub fn validate(&self) -> Result<()> {
        self.optim.validate()?;
        if !(self.clip_threshold > 0.0) {
            return Err(Error::Config {
                field: "clip_threshold",
                msg: format!("must be > 0, got {}", self.clip_threshold),
            });
        }
        if self.minibatch == 0 {
            return Err(Error::Config {
                field: "minibatch",
                msg: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// How optimizer variants are chosen for a network's layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerPolicy {
    /// Every layer uses the same variant.
    Fixed(Variant),
    /// Each trainable layer draws uniformly from DGrad, Cos#1, Exp and Sto.
    Stochastic,
}

/// One uniform draw from [`Variant::STOCHASTIC_POOL`] per trainable layer.
pub fn assign_optimizers_stochastic(net: &Network, rng: &mut RngStream) -> Vec<Variant> {
    (0..net.n_trainable_layers())
        .map(|_| Variant::STOCHASTIC_POOL[rng.below(Variant::STOCHASTIC_POOL.len())])
        .collect()
}

pub fn assign_optimizers(net: &Network, policy: OptimizerPolicy, rng: &mut RngStream) -> Vec<Variant> {
    match policy {
        OptimizerPolicy::Fixed(v) => vec![v; net.n_trainable_layers()],
        OptimizerPolicy::Stochastic => assign_optimizers_stochastic(net, rng),
    }
}

/// One optimizer state per parameter tensor, following the layer tags.
pub fn build_optimizer_states(
    net: &Network,
    tags: &[Variant],
    cfg: &OptimConfig,
    rng: &RngStream,
) -> Result<Vec<OptimizerState>> {
    if tags.len() != net.n_trainable_layers() {
        return Err(Error::invalid(format!(
            "{} optimizer tags for {} trainable layers",
            tags.len(),
            net.n_trainable_layers()
        )));
    }
    let mut states = Vec::new();
    let mut pidx = 0u64;
    for (layer, &variant) in net.trainable_layers().zip(tags) {
        for p in layer.params() {
            let stream = rng.child(pidx);
            states.push(OptimizerState::new(variant, p.shape(), *cfg, Some(stream))?);
            pidx += 1;
        }
    }
    Ok(states)
}

/// Splits a permutation into minibatches; a trailing single-sample batch is
/// merged into its predecessor so batch statistics stay defined.
fn minibatches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut batches: Vec<&[usize]> = order.chunks(size).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        batches.pop();
        let start = (batches.len() - 1) * size;
        let last = batches.len() - 1;
        batches[last] = &order[start..];
    }
    batches
}

/// Trains `net` in place and returns the mean training loss of every epoch.
///
/// Each minibatch runs forward, sample-weighted cross-entropy, backward,
/// global L2 clipping and one optimizer step per parameter tensor.
pub fn train_network(
    net: &mut Network,
    data: &TrainingSet,
    tags: &[Variant],
    cfg: &TrainConfig,
    epochs: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.y.cols() != net.spec.n_labels {
        return Err(Error::shape("train_network labels", &[net.spec.n_labels], &[data.y.cols()]));
    }
    let opt_rng = rng.child(u64::MAX);
    let mut states = build_optimizer_states(net, tags, &cfg.optim, &opt_rng)?;
    let inputs = net.encode(&data.x)?;
    let (_, steps, channels) = (inputs.shape()[0], inputs.shape()[1], inputs.shape()[2]);
    let n = data.len();
    let mut trace = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let order = rng.permutation(n);
        let mut loss_sum = 0.0;
        let mut weight_sum = 0.0;
        for (bidx, batch) in minibatches(&order, cfg.minibatch).into_iter().enumerate() {
            let bsz = batch.len();
            let mut xb = Vec::with_capacity(bsz * steps * channels);
            for &i in batch {
                xb.extend_from_slice(&inputs.data()[i * steps * channels..(i + 1) * steps * channels]);
            }
            let xb = Tensor::new(vec![bsz, steps, channels], xb)?;
            let yb = data.y.select_rows(batch);
            let wb: Vec<f64> = batch.iter().map(|&i| data.weights[i]).collect();

            let (p, caches) = net.forward(&xb, Mode::Train, rng)?;
            let (loss, grad) = weighted_bce(&yb, &p, &wb);
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: bidx,
                    loss,
                });
            }
            loss_sum += loss * bsz as f64;
            weight_sum += bsz as f64;

            let (mut grads, _) = net.backward(&caches, &grad)?;
            clip_gradients_l2(&mut grads, cfg.clip_threshold)?;
            for ((param, g), state) in net.params_mut().into_iter().zip(&grads).zip(&mut states) {
                state.step(param, g)?;
            }
        }
        trace.push(loss_sum / weight_sum.max(1.0));
    }
    Ok(trace)
}

/// Batch loss `(1/B) sum_i w_i sum_j bce(y_ij, p_ij)` and its gradient in `p`.
fn weighted_bce(y: &Tensor, p: &Tensor, w: &[f64]) -> (f64, Tensor) {
    let (m, l) = (y.rows(), y.cols());
    let mut grad = Tensor::zeros(&[m, l]);
    let mut loss = 0.0;
    for i in 0..m {
        for j in 0..l {
            let t = y.get2(i, j);
            let q = p.get2(i, j).clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            loss -= w[i] * (t * q.ln() + (1.0 - t) * (1.0 - q).ln());
            grad.set2(i, j, -w[i] * (t / q - (1.0 - t) / (1.0 - q)) / m as f64);
        }
    }
    (loss / m as f64, grad)
}
