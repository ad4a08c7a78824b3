//! Dilated 1-D convolution over time with symmetric "same" padding.

use serde::{Deserialize, Serialize};

use super::{glorot_uniform, seq_dims, LayerGradients};
use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvParams {
    /// `F x Cin x K`
    pub kernels: Tensor,
    /// `F`
    pub bias: Tensor,
    pub dilation: usize,
}

pub const CONV_PARAM_NAMES: [&str; 2] = ["kernels", "bias"];

impl ConvParams {
    pub fn new(kernels: Tensor, bias: Tensor, dilation: usize) -> Result<Self> {
        let p = Self {
            kernels,
            bias,
            dilation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn init(
        in_channels: usize,
        filters: usize,
        width: usize,
        dilation: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut kernels = Tensor::zeros(&[filters, in_channels, width]);
        glorot_uniform(&mut kernels, in_channels * width, filters * width, rng);
        Self::new(kernels, Tensor::zeros(&[filters]), dilation)
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.kernels.shape()[2]
    }

    fn validate(&self) -> Result<()> {
        if self.kernels.ndim() != 3 {
            return Err(Error::invalid("conv kernels must be F x Cin x K"));
        }
        if self.width().is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "same padding needs an odd kernel width, got {}",
                self.width()
            )));
        }
        if self.dilation == 0 {
            return Err(Error::invalid("dilation must be >= 1"));
        }
        self.bias.expect_shape("conv bias", &[self.filters()])
    }
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    x: Tensor,
}

/// Input time index read by tap `k` at output step `t`, if inside `[0, T)`.
#[inline]
fn tap(t: usize, k: usize, half: usize, dilation: usize, steps: usize) -> Option<usize> {
    let pos = t as isize + (dilation as isize) * (k as isize - half as isize);
    (pos >= 0 && (pos as usize) < steps).then_some(pos as usize)
}

/// `y[b,t,f] = bias[f] + sum_{c,k} kernels[f,c,k] * x[b, t + dilation*(k - (K-1)/2), c]`
pub fn conv1d_forward(p: &ConvParams, x: &Tensor) -> Result<(Tensor, ConvCache)> {
    p.validate()?;
    let (bsz, steps, cin) = seq_dims(x)?;
    if cin != p.in_channels() {
        return Err(Error::shape("conv1d_forward", &[bsz, steps, p.in_channels()], x.shape()));
    }
    let (f, kw) = (p.filters(), p.width());
    let half = (kw - 1) / 2;
    let kd = p.kernels.data();
    let xd = x.data();
    let mut out = Tensor::zeros(&[bsz, steps, f]);
    let od = out.data_mut();
    for b in 0..bsz {
        for t in 0..steps {
            let dst = &mut od[(b * steps + t) * f..(b * steps + t + 1) * f];
            dst.copy_from_slice(p.bias.data());
            for k in 0..kw {
                let Some(src_t) = tap(t, k, half, p.dilation, steps) else {
                    continue;
                };
                let xs = &xd[(b * steps + src_t) * cin..(b * steps + src_t + 1) * cin];
                for (fi, o) in dst.iter_mut().enumerate() {
                    let krow = &kd[fi * cin * kw..(fi + 1) * cin * kw];
                    let mut s = 0.0;
                    for c in 0..cin {
                        s += krow[c * kw + k] * xs[c];
                    }
                    *o += s;
                }
            }
        }
    }
    Ok((out, ConvCache { x: x.clone() }))
}

pub fn conv1d_backward(p: &ConvParams, cache: &ConvCache, upstream: &Tensor) -> Result<LayerGradients> {
    let (bsz, steps, cin) = seq_dims(&cache.x)?;
    let (f, kw) = (p.filters(), p.width());
    upstream.expect_shape("conv1d_backward upstream", &[bsz, steps, f])?;
    let half = (kw - 1) / 2;
    let kd = p.kernels.data();
    let xd = cache.x.data();
    let ud = upstream.data();

    let mut dk = Tensor::zeros(p.kernels.shape());
    let mut db = Tensor::zeros(&[f]);
    let mut dx = Tensor::zeros(cache.x.shape());
    {
        let (dkd, dbd, dxd) = (dk.data_mut(), db.data_mut(), dx.data_mut());
        for b in 0..bsz {
            for t in 0..steps {
                let g = &ud[(b * steps + t) * f..(b * steps + t + 1) * f];
                for (acc, gv) in dbd.iter_mut().zip(g) {
                    *acc += gv;
                }
                for k in 0..kw {
                    let Some(src_t) = tap(t, k, half, p.dilation, steps) else {
                        continue;
                    };
                    let base = (b * steps + src_t) * cin;
                    for (fi, &gv) in g.iter().enumerate() {
                        if gv == 0.0 {
                            continue;
                        }
                        let off = fi * cin * kw;
                        for c in 0..cin {
                            dkd[off + c * kw + k] += gv * xd[base + c];
                            dxd[base + c] += gv * kd[off + c * kw + k];
                        }
                    }
                }
            }
        }
    }
    Ok(LayerGradients {
        params: vec![dk, db],
        input: dx,
        initial_state: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_conv(kernel: [f64; 3], dilation: usize, x: &[f64]) -> Vec<f64> {
        let p = ConvParams::new(
            Tensor::new(vec![1, 1, 3], kernel.to_vec()).unwrap(),
            Tensor::zeros(&[1]),
            dilation,
        )
        .unwrap();
        let xt = Tensor::new(vec![1, x.len(), 1], x.to_vec()).unwrap();
        conv1d_forward(&p, &xt).unwrap().0.into_data()
    }

    #[test]
    fn identity_kernel() {
        let x = [1.5, -2.0, 3.0, 0.25];
        assert_eq!(scalar_conv([0.0, 1.0, 0.0], 1, &x), x.to_vec());
        assert_eq!(scalar_conv([0.0, 1.0, 0.0], 3, &x), x.to_vec());
    }

    #[test]
    fn box_kernel_with_zero_padding() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(scalar_conv([1.0, 1.0, 1.0], 1, &x), vec![3.0, 6.0, 9.0, 7.0]);
        assert_eq!(scalar_conv([1.0, 1.0, 1.0], 2, &x), vec![4.0, 6.0, 4.0, 6.0]);
    }

    #[test]
    fn same_padding_preserves_length() {
        let mut rng = RngStream::from_seed(2);
        for dil in [1, 2, 4, 8, 16] {
            let p = ConvParams::init(2, 3, 3, dil, &mut rng).unwrap();
            let (y, _) = conv1d_forward(&p, &Tensor::filled(&[2, 5, 2], 1.0)).unwrap();
            assert_eq!(y.shape(), &[2, 5, 3]);
        }
    }

    #[test]
    fn even_width_and_channel_mismatch_fail() {
        assert!(ConvParams::new(Tensor::zeros(&[1, 1, 2]), Tensor::zeros(&[1]), 1).is_err());
        let p = ConvParams::new(Tensor::zeros(&[1, 2, 3]), Tensor::zeros(&[1]), 1).unwrap();
        assert!(conv1d_forward(&p, &Tensor::zeros(&[1, 4, 3])).is_err());
    }

    #[test]
    fn zero_upstream_zero_gradients() {
        let mut rng = RngStream::from_seed(2);
        let p = ConvParams::init(2, 3, 3, 2, &mut rng).unwrap();
        let x = Tensor::filled(&[1, 4, 2], 0.7);
        let (y, cache) = conv1d_forward(&p, &x).unwrap();
        let g = conv1d_backward(&p, &cache, &Tensor::zeros(y.shape())).unwrap();
        assert!(g.params.iter().chain([&g.input]).all(|t| t.sum_squares() == 0.0));
    }
}
