//! Gated recurrent unit: forward pass and full backpropagation through time.

use serde::{Deserialize, Serialize};

use super::{glorot_uniform, seq_dims, LayerGradients};
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, RngStream, Tensor};

/// GRU weights for `N` hidden units over `D` input channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub wz: Tensor,
    pub wr: Tensor,
    pub wh: Tensor,
    pub uz: Tensor,
    pub ur: Tensor,
    pub uh: Tensor,
    pub bz: Tensor,
    pub br: Tensor,
    pub bh: Tensor,
}

pub const GRU_PARAM_NAMES: [&str; 9] = ["wz", "wr", "wh", "uz", "ur", "uh", "bz", "br", "bh"];

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = Tensor::zeros(&[hidden, input]);
        let u = Tensor::zeros(&[hidden, hidden]);
        let b = Tensor::zeros(&[hidden]);
        Self {
            wz: w.clone(),
            wr: w.clone(),
            wh: w,
            uz: u.clone(),
            ur: u.clone(),
            uh: u,
            bz: b.clone(),
            br: b.clone(),
            bh: b,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(input: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let mut p = Self::zeros(input, hidden);
        for w in [&mut p.wz, &mut p.wr, &mut p.wh] {
            glorot_uniform(w, input, hidden, rng);
        }
        for u in [&mut p.uz, &mut p.ur, &mut p.uh] {
            glorot_uniform(u, hidden, hidden, rng);
        }
        p
    }

    pub fn hidden(&self) -> usize {
        self.wz.shape()[0]
    }

    pub fn input(&self) -> usize {
        self.wz.shape()[1]
    }

    pub fn tensors(&self) -> [&Tensor; 9] {
        [
            &self.wz, &self.wr, &self.wh, &self.uz, &self.ur, &self.uh, &self.bz, &self.br,
            &self.bh,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 9] {
        [
            &mut self.wz,
            &mut self.wr,
            &mut self.wh,
            &mut self.uz,
            &mut self.ur,
            &mut self.uh,
            &mut self.bz,
            &mut self.br,
            &mut self.bh,
        ]
    }

    fn validate(&self) -> Result<()> {
        let (n, d) = (self.hidden(), self.input());
        for w in [&self.wz, &self.wr, &self.wh] {
            w.expect_shape("gru W", &[n, d])?;
        }
        for u in [&self.uz, &self.ur, &self.uh] {
            u.expect_shape("gru U", &[n, n])?;
        }
        for b in [&self.bz, &self.br, &self.bh] {
            b.expect_shape("gru b", &[n])?;
        }
        Ok(())
    }
}

/// Intermediates saved by [`gru_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    x: Tensor,
    /// Hidden states `h_0..h_T`, laid out `B x (T+1) x N`.
    h: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    candidate: Vec<f64>,
    batch: usize,
    steps: usize,
    hidden: usize,
}

/// `out[i] = bias[i] + W[i,:] . a + U[i,:] . b`
fn affine2(out: &mut [f64], w: &[f64], a: &[f64], u: &[f64], b: &[f64], bias: &[f64]) {
    let (d, n) = (a.len(), b.len());
    for (i, o) in out.iter_mut().enumerate() {
        let wr = &w[i * d..(i + 1) * d];
        let ur = &u[i * n..(i + 1) * n];
        let mut s = bias[i];
        for (x, y) in wr.iter().zip(a) {
            s += x * y;
        }
        for (x, y) in ur.iter().zip(b) {
            s += x * y;
        }
        *o = s;
    }
}

/// Runs the GRU over every time step of `x` (`B x T x D`).
///
/// `h0` defaults to zeros. Returns all hidden states `h_1..h_T` as a
/// `B x T x N` sequence.
pub fn gru_forward(p: &GruParams, x: &Tensor, h0: Option<&Tensor>) -> Result<(Tensor, GruCache)> {
    p.validate()?;
    let (bsz, steps, d) = seq_dims(x)?;
    let n = p.hidden();
    if d != p.input() {
        return Err(Error::shape("gru_forward", &[bsz, steps, p.input()], x.shape()));
    }
    if let Some(h0) = h0 {
        h0.expect_shape("gru_forward h0", &[bsz, n])?;
    }

    let mut h = vec![0.0; bsz * (steps + 1) * n];
    let mut z = vec![0.0; bsz * steps * n];
    let mut r = vec![0.0; bsz * steps * n];
    let mut cand = vec![0.0; bsz * steps * n];
    let mut rh = vec![0.0; n];
    let xd = x.data();

    for b in 0..bsz {
        let hb = &mut h[b * (steps + 1) * n..(b + 1) * (steps + 1) * n];
        if let Some(h0) = h0 {
            hb[..n].copy_from_slice(h0.row(b));
        }
        for t in 0..steps {
            let xt = &xd[(b * steps + t) * d..(b * steps + t + 1) * d];
            let o = (b * steps + t) * n;
            let (prev_part, next_part) = hb.split_at_mut((t + 1) * n);
            let hprev = &prev_part[t * n..];
            let zt = &mut z[o..o + n];
            affine2(zt, p.wz.data(), xt, p.uz.data(), hprev, p.bz.data());
            zt.iter_mut().for_each(|v| *v = sigmoid(*v));
            let rt = &mut r[o..o + n];
            affine2(rt, p.wr.data(), xt, p.ur.data(), hprev, p.br.data());
            rt.iter_mut().for_each(|v| *v = sigmoid(*v));
            for i in 0..n {
                rh[i] = rt[i] * hprev[i];
            }
            let ct = &mut cand[o..o + n];
            affine2(ct, p.wh.data(), xt, p.uh.data(), &rh, p.bh.data());
            ct.iter_mut().for_each(|v| *v = v.tanh());
            let hnext = &mut next_part[..n];
            for i in 0..n {
                hnext[i] = (1.0 - zt[i]) * hprev[i] + zt[i] * ct[i];
            }
        }
    }

    let mut out = Vec::with_capacity(bsz * steps * n);
    for b in 0..bsz {
        out.extend_from_slice(&h[(b * (steps + 1) + 1) * n..(b + 1) * (steps + 1) * n]);
    }
    let out = Tensor::new(vec![bsz, steps, n], out)?;
    out.ensure_finite("gru_forward output")?;
    Ok((
        out,
        GruCache {
            x: x.clone(),
            h,
            z,
            r,
            candidate: cand,
            batch: bsz,
            steps,
            hidden: n,
        },
    ))
}

/// Reverse-mode gradients of the GRU map.
///
/// `upstream` is the gradient of the loss with respect to every output
/// state (`B x T x N`). The returned parameter gradients follow
/// [`GRU_PARAM_NAMES`] order; `initial_state` holds the gradient for `h0`.
pub fn gru_backward(p: &GruParams, cache: &GruCache, upstream: &Tensor) -> Result<LayerGradients> {
    let (bsz, steps, n) = (cache.batch, cache.steps, cache.hidden);
    upstream.expect_shape("gru_backward upstream", &[bsz, steps, n])?;
    let d = p.input();
    let mut g = GruParams::zeros(d, n);
    let mut dx = Tensor::zeros(cache.x.shape());
    let mut dh0 = Tensor::zeros(&[bsz, n]);

    let (wz, wr, wh) = (p.wz.data(), p.wr.data(), p.wh.data());
    let (uz, ur, uh) = (p.uz.data(), p.ur.data(), p.uh.data());
    let xd = cache.x.data();
    let up = upstream.data();

    let mut dh_next = vec![0.0; n];
    let mut dh = vec![0.0; n];
    let mut da_z = vec![0.0; n];
    let mut da_r = vec![0.0; n];
    let mut da_h = vec![0.0; n];
    let mut rh = vec![0.0; n];
    let mut drh = vec![0.0; n];
    let mut dh_prev = vec![0.0; n];

    for b in 0..bsz {
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        let hb = &cache.h[b * (steps + 1) * n..(b + 1) * (steps + 1) * n];
        for t in (0..steps).rev() {
            let o = (b * steps + t) * n;
            let hprev = &hb[t * n..(t + 1) * n];
            let zt = &cache.z[o..o + n];
            let rt = &cache.r[o..o + n];
            let ct = &cache.candidate[o..o + n];
            let xt = &xd[(b * steps + t) * d..(b * steps + t + 1) * d];

            for i in 0..n {
                dh[i] = up[o + i] + dh_next[i];
                dh_prev[i] = dh[i] * (1.0 - zt[i]);
                let dz = dh[i] * (ct[i] - hprev[i]);
                let dc = dh[i] * zt[i];
                da_h[i] = dc * (1.0 - ct[i] * ct[i]);
                da_z[i] = dz * zt[i] * (1.0 - zt[i]);
                rh[i] = rt[i] * hprev[i];
            }

            // Candidate path: U_h^T da_h flows into (r * h_prev).
            drh.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..n {
                let a = da_h[i];
                if a == 0.0 {
                    continue;
                }
                let row = &uh[i * n..(i + 1) * n];
                for j in 0..n {
                    drh[j] += row[j] * a;
                }
            }
            for j in 0..n {
                let dr = drh[j] * hprev[j];
                dh_prev[j] += drh[j] * rt[j];
                da_r[j] = dr * rt[j] * (1.0 - rt[j]);
            }

            accumulate(&mut g.wz, &mut g.uz, &mut g.bz, &da_z, xt, hprev);
            accumulate(&mut g.wr, &mut g.ur, &mut g.br, &da_r, xt, hprev);
            accumulate(&mut g.wh, &mut g.uh, &mut g.bh, &da_h, xt, &rh);

            let dxt = &mut dx.data_mut()[(b * steps + t) * d..(b * steps + t + 1) * d];
            for i in 0..n {
                let (az, ar, ah) = (da_z[i], da_r[i], da_h[i]);
                let (rz, rr) = (&uz[i * n..(i + 1) * n], &ur[i * n..(i + 1) * n]);
                for j in 0..n {
                    dh_prev[j] += rz[j] * az + rr[j] * ar;
                }
                let (wzr, wrr, whr) = (
                    &wz[i * d..(i + 1) * d],
                    &wr[i * d..(i + 1) * d],
                    &wh[i * d..(i + 1) * d],
                );
                for k in 0..d {
                    dxt[k] += wzr[k] * az + wrr[k] * ar + whr[k] * ah;
                }
            }
            dh_next.copy_from_slice(&dh_prev);
        }
        dh0.row_mut(b).copy_from_slice(&dh_next);
    }

    Ok(LayerGradients {
        params: g.tensors().into_iter().cloned().collect(),
        input: dx,
        initial_state: Some(dh0),
    })
}

fn accumulate(w: &mut Tensor, u: &mut Tensor, bias: &mut Tensor, da: &[f64], x: &[f64], h: &[f64]) {
    let (d, n) = (x.len(), h.len());
    let (wd, ud, bd) = (w.data_mut(), u.data_mut(), bias.data_mut());
    for (i, &a) in da.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        bd[i] += a;
        for (dst, xv) in wd[i * d..(i + 1) * d].iter_mut().zip(x) {
            *dst += a * xv;
        }
        for (dst, hv) in ud[i * n..(i + 1) * n].iter_mut().zip(h) {
            *dst += a * hv;
        }
    }
}
