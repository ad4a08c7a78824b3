//! Principal component analysis via eigendecomposition of the sample
//! covariance matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// A fitted PCA projection.
///
/// `components` holds `k` orthonormal rows sorted by descending explained
/// variance. A model with `k == 0` comes from zero-variance input; callers
/// treat it as a pass-through (see [`PcaModel::is_degenerate`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Tensor,
    pub components: Tensor,
    pub explained_variance_ratio: Tensor,
    /// Eigenvalues of the retained components (sample variance, divisor n-1).
    pub explained_variance: Tensor,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// True when the training data had no variance at all.
    pub fn is_degenerate(&self) -> bool {
        self.n_components() == 0
    }

    /// Projects `x` (n x d) onto the retained components.
    pub fn transform(&self, x: &Tensor) -> Result<Tensor> {
        pca_transform(self, x)
    }

    /// Maps scores (n x k) back into the input space.
    pub fn inverse_transform(&self, scores: &Tensor) -> Result<Tensor> {
        let k = self.n_components();
        if scores.ndim() != 2 || scores.cols() != k {
            return Err(Error::shape("pca_inverse", &[scores.shape()[0], k], scores.shape()));
        }
        let mut out = if k == 0 {
            Tensor::zeros(&[scores.rows(), self.input_dim()])
        } else {
            scores.matmul(&self.components)?
        };
        let mean = self.mean.data();
        for i in 0..out.rows() {
            for (v, m) in out.row_mut(i).iter_mut().zip(mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}

/// Fits PCA retaining the smallest number of components whose cumulative
/// explained-variance ratio reaches `retain`.
pub fn pca_fit(x: &Tensor, retain: f64) -> Result<PcaModel> {
    if x.ndim() != 2 {
        return Err(Error::invalid("pca_fit expects a 2-D tensor"));
    }
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::invalid(format!("pca_fit needs n >= 2 rows, got {n}")));
    }
    if !(retain > 0.0 && retain <= 1.0) {
        return Err(Error::invalid(format!("retain must lie in (0, 1], got {retain}")));
    }
    x.ensure_finite("pca_fit input")?;

    let mean = x.column_means();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for i in 0..n {
        for (c, (v, m)) in centered.iter_mut().zip(x.row(i).iter().zip(&mean)) {
            *c = v - m;
        }
        for a in 0..d {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..d {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let largest = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let tol = largest * 1e-12 * d.max(1) as f64;
    let ranked: Vec<(usize, f64)> = order
        .iter()
        .map(|&i| (i, eig.eigenvalues[i]))
        .filter(|&(_, v)| v > tol && v > 0.0)
        .collect();
    let total: f64 = ranked.iter().map(|&(_, v)| v).sum();

    let mut k = 0;
    if total > 0.0 {
        let mut cum = 0.0;
        for &(_, v) in &ranked {
            cum += v / total;
            k += 1;
            if cum >= retain - 1e-12 {
                break;
            }
        }
    }

    let mut components = Vec::with_capacity(k * d);
    let mut ratio = Vec::with_capacity(k);
    let mut variance = Vec::with_capacity(k);
    for &(idx, v) in ranked.iter().take(k) {
        let col = eig.eigenvectors.column(idx);
        // Sign convention: the largest-magnitude entry is positive.
        let pivot = col
            .iter()
            .copied()
            .fold(0.0_f64, |acc, c| if c.abs() > acc.abs() { c } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        components.extend(col.iter().map(|c| c * sign));
        ratio.push(v / total);
        variance.push(v);
    }

    Ok(PcaModel {
        mean: Tensor::vector(mean),
        components: Tensor::new(vec![k, d], components)?,
        explained_variance_ratio: Tensor::vector(ratio),
        explained_variance: Tensor::vector(variance),
    })
}

/// Projects `(x - mean)` onto the model's components.
pub fn pca_transform(model: &PcaModel, x: &Tensor) -> Result<Tensor> {
    let d = model.input_dim();
    if x.ndim() != 2 || x.cols() != d {
        return Err(Error::shape("pca_transform", &[x.shape()[0], d], x.shape()));
    }
    let k = model.n_components();
    let mut out = Tensor::zeros(&[x.rows(), k]);
    let mean = model.mean.data();
    let mut centered = vec![0.0; d];
    for i in 0..x.rows() {
        for (c, (v, m)) in centered.iter_mut().zip(x.row(i).iter().zip(mean)) {
            *c = v - m;
        }
        for j in 0..k {
            let comp = model.components.row(j);
            let s: f64 = comp.iter().zip(&centered).map(|(a, b)| a * b).sum();
            out.set2(i, j, s);
        }
    }
    Ok(out)
}
