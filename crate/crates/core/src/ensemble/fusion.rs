//! Score fusion rules.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Element-wise mean of the members' score matrices.
pub fn fuse_average(scores: &[Tensor]) -> Result<Tensor> {
    let first = scores
        .first()
        .ok_or_else(|| Error::invalid("fuse_average needs at least one score matrix"))?;
    let mut acc = Tensor::zeros(first.shape());
    for s in scores {
        acc.add_assign(s)?;
    }
    acc.scale_in_place(1.0 / scores.len() as f64);
    Ok(acc)
}

/// Maps sigmoid scores from `[0, 1]` to `[-1, 1]` via `(f - 0.5) * 2`; the
/// decision threshold moves from 0.5 to 0.
pub fn normalize_enn(f: &Tensor) -> Tensor {
    f.map(|v| (v - 0.5) * 2.0)
}

/// Decision threshold on [`normalize_enn`] output.
pub const NORMALIZED_THRESHOLD: f64 = 0.0;

/// Sum rule `enn + w * external`, where `enn` is already normalized.
pub fn fuse_weighted_external(enn: &Tensor, external: &Tensor, w: f64) -> Result<Tensor> {
    enn.zip_map(external, |a, b| a + w * b)
}

/// Threshold for fused scores: the image of the two component thresholds
/// (0 for normalized ENN, 0.5 for the external scores) under the sum rule.
pub fn fused_threshold(w: f64) -> f64 {
    NORMALIZED_THRESHOLD + w * 0.5
}
