//! Train/test partitions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits `0..n` into `k` disjoint test folds whose sizes differ by at most
/// one; the first `n % k` folds take the extra sample. Each fold's train set
/// is the complement of its test set, both sorted ascending.
///
/// With `labels`, samples are grouped by label set and dealt round-robin so
/// every label combination spreads evenly over the folds.
pub fn kfold_split(n: usize, k: usize, labels: Option<&Tensor>, rng: &mut RngStream) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::invalid(format!("k-fold needs k <= n, got k={k}, n={n}")));
    }
    let mut fold_of = vec![0usize; n];
    match labels {
        None => {
            let order = rng.permutation(n);
            let (q, r) = (n / k, n % k);
            let mut pos = 0;
            for f in 0..k {
                let size = q + usize::from(f < r);
                for &i in &order[pos..pos + size] {
                    fold_of[i] = f;
                }
                pos += size;
            }
        }
        Some(y) => {
            if y.rows() != n {
                return Err(Error::shape("kfold_split labels", &[n, y.cols()], y.shape()));
            }
            let mut groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
            for i in 0..n {
                groups.entry(y.row(i).iter().map(|&v| v > 0.5).collect()).or_default().push(i);
            }
            let mut order = Vec::with_capacity(n);
            for members in groups.values_mut() {
                rng.shuffle(members);
                order.extend_from_slice(members);
            }
            for (pos, &i) in order.iter().enumerate() {
                fold_of[i] = pos % k;
            }
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train) = (0..n).partition(|&i| fold_of[i] == f);
            Fold { train, test }
        })
        .collect())
}

/// One random split holding out `round(fraction * n)` samples, clamped so
/// both sides are non-empty.
pub fn holdout_split(n: usize, fraction: f64, rng: &mut RngStream) -> Result<Fold> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("holdout fraction must lie in (0, 1), got {fraction}")));
    }
    if n < 2 {
        return Err(Error::invalid("holdout needs at least two samples"));
    }
    let m = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let order = rng.permutation(n);
    let mut test = order[..m].to_vec();
    let mut train = order[m..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Fold { train, test })
}

/// Reads 0-based sample indices separated by whitespace or commas.
pub fn load_indices(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(tok.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: format!("`{tok}` is not a sample index"),
            })?);
        }
    }
    Ok(out)
}

/// A predefined split; indices must be in range, unique, and disjoint.
pub fn explicit_split(n: usize, train: Vec<usize>, test: Vec<usize>) -> Result<Fold> {
    let mut seen = vec![false; n];
    for &i in train.iter().chain(&test) {
        if i >= n {
            return Err(Error::invalid(format!("sample index {i} out of range for n={n}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid(format!("sample index {i} listed twice")));
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("train and test index sets must be non-empty"));
    }
    Ok(Fold { train, test })
}
