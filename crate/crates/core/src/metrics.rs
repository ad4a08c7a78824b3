//! Multilabel performance indicators and the binary cross-entropy loss.
//!
//! Tie conventions, fixed so results are reproducible:
//! - one-error: the lowest index wins an argmax tie;
//! - ranking loss: a tied (relevant, irrelevant) pair counts one half;
//! - coverage: a tied label takes the worst position among its ties;
//! - average precision: ties are ordered lowest index first.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Default decision threshold on sigmoid confidences.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Ground truth `y`, binary predictions `h` and confidences `f` for `m`
/// samples and `l` labels, each stored as an `m x l` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub y: Tensor,
    pub h: Tensor,
    pub f: Tensor,
}

impl PredictionSet {
    pub fn new(y: Tensor, h: Tensor, f: Tensor) -> Result<Self> {
        if y.ndim() != 2 || y.rows() == 0 || y.cols() == 0 {
            return Err(Error::invalid("prediction set needs m >= 1 and l >= 1"));
        }
        h.expect_shape("PredictionSet h", y.shape())?;
        f.expect_shape("PredictionSet f", y.shape())?;
        for (name, t) in [("y", &y), ("h", &h)] {
            if t.data().iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::invalid(format!("{name} must be binary")));
            }
        }
        f.ensure_finite("confidence matrix")?;
        Ok(Self { y, h, f })
    }

    /// Thresholds `f` (`f >= threshold` is positive) to obtain `h`.
    pub fn from_scores(y: Tensor, f: Tensor, threshold: f64) -> Result<Self> {
        let h = threshold_scores(&f, threshold);
        Self::new(y, h, f)
    }

    pub fn samples(&self) -> usize {
        self.y.rows()
    }

    pub fn labels(&self) -> usize {
        self.y.cols()
    }
}

pub fn threshold_scores(f: &Tensor, threshold: f64) -> Tensor {
    f.map(|v| if v >= threshold { 1.0 } else { 0.0 })
}

fn is_on(v: f64) -> bool {
    v != 0.0
}

/// Fraction of misclassified labels.
pub fn hamming_loss(ps: &PredictionSet) -> f64 {
    let wrong = ps
        .y
        .data()
        .iter()
        .zip(ps.h.data())
        .filter(|(a, b)| a != b)
        .count();
    wrong as f64 / ps.y.len() as f64
}

/// Fraction of samples whose top-scored label is not relevant.
pub fn one_error(ps: &PredictionSet) -> f64 {
    let m = ps.samples();
    let mut errors = 0;
    for i in 0..m {
        let f = ps.f.row(i);
        let mut best = 0;
        for j in 1..f.len() {
            if f[j] > f[best] {
                best = j;
            }
        }
        if !is_on(ps.y.get2(i, best)) {
            errors += 1;
        }
    }
    errors as f64 / m as f64
}

/// Average fraction of (relevant, irrelevant) label pairs ordered wrongly.
///
/// Samples with no relevant or no irrelevant label are skipped; if every
/// sample is skipped the metric is undefined.
pub fn ranking_loss(ps: &PredictionSet) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..ps.samples() {
        let (y, f) = (ps.y.row(i), ps.f.row(i));
        let rel: Vec<usize> = (0..y.len()).filter(|&j| is_on(y[j])).collect();
        let irr: Vec<usize> = (0..y.len()).filter(|&j| !is_on(y[j])).collect();
        if rel.is_empty() || irr.is_empty() {
            continue;
        }
        let mut bad = 0.0;
        for &j in &rel {
            for &k in &irr {
                if f[j] < f[k] {
                    bad += 1.0;
                } else if f[j] == f[k] {
                    bad += 0.5;
                }
            }
        }
        total += bad / (rel.len() * irr.len()) as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric("ranking_loss"));
    }
    Ok(total / counted as f64)
}

/// Average depth in the ranked label list needed to cover every relevant
/// label. Samples without relevant labels contribute 0.
pub fn coverage(ps: &PredictionSet) -> f64 {
    let m = ps.samples();
    let mut total = 0.0;
    for i in 0..m {
        let (y, f) = (ps.y.row(i), ps.f.row(i));
        let worst = (0..y.len())
            .filter(|&j| is_on(y[j]))
            .map(|j| f.iter().filter(|&&v| v >= f[j]).count())
            .max();
        if let Some(rank) = worst {
            total += (rank - 1) as f64;
        }
    }
    total / m as f64
}

/// Per-sample ranks (1-based) under descending scores, ties by lowest index.
fn stable_ranks(f: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..f.len()).collect();
    order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    let mut rank = vec![0; f.len()];
    for (pos, &j) in order.iter().enumerate() {
        rank[j] = pos + 1;
    }
    rank
}

/// Mean over relevant labels of the precision at that label's rank.
///
/// Samples without relevant labels are skipped; if every sample is skipped
/// the metric is undefined.
pub fn average_precision(ps: &PredictionSet) -> Result<f64> {
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..ps.samples() {
        let (y, f) = (ps.y.row(i), ps.f.row(i));
        let rank = stable_ranks(f);
        let rel: Vec<usize> = (0..y.len()).filter(|&j| is_on(y[j])).collect();
        if rel.is_empty() {
            continue;
        }
        let mut sum = 0.0;
        for &j in &rel {
            let above = rel.iter().filter(|&&k| rank[k] <= rank[j]).count();
            sum += above as f64 / rank[j] as f64;
        }
        total += sum / rel.len() as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric("average_precision"));
    }
    Ok(total / counted as f64)
}

/// `(|h ∩ y|, |h|, |y|, |h ∪ y|)` for one sample.
fn set_counts(h: &[f64], y: &[f64]) -> (usize, usize, usize, usize) {
    let mut inter = 0;
    let mut nh = 0;
    let mut ny = 0;
    let mut union = 0;
    for (&a, &b) in h.iter().zip(y) {
        let (a, b) = (is_on(a), is_on(b));
        inter += (a && b) as usize;
        nh += a as usize;
        ny += b as usize;
        union += (a || b) as usize;
    }
    (inter, nh, ny, union)
}

fn mean_over_rows(ps: &PredictionSet, f: impl Fn(usize, usize, usize, usize, usize) -> f64) -> f64 {
    let m = ps.samples();
    let l = ps.labels();
    let sum: f64 = (0..m)
        .map(|i| {
            let (inter, nh, ny, union) = set_counts(ps.h.row(i), ps.y.row(i));
            f(inter, nh, ny, union, l)
        })
        .sum();
    sum / m as f64
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `|h ∩ y| / |h|`, averaged; empty predictions contribute 0.
pub fn aiming(ps: &PredictionSet) -> f64 {
    mean_over_rows(ps, |i, nh, _, _, _| ratio(i, nh))
}

/// `|h ∩ y| / |y|`, averaged; samples without labels contribute 0.
pub fn recall(ps: &PredictionSet) -> f64 {
    mean_over_rows(ps, |i, _, ny, _, _| ratio(i, ny))
}

/// `|h ∩ y| / |h ∪ y|`, averaged; an empty union contributes 0.
pub fn accuracy_ml(ps: &PredictionSet) -> f64 {
    mean_over_rows(ps, |i, _, _, u, _| ratio(i, u))
}

/// Fraction of samples predicted exactly.
pub fn absolute_true(ps: &PredictionSet) -> f64 {
    let m = ps.samples();
    let exact = (0..m).filter(|&i| ps.h.row(i) == ps.y.row(i)).count();
    exact as f64 / m as f64
}

/// `(|h ∪ y| - |h ∩ y|) / l`, averaged.
pub fn absolute_false(ps: &PredictionSet) -> f64 {
    mean_over_rows(ps, |i, _, _, u, l| (u - i) as f64 / l as f64)
}

pub const BCE_CLAMP: f64 = 1e-12;

/// Binary cross-entropy averaged over samples (summed over labels).
///
/// `y` may hold soft targets in `[0, 1]`; `p` is clamped into
/// `[1e-12, 1 - 1e-12]` before taking logs.
pub fn bce_loss(y: &Tensor, p: &Tensor) -> Result<f64> {
    p.expect_shape("bce_loss", y.shape())?;
    let m = y.shape()[0].max(1);
    let mut total = 0.0;
    for (&t, &q) in y.data().iter().zip(p.data()) {
        let q = q.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        total -= t * q.ln() + (1.0 - t) * (1.0 - q).ln();
    }
    Ok(total / m as f64)
}

/// Gradient of [`bce_loss`] with respect to `p`.
pub fn bce_grad(y: &Tensor, p: &Tensor) -> Result<Tensor> {
    p.expect_shape("bce_grad", y.shape())?;
    let m = y.shape()[0].max(1) as f64;
    y.zip_map(p, |t, q| {
        let q = q.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        -(t / q - (1.0 - t) / (1.0 - q)) / m
    })
}

/// All ten indicators for one prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hamming_loss: f64,
    pub one_error: f64,
    /// NaN when undefined (no sample had both relevant and irrelevant labels).
    pub ranking_loss: f64,
    pub coverage: f64,
    /// NaN when undefined (no sample had a relevant label).
    pub average_precision: f64,
    pub aiming: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub absolute_true: f64,
    pub absolute_false: f64,
}

impl MetricReport {
    pub const FIELDS: [&'static str; 10] = [
        "hamming_loss",
        "one_error",
        "ranking_loss",
        "coverage",
        "average_precision",
        "aiming",
        "recall",
        "accuracy",
        "absolute_true",
        "absolute_false",
    ];

    pub fn compute(ps: &PredictionSet) -> Self {
        Self {
            hamming_loss: hamming_loss(ps),
            one_error: one_error(ps),
            ranking_loss: ranking_loss(ps).unwrap_or(f64::NAN),
            coverage: coverage(ps),
            average_precision: average_precision(ps).unwrap_or(f64::NAN),
            aiming: aiming(ps),
            recall: recall(ps),
            accuracy: accuracy_ml(ps),
            absolute_true: absolute_true(ps),
            absolute_false: absolute_false(ps),
        }
    }

    pub fn values(&self) -> [f64; 10] {
        [
            self.hamming_loss,
            self.one_error,
            self.ranking_loss,
            self.coverage,
            self.average_precision,
            self.aiming,
            self.recall,
            self.accuracy,
            self.absolute_true,
            self.absolute_false,
        ]
    }

    pub fn from_values(v: [f64; 10]) -> Self {
        Self {
            hamming_loss: v[0],
            one_error: v[1],
            ranking_loss: v[2],
            coverage: v[3],
            average_precision: v[4],
            aiming: v[5],
            recall: v[6],
            accuracy: v[7],
            absolute_true: v[8],
            absolute_false: v[9],
        }
    }

    /// Field-wise mean; NaN entries are ignored unless all are NaN.
    pub fn mean(reports: &[MetricReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let mut out = [0.0; 10];
        for (k, slot) in out.iter_mut().enumerate() {
            let vals: Vec<f64> = reports.iter().map(|r| r.values()[k]).filter(|v| !v.is_nan()).collect();
            *slot = if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            };
        }
        Some(Self::from_values(out))
    }

    /// One flat text record:
    /// `dataset=<d> model=<m> fold=<f> hamming_loss=0.000000 ...`.
    pub fn to_record(&self, dataset: &str, model: &str, fold: &str) -> String {
        let mut s = format!("dataset={dataset} model={model} fold={fold}");
        for (name, v) in Self::FIELDS.iter().zip(self.values()) {
            let _ = write!(s, " {name}={v:.6}");
        }
        s
    }
}
