//! Preprocessing and cluster-center augmentation.
//!
//! Every fitted transform takes its statistics from a training tensor only;
//! held-out rows enter solely through the `apply_to` arguments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{kmeans, pca_fit, PcaModel, RngStream, Tensor};

/// Features `x` (`n x d`) with binary labels `y` (`n x l`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: Tensor,
    pub y: Tensor,
    /// Marks a sparse feature space; PCA reduction applies under the
    /// automatic policy.
    pub sparse: bool,
}

impl Dataset {
    pub fn new(name: impl Into<String>, x: Tensor, y: Tensor, sparse: bool) -> Result<Self> {
        if x.ndim() != 2 || y.ndim() != 2 {
            return Err(Error::invalid("dataset features and labels must be 2-D"));
        }
        if x.rows() != y.rows() {
            return Err(Error::shape("Dataset::new", &[x.rows()], &[y.rows()]));
        }
        if x.rows() == 0 || x.cols() == 0 || y.cols() == 0 {
            return Err(Error::invalid("dataset needs n, d, l >= 1"));
        }
        x.ensure_finite("dataset features")?;
        if y.data().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::invalid("dataset labels must be 0 or 1"));
        }
        Ok(Self {
            name: name.into(),
            x,
            y,
            sparse,
        })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn l(&self) -> usize {
        self.y.cols()
    }

    /// Mean number of positive labels per sample.
    pub fn label_cardinality(&self) -> f64 {
        self.y.sum() / self.n() as f64
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            x: self.x.select_rows(indices),
            y: self.y.select_rows(indices),
            sparse: self.sparse,
        }
    }
}

/// Per-column min/max statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(train: &Tensor) -> Result<Self> {
        if train.ndim() != 2 || train.rows() == 0 {
            return Err(Error::invalid("min-max scaler needs a non-empty 2-D tensor"));
        }
        let c = train.cols();
        let mut min = vec![f64::INFINITY; c];
        let mut max = vec![f64::NEG_INFINITY; c];
        for i in 0..train.rows() {
            for (j, &v) in train.row(i).iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Maps into `[0, 1]`; constant columns become 0 and values outside the
    /// fitted range are clipped.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() != 2 || x.cols() != self.min.len() {
            return Err(Error::shape("MinMaxScaler::apply", &[self.min.len()], x.shape()));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let span = self.max[j] - self.min[j];
                *v = if span > 0.0 {
                    ((*v - self.min[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                };
            }
        }
        Ok(out)
    }
}

/// Fits min/max on `train` and applies it to `apply_to`.
pub fn minmax_normalize(train: &Tensor, apply_to: &Tensor) -> Result<Tensor> {
    MinMaxScaler::fit(train)?.apply(apply_to)
}

/// Fits PCA on `train` and projects both tensors. A zero-variance fit passes
/// both tensors through unchanged.
pub fn pca_reduce(train: &Tensor, apply_to: &Tensor, retain: f64) -> Result<(Tensor, Tensor, PcaModel)> {
    let model = pca_fit(train, retain)?;
    if model.is_degenerate() {
        return Ok((train.clone(), apply_to.clone(), model));
    }
    let a = model.transform(train)?;
    let b = model.transform(apply_to)?;
    Ok((a, b, model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaPolicy {
    /// Reduce only datasets flagged sparse.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub minmax: bool,
    pub pca: PcaPolicy,
    pub pca_retain: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            minmax: true,
            pca: PcaPolicy::Auto,
            pca_retain: 0.99,
        }
    }
}

/// Transforms fitted on one training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub scaler: Option<MinMaxScaler>,
    pub pca: Option<PcaModel>,
}

impl Preprocessor {
    pub fn fit(train: &Dataset, cfg: &PreprocessConfig) -> Result<Self> {
        let scaler = if cfg.minmax {
            Some(MinMaxScaler::fit(&train.x)?)
        } else {
            None
        };
        let use_pca = match cfg.pca {
            PcaPolicy::Auto => train.sparse,
            PcaPolicy::Always => true,
            PcaPolicy::Never => false,
        };
        let pca = if use_pca {
            let x = match &scaler {
                Some(s) => s.apply(&train.x)?,
                None => train.x.clone(),
            };
            let model = pca_fit(&x, cfg.pca_retain)?;
            (!model.is_degenerate()).then_some(model)
        } else {
            None
        };
        Ok(Self { scaler, pca })
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let mut out = match &self.scaler {
            Some(s) => s.apply(x)?,
            None => x.clone(),
        };
        if let Some(p) = &self.pca {
            out = p.transform(&out)?;
        }
        Ok(out)
    }

    pub fn apply_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            name: ds.name.clone(),
            x: self.apply(&ds.x)?,
            y: ds.y.clone(),
            sparse: ds.sparse,
        })
    }
}

/// Virtual examples built from cluster centers.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSet {
    /// Cluster centers, `c x d`.
    pub z: Tensor,
    /// Per-cluster mean label vectors, `c x l`, entries in `[0, 1]`.
    pub t: Tensor,
    /// Cluster index of every original sample.
    pub assignments: Vec<usize>,
}

impl AugmentedSet {
    pub fn clusters(&self) -> usize {
        self.z.rows()
    }
}

/// Clusters the features with k-means and averages features and labels
/// within each cluster.
pub fn imcc_augment(ds: &Dataset, c: usize, rng: &mut RngStream) -> Result<AugmentedSet> {
    let model = kmeans(&ds.x, c, rng)?;
    let (z, t) = cluster_means(ds, &model.assignments, c)?;
    Ok(AugmentedSet {
        z,
        t,
        assignments: model.assignments,
    })
}

/// Means of features and labels per cluster, by direct summation.
pub fn cluster_means(ds: &Dataset, assignments: &[usize], c: usize) -> Result<(Tensor, Tensor)> {
    if assignments.len() != ds.n() {
        return Err(Error::shape("cluster_means", &[ds.n()], &[assignments.len()]));
    }
    let mut z = Tensor::zeros(&[c, ds.d()]);
    let mut t = Tensor::zeros(&[c, ds.l()]);
    let mut counts = vec![0usize; c];
    for (i, &a) in assignments.iter().enumerate() {
        if a >= c {
            return Err(Error::invalid(format!("assignment {a} out of range for {c} clusters")));
        }
        counts[a] += 1;
        for (dst, v) in z.row_mut(a).iter_mut().zip(ds.x.row(i)) {
            *dst += v;
        }
        for (dst, v) in t.row_mut(a).iter_mut().zip(ds.y.row(i)) {
            *dst += v;
        }
    }
    for (j, &k) in counts.iter().enumerate() {
        if k == 0 {
            return Err(Error::invalid(format!("cluster {j} is empty")));
        }
        if k > 1 {
            let inv = k as f64;
            z.row_mut(j).iter_mut().for_each(|v| *v /= inv);
            t.row_mut(j).iter_mut().for_each(|v| *v /= inv);
        }
    }
    Ok((z, t))
}

/// Default cluster count, `round(sqrt(n))`.
pub fn default_clusters(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize).clamp(1, n.max(1))
}

/// Inputs with (possibly soft) targets and a weight per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: Tensor,
    pub y: Tensor,
    pub weights: Vec<f64>,
    /// Number of rows from the original dataset; the remainder are virtual.
    pub original: usize,
}

impl TrainingSet {
    pub fn from_dataset(ds: &Dataset) -> Self {
        Self {
            x: ds.x.clone(),
            y: ds.y.clone(),
            weights: vec![1.0; ds.n()],
            original: ds.n(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sample-weighted cross-entropy of `p` against the targets, normalized by
    /// the number of original samples.
    pub fn weighted_loss(&self, p: &Tensor) -> Result<f64> {
        p.expect_shape("TrainingSet::weighted_loss", self.y.shape())?;
        let mut total = 0.0;
        for i in 0..self.len() {
            let w = self.weights[i];
            if w == 0.0 {
                continue;
            }
            let row: f64 = self
                .y
                .row(i)
                .iter()
                .zip(p.row(i))
                .map(|(&t, &q)| {
                    let q = q.clamp(crate::metrics::BCE_CLAMP, 1.0 - crate::metrics::BCE_CLAMP);
                    -(t * q.ln() + (1.0 - t) * (1.0 - q).ln())
                })
                .sum();
            total += w * row;
        }
        Ok(total / self.original.max(1) as f64)
    }
}

/// Concatenates the original samples (weight 1) with the virtual examples
/// (weight `weight`).
pub fn build_training_set(ds: &Dataset, aug: &AugmentedSet, weight: f64) -> Result<TrainingSet> {
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(Error::invalid(format!("augmentation weight must be >= 0, got {weight}")));
    }
    let x = ds.x.vstack(&aug.z)?;
    let y = ds.y.vstack(&aug.t)?;
    let mut weights = vec![1.0; ds.n()];
    weights.extend(std::iter::repeat_n(weight, aug.clusters()));
    Ok(TrainingSet {
        x,
        y,
        weights,
        original: ds.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(
            "toy",
            Tensor::from_rows(&[[0.0, 0.0], [2.0, 2.0]]).unwrap(),
            Tensor::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap(),
            false,
        )
        .unwrap()
    }

    #[test]
    fn minmax_cases() {
        let train = Tensor::from_rows(&[[2.0, 5.0], [4.0, 5.0], [6.0, 5.0]]).unwrap();
        let out = minmax_normalize(&train, &train).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 0.5, 0.0, 1.0, 0.0]);
        let test = Tensor::from_rows(&[[8.0, 7.0], [0.0, 1.0]]).unwrap();
        let out = minmax_normalize(&train, &test).unwrap();
        assert_eq!(out.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_cluster_averages() {
        let aug = imcc_augment(&toy(), 1, &mut RngStream::from_seed(0)).unwrap();
        assert_eq!(aug.z.data(), &[1.0, 1.0]);
        assert_eq!(aug.t.data(), &[1.0, 0.5]);
    }

    #[test]
    fn singleton_clusters_reproduce_data() {
        let ds = toy();
        let aug = imcc_augment(&ds, 2, &mut RngStream::from_seed(4)).unwrap();
        for i in 0..2 {
            let j = aug.assignments[i];
            assert_eq!(aug.z.row(j), ds.x.row(i));
            assert_eq!(aug.t.row(j), ds.y.row(i));
        }
    }

    #[test]
    fn zero_weight_matches_original_loss() {
        let ds = toy();
        let aug = imcc_augment(&ds, 1, &mut RngStream::from_seed(0)).unwrap();
        let ts = build_training_set(&ds, &aug, 0.0).unwrap();
        let p = Tensor::filled(&[3, 2], 0.3);
        let base = TrainingSet::from_dataset(&ds);
        let lhs = ts.weighted_loss(&p).unwrap();
        let rhs = base.weighted_loss(&Tensor::filled(&[2, 2], 0.3)).unwrap();
        assert_eq!(lhs, rhs);
        assert!(build_training_set(&ds, &aug, -1.0).is_err());
    }

    #[test]
    fn unit_weight_duplicate_doubles_loss() {
        let ds = toy();
        let aug = imcc_augment(&ds, 2, &mut RngStream::from_seed(1)).unwrap();
        let ts = build_training_set(&ds, &aug, 1.0).unwrap();
        // Predictions depend only on the input row.
        let predict = |x: &Tensor| {
            let mut p = Tensor::zeros(&[x.rows(), 2]);
            for i in 0..x.rows() {
                let s = 0.2 + 0.1 * x.row(i)[0];
                p.row_mut(i).copy_from_slice(&[s, 1.0 - s]);
            }
            p
        };
        let doubled = ts.weighted_loss(&predict(&ts.x)).unwrap();
        let single = TrainingSet::from_dataset(&ds).weighted_loss(&predict(&ds.x)).unwrap();
        assert!((doubled - 2.0 * single).abs() < 1e-12);
    }

    #[test]
    fn pca_reduce_low_rank() {
        let mut rng = RngStream::from_seed(3);
        let basis = [[1.0, 0.0, 2.0, 0.0, 1.0], [0.0, 1.0, -1.0, 3.0, 0.5]];
        let mut rows = Vec::new();
        for _ in 0..20 {
            let (a, b) = (rng.normal(), rng.normal());
            rows.push((0..5).map(|k| a * basis[0][k] + b * basis[1][k]).collect::<Vec<_>>());
        }
        let x = Tensor::from_rows(&rows).unwrap();
        let (a, _, model) = pca_reduce(&x, &x, 1.0).unwrap();
        assert_eq!(model.n_components(), 2);
        let back = model.inverse_transform(&a).unwrap();
        assert!(back.max_abs_diff(&x) < 1e-8);
    }

    #[test]
    fn label_cardinality() {
        assert_eq!(toy().label_cardinality(), 1.5);
    }

    #[test]
    fn dataset_validation() {
        let x = Tensor::zeros(&[2, 2]);
        assert!(Dataset::new("bad", x.clone(), Tensor::filled(&[2, 1], 2.0), false).is_err());
        assert!(Dataset::new("bad", x, Tensor::zeros(&[3, 1]), false).is_err());
    }
}
