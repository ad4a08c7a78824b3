//! Experiment configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsembleConfig, InputEncoding, NetworkSpec, OptimizerPolicy, Topology, TrainConfig};
use crate::error::{Error, Result};
use crate::optim::OptimConfig;
use crate::pipeline::{PcaPolicy, PreprocessConfig};

/// How samples are divided into train and test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldScheme {
    /// `k` random folds (`kfold:<k>`).
    KFold(usize),
    /// One random split holding out a fraction (`holdout:<fraction>`).
    Holdout(f64),
    /// Predefined index files (`split:<train-file>,<test-file>`).
    Split { train: PathBuf, test: PathBuf },
}

impl FromStr for FoldScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("fold scheme `{s}`: expected kfold:<k>, holdout:<fraction> or split:<train>,<test>"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "kfold" => Ok(Self::KFold(arg.parse().map_err(|_| bad())?)),
            "holdout" => Ok(Self::Holdout(arg.parse().map_err(|_| bad())?)),
            "split" => {
                let (train, test) = arg.split_once(',').ok_or_else(bad)?;
                Ok(Self::Split {
                    train: train.into(),
                    test: test.into(),
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for FoldScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::KFold(k) => write!(f, "kfold:{k}"),
            Self::Holdout(p) => write!(f, "holdout:{p}"),
            Self::Split { train, test } => write!(f, "split:{},{}", train.display(), test.display()),
        }
    }
}

/// Cluster count for cluster-center augmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterCount {
    /// `round(sqrt(n_train))`.
    Auto,
    Fixed(usize),
    /// Chosen per fold by inner cross-validation on the training set.
    Grid(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Augmentation {
    Off,
    /// Adds cluster centers with soft labels, each weighted by `weight`.
    Clusters { count: ClusterCount, weight: f64 },
}

impl FromStr for Augmentation {
    type Err = Error;

    /// `off`, or `clusters:<c>:<weight>` where `<c>` is `auto`, an integer,
    /// or a `|`-separated grid such as `5|10|20`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "off" {
            return Ok(Self::Off);
        }
        let bad = || Error::invalid(format!("augmentation `{s}`: expected off or clusters:<auto|c|c1|c2..>:<weight>"));
        let mut parts = s.split(':');
        if parts.next() != Some("clusters") {
            return Err(bad());
        }
        let count = match parts.next().ok_or_else(bad)? {
            "auto" => ClusterCount::Auto,
            c if c.contains('|') => ClusterCount::Grid(
                c.split('|').map(|v| v.parse().map_err(|_| bad())).collect::<Result<_>>()?,
            ),
            c => ClusterCount::Fixed(c.parse().map_err(|_| bad())?),
        };
        let weight = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Self::Clusters { count, weight })
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Off => f.write_str("off"),
            Self::Clusters { count, weight } => {
                let c = match count {
                    ClusterCount::Auto => "auto".to_string(),
                    ClusterCount::Fixed(c) => c.to_string(),
                    ClusterCount::Grid(g) => g.iter().map(usize::to_string).collect::<Vec<_>>().join("|"),
                };
                write!(f, "clusters:{c}:{weight}")
            }
        }
    }
}

/// Everything that determines an experiment. Together with `seed` it fixes
/// every byte of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub topologies: Vec<Topology>,
    pub members: usize,
    pub optimizer: OptimizerPolicy,
    pub learning_rate: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub clip_threshold: f64,
    pub minibatch: usize,
    /// `None` uses 150 epochs for GRU-family and 100 for TCN-family members.
    pub epochs: Option<usize>,
    pub hidden_units: usize,
    pub tcn_filters: usize,
    pub tcn_blocks: usize,
    pub pre_conv_filters: usize,
    pub dropout: f64,
    pub input_encoding: InputEncoding,
    pub folds: FoldScheme,
    pub stratified: bool,
    pub augmentation: Augmentation,
    pub minmax: bool,
    pub pca: PcaPolicy,
    pub pca_retain: f64,
    /// Scores of an external classifier, one row per dataset row.
    pub external_scores: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Desk-scale defaults: ten stochastic-optimizer GRU_A members, 5-fold
    /// cross-validation, no augmentation.
    pub fn new(dataset: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        let t = TrainConfig::default();
        let s = NetworkSpec::new(Topology::GruA, 1);
        Self {
            dataset: dataset.into(),
            topologies: vec![Topology::GruA],
            members: 10,
            optimizer: OptimizerPolicy::Stochastic,
            learning_rate: t.optim.learning_rate,
            rho1: t.optim.rho1,
            rho2: t.optim.rho2,
            clip_threshold: t.clip_threshold,
            minibatch: t.minibatch,
            epochs: None,
            hidden_units: s.hidden_units,
            tcn_filters: s.tcn_filters,
            tcn_blocks: s.tcn_blocks,
            pre_conv_filters: s.pre_conv_filters,
            dropout: s.dropout,
            input_encoding: s.input_encoding,
            folds: FoldScheme::KFold(5),
            stratified: false,
            augmentation: Augmentation::Off,
            minmax: true,
            pca: PcaPolicy::Auto,
            pca_retain: 0.99,
            external_scores: None,
            seed: 0,
            output_dir: output_dir.into(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            optim: OptimConfig {
                learning_rate: self.learning_rate,
                rho1: self.rho1,
                rho2: self.rho2,
                ..OptimConfig::default()
            },
            clip_threshold: self.clip_threshold,
            minibatch: self.minibatch,
            epochs: self.epochs,
        }
    }

    pub fn ensemble_config(&self, n_labels: usize) -> EnsembleConfig {
        let mut spec = NetworkSpec::new(self.topologies.first().copied().unwrap_or(Topology::GruA), n_labels);
        spec.hidden_units = self.hidden_units;
        spec.tcn_filters = self.tcn_filters;
        spec.tcn_blocks = self.tcn_blocks;
        spec.pre_conv_filters = self.pre_conv_filters;
        spec.dropout = self.dropout;
        spec.input_encoding = self.input_encoding;
        EnsembleConfig {
            topologies: self.topologies.clone(),
            members: self.members,
            policy: self.optimizer,
            train: self.train_config(),
            spec,
        }
    }

    pub fn preprocess_config(&self) -> PreprocessConfig {
        PreprocessConfig {
            minmax: self.minmax,
            pca: self.pca,
            pca_retain: self.pca_retain,
        }
    }

    /// Checks every field without touching the file system; the error names
    /// the first offending field.
    pub fn validate(&self) -> Result<()> {
        fn fail(field: &'static str, msg: impl Into<String>) -> Result<()> {
            Err(Error::Config { field, msg: msg.into() })
        }
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if self.topologies.is_empty() {
            return fail("topologies", "at least one topology is required");
        }
        if self.members == 0 {
            return fail("members", "must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate", format!("must be > 0, got {}", self.learning_rate));
        }
        if !open_unit(self.rho1) {
            return fail("rho1", format!("must lie in (0, 1), got {}", self.rho1));
        }
        if !open_unit(self.rho2) {
            return fail("rho2", format!("must lie in (0, 1), got {}", self.rho2));
        }
        if !(self.clip_threshold > 0.0) {
            return fail("clip_threshold", format!("must be > 0, got {}", self.clip_threshold));
        }
        if self.minibatch < 2 {
            return fail("minibatch", "must be >= 2 so batch statistics are defined");
        }
        if self.epochs == Some(0) {
            return fail("epochs", "must be >= 1 when given");
        }
        for (field, v) in [
            ("hidden_units", self.hidden_units),
            ("tcn_filters", self.tcn_filters),
            ("tcn_blocks", self.tcn_blocks),
            ("pre_conv_filters", self.pre_conv_filters),
        ] {
            if v == 0 {
                return fail(field, "must be >= 1");
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout", format!("must lie in [0, 1), got {}", self.dropout));
        }
        match &self.folds {
            FoldScheme::KFold(k) if *k < 2 => return fail("folds", "kfold needs k >= 2"),
            FoldScheme::Holdout(p) if !open_unit(*p) => return fail("folds", "holdout fraction must lie in (0, 1)"),
            _ => {}
        }
        if let Augmentation::Clusters { count, weight } = &self.augmentation {
            if !(*weight >= 0.0 && weight.is_finite()) {
                return fail("augmentation", format!("weight must be >= 0, got {weight}"));
            }
            match count {
                ClusterCount::Fixed(0) => return fail("augmentation", "cluster count must be >= 1"),
                ClusterCount::Grid(g) if g.is_empty() || g.contains(&0) => {
                    return fail("augmentation", "cluster grid must be non-empty with entries >= 1")
                }
                _ => {}
            }
        }
        if !(self.pca_retain > 0.0 && self.pca_retain <= 1.0) {
            return fail("pca_retain", format!("must lie in (0, 1], got {}", self.pca_retain));
        }
        Ok(())
    }
}
