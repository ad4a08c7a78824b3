//! Cross-validated experiments and their reports.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Augmentation, ClusterCount, FoldScheme, RunConfig};
use super::dataset::load_dataset;
use super::folds::{explicit_split, holdout_split, kfold_split, load_indices, Fold};
use crate::ensemble::{
    fuse_weighted_external, fused_threshold, normalize_enn, train_ensemble, EnsembleConfig, EnsembleModel,
};
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, PredictionSet, DEFAULT_THRESHOLD};
use crate::numerics::{RngStream, Tensor};
use crate::pipeline::{build_training_set, default_clusters, imcc_augment, Dataset, Preprocessor, TrainingSet};

pub const REPORT_FORMAT: &str = "mlkit-report v1";
pub const MODEL_ENN: &str = "ENN";
pub const MODEL_ENN_EXT: &str = "ENN+IMCC";
pub const MODEL_ENN_3EXT: &str = "ENN+3xIMCC";

/// Inner folds used to pick a cluster count from a grid.
const GRID_INNER_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub model: String,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// 1-based fold number.
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Cluster count used for augmentation, if any.
    pub clusters: Option<usize>,
    pub models: Vec<ModelScores>,
    /// Set when the fold failed; `models` is then empty.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub dataset: String,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    /// Per-model means over the folds that succeeded.
    pub mean: Vec<ModelScores>,
}

impl ExperimentReport {
    pub fn failed_folds(&self) -> impl Iterator<Item = &FoldResult> {
        self.folds.iter().filter(|f| f.error.is_some())
    }

    /// Model means by name.
    pub fn mean_of(&self, model: &str) -> Option<&MetricReport> {
        self.mean.iter().find(|m| m.model == model).map(|m| &m.metrics)
    }

    /// Flat text records, one per (model, fold), followed by the means.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {REPORT_FORMAT}");
        let _ = writeln!(s, "# dataset={} seed={}", self.dataset, self.seed);
        let _ = writeln!(s, "# external scores are indexed by dataset row; each fold scores its test rows");
        for f in &self.folds {
            match &f.error {
                Some(e) => {
                    let _ = writeln!(s, "# fold {} failed: {e}", f.fold);
                }
                None => {
                    for m in &f.models {
                        let _ = writeln!(s, "{}", m.metrics.to_record(&self.dataset, &m.model, &f.fold.to_string()));
                    }
                }
            }
        }
        for m in &self.mean {
            let _ = writeln!(s, "{}", m.metrics.to_record(&self.dataset, &m.model, "mean"));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Reads external classifier scores: one comma-separated line of `l` reals
/// per dataset row. Values outside `[0, 1]` are accepted with a warning.
pub fn load_external_scores(path: &Path, n: usize, l: usize) -> Result<Tensor> {
    let text = std::fs::read_to_string(path)?;
    parse_external_scores(&text, &path.display().to_string(), n, l)
}

pub fn parse_external_scores(text: &str, origin: &str, n: usize, l: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(n * l);
    let mut rows = 0;
    let mut outside = 0usize;
    for (idx, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let err = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: idx + 1,
            msg,
        };
        rows += 1;
        if rows > n {
            return Err(err(format!("more than {n} score rows")));
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != l {
            return Err(err(format!("expected {l} scores, found {}", fields.len())));
        }
        for f in fields {
            let v: f64 = f.parse().map_err(|_| err(format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("score `{f}` is not finite")));
            }
            if !(0.0..=1.0).contains(&v) {
                outside += 1;
            }
            data.push(v);
        }
    }
    if rows != n {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: text.lines().count(),
            msg: format!("expected {n} score rows, found {rows}"),
        });
    }
    if outside > 0 {
        log::warn!("{origin}: {outside} external scores lie outside [0, 1]");
    }
    Tensor::new(vec![n, l], data)
}

/// Train/test partitions for `cfg.folds`.
pub fn make_folds(cfg: &RunConfig, ds: &Dataset, rng: &mut RngStream) -> Result<Vec<Fold>> {
    match &cfg.folds {
        FoldScheme::KFold(k) => kfold_split(ds.n(), *k, cfg.stratified.then_some(&ds.y), rng),
        FoldScheme::Holdout(p) => Ok(vec![holdout_split(ds.n(), *p, rng)?]),
        FoldScheme::Split { train, test } => Ok(vec![explicit_split(ds.n(), load_indices(train)?, load_indices(test)?)?]),
    }
}

/// Runs the experiment described by `cfg` and writes `report.txt`,
/// `report.json` and `config.json` into `cfg.output_dir`.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let ds = load_dataset(&cfg.dataset)?;
    let external = cfg
        .external_scores
        .as_deref()
        .map(|p| load_external_scores(p, ds.n(), ds.l()))
        .transpose()?;
    let report = run_on_dataset(cfg, &ds, external.as_ref())?;
    write_report(cfg, &report)?;
    Ok(report)
}

pub fn write_report(cfg: &RunConfig, report: &ExperimentReport) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(cfg.output_dir.join("report.txt"), report.to_text())?;
    std::fs::write(cfg.output_dir.join("report.json"), report.to_json()?)?;
    let mut config = serde_json::to_string_pretty(cfg)?;
    config.push('\n');
    std::fs::write(cfg.output_dir.join("config.json"), config)?;
    Ok(())
}

/// In-memory core of [`run_experiment`]. Folds run concurrently; a failing
/// fold is recorded and the remaining folds still complete.
pub fn run_on_dataset(cfg: &RunConfig, ds: &Dataset, external: Option<&Tensor>) -> Result<ExperimentReport> {
    cfg.validate()?;
    if let Some(e) = external {
        e.expect_shape("external scores", &[ds.n(), ds.l()])?;
    }
    let master = RngStream::from_seed(cfg.seed);
    let folds = make_folds(cfg, ds, &mut master.child(0))?;
    let results: Vec<FoldResult> = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let mut rng = master.child(1 + i as u64);
            match run_fold(cfg, ds, fold, external, &mut rng) {
                Ok((models, clusters)) => FoldResult {
                    fold: i + 1,
                    n_train: fold.train.len(),
                    n_test: fold.test.len(),
                    clusters,
                    models,
                    error: None,
                },
                Err(e) => {
                    log::error!("fold {} failed: {e}", i + 1);
                    FoldResult {
                        fold: i + 1,
                        n_train: fold.train.len(),
                        n_test: fold.test.len(),
                        clusters: None,
                        models: Vec::new(),
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();

    let mut mean = Vec::new();
    if let Some(first) = results.iter().find(|f| f.error.is_none()) {
        for m in &first.models {
            let per_fold: Vec<MetricReport> = results
                .iter()
                .flat_map(|f| f.models.iter().filter(|x| x.model == m.model).map(|x| x.metrics))
                .collect();
            if let Some(avg) = MetricReport::mean(&per_fold) {
                mean.push(ModelScores {
                    model: m.model.clone(),
                    metrics: avg,
                });
            }
        }
    }
    Ok(ExperimentReport {
        format: REPORT_FORMAT.to_string(),
        dataset: ds.name.clone(),
        seed: cfg.seed,
        folds: results,
        mean,
    })
}

fn stage(name: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Stage {
        stage: name,
        source: Box::new(e),
    }
}

fn run_fold(
    cfg: &RunConfig,
    ds: &Dataset,
    fold: &Fold,
    external: Option<&Tensor>,
    rng: &mut RngStream,
) -> Result<(Vec<ModelScores>, Option<usize>)> {
    let ens_seed = rng.next_u64();
    let train = ds.subset(&fold.train);
    let test = ds.subset(&fold.test);
    let pre = Preprocessor::fit(&train, &cfg.preprocess_config()).map_err(stage("preprocess"))?;
    let train = pre.apply_dataset(&train).map_err(stage("preprocess"))?;
    let test = pre.apply_dataset(&test).map_err(stage("preprocess"))?;
    let ens_cfg = cfg.ensemble_config(ds.l());

    let (data, clusters) =
        augmented_training_set(cfg, &ens_cfg, &train, &mut rng.child(0), ens_seed).map_err(stage("augment"))?;
    let model = train_ensemble(&ens_cfg, &data, ens_seed).map_err(stage("train"))?;
    let ext = external.map(|e| e.select_rows(&fold.test));
    let models = evaluate_model(&model, &test, ext.as_ref()).map_err(stage("evaluate"))?;
    Ok((models, clusters))
}

/// Scores a trained ensemble on an already preprocessed dataset: the ENN row,
/// plus the ENN+IMCC and ENN+3xIMCC rows when external scores are given.
pub fn evaluate_model(model: &EnsembleModel, test: &Dataset, external: Option<&Tensor>) -> Result<Vec<ModelScores>> {
    let scores = model.predict(&test.x)?;
    let mut models = vec![ModelScores {
        model: MODEL_ENN.to_string(),
        metrics: score(&test.y, scores.clone(), DEFAULT_THRESHOLD)?,
    }];
    if let Some(ext) = external {
        let enn = normalize_enn(&scores);
        for (name, w) in [(MODEL_ENN_EXT, 1.0), (MODEL_ENN_3EXT, 3.0)] {
            let fused = fuse_weighted_external(&enn, ext, w)?;
            models.push(ModelScores {
                model: name.to_string(),
                metrics: score(&test.y, fused, fused_threshold(w))?,
            });
        }
    }
    Ok(models)
}

/// An ensemble trained on a whole dataset, with the transforms it expects.
#[derive(Debug, Clone)]
pub struct TrainedArtifact {
    pub model: EnsembleModel,
    pub preprocessor: Preprocessor,
    pub clusters: Option<usize>,
}

/// Fits preprocessing, augmentation and the ensemble on all of `ds`.
pub fn train_on_dataset(cfg: &RunConfig, ds: &Dataset) -> Result<TrainedArtifact> {
    cfg.validate()?;
    let mut rng = RngStream::from_seed(cfg.seed).child(u64::MAX);
    let ens_seed = rng.next_u64();
    let preprocessor = Preprocessor::fit(ds, &cfg.preprocess_config()).map_err(stage("preprocess"))?;
    let train = preprocessor.apply_dataset(ds).map_err(stage("preprocess"))?;
    let ens_cfg = cfg.ensemble_config(ds.l());
    let (data, clusters) =
        augmented_training_set(cfg, &ens_cfg, &train, &mut rng.child(0), ens_seed).map_err(stage("augment"))?;
    let model = train_ensemble(&ens_cfg, &data, ens_seed).map_err(stage("train"))?;
    Ok(TrainedArtifact {
        model,
        preprocessor,
        clusters,
    })
}

fn score(y: &Tensor, f: Tensor, threshold: f64) -> Result<MetricReport> {
    Ok(MetricReport::compute(&PredictionSet::from_scores(y.clone(), f, threshold)?))
}

fn augmented_training_set(
    cfg: &RunConfig,
    ens_cfg: &EnsembleConfig,
    train: &Dataset,
    rng: &mut RngStream,
    ens_seed: u64,
) -> Result<(TrainingSet, Option<usize>)> {
    let Augmentation::Clusters { count, weight } = &cfg.augmentation else {
        return Ok((TrainingSet::from_dataset(train), None));
    };
    let c = match count {
        ClusterCount::Auto => default_clusters(train.n()),
        ClusterCount::Fixed(c) => *c,
        ClusterCount::Grid(grid) => select_clusters(ens_cfg, train, grid, *weight, &mut rng.child(1), ens_seed)?,
    };
    let c = c.min(train.n());
    let aug = imcc_augment(train, c, rng)?;
    Ok((build_training_set(train, &aug, *weight)?, Some(c)))
}

/// Picks the grid entry with the best mean inner-fold average precision of
/// a single-member model; ties go to the smaller count.
fn select_clusters(
    ens_cfg: &EnsembleConfig,
    train: &Dataset,
    grid: &[usize],
    weight: f64,
    rng: &mut RngStream,
    ens_seed: u64,
) -> Result<usize> {
    let k = GRID_INNER_FOLDS.min(train.n());
    let inner = kfold_split(train.n(), k, None, rng)?;
    let mut single = ens_cfg.clone();
    single.members = 1;
    let mut candidates: Vec<usize> = grid.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    let mut best: Option<(usize, f64)> = None;
    for &c in &candidates {
        let mut total = 0.0;
        for (j, fold) in inner.iter().enumerate() {
            let tr = train.subset(&fold.train);
            let te = train.subset(&fold.test);
            let aug = imcc_augment(&tr, c.min(tr.n()), &mut rng.child(j as u64))?;
            let data = build_training_set(&tr, &aug, weight)?;
            let model = train_ensemble(&single, &data, ens_seed)?;
            let ap = score(&te.y, model.predict(&te.x)?, DEFAULT_THRESHOLD)?.average_precision;
            total += if ap.is_nan() { 0.0 } else { ap };
        }
        let mean = total / inner.len() as f64;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((c, mean));
        }
    }
    log::info!("cluster grid {candidates:?} selected {:?}", best);
    Ok(best.map(|(c, _)| c).unwrap_or(1))
}
