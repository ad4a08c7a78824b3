//! Ensembles of trained networks and their on-disk container.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fusion::fuse_average;
use super::network::{build_network, Network, NetworkSpec, Topology};
use super::train::{assign_optimizers, train_network, OptimizerPolicy, TrainConfig};
use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};
use crate::optim::Variant;
use crate::pipeline::TrainingSet;

pub const MODEL_FORMAT: &str = "mlkit-model v1";

/// Stream ids carved out of each member's stream.
const STREAM_INIT: u64 = 0;
const STREAM_OPTIMIZERS: u64 = 1;
const STREAM_TRAIN: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    #[default]
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Member `i` uses `topologies[i % topologies.len()]`.
    pub topologies: Vec<Topology>,
    pub members: usize,
    pub policy: OptimizerPolicy,
    pub train: TrainConfig,
    /// Hyperparameter template; topology and label count are set per member.
    pub spec: NetworkSpec,
}

impl EnsembleConfig {
    /// Ten GRU_A members with stochastic per-layer optimizers.
    pub fn new(n_labels: usize) -> Self {
        Self {
            topologies: vec![Topology::GruA],
            members: 10,
            policy: OptimizerPolicy::Stochastic,
            train: TrainConfig::default(),
            spec: NetworkSpec::new(Topology::GruA, n_labels),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.topologies.is_empty() {
            return Err(Error::Config {
                field: "topologies",
                msg: "at least one topology is required".into(),
            });
        }
        if self.members == 0 {
            return Err(Error::Config {
                field: "members",
                msg: "must be >= 1".into(),
            });
        }
        self.train.validate()?;
        self.spec.validate().map_err(|e| Error::Config {
            field: "spec",
            msg: e.to_string(),
        })
    }

    pub fn member_spec(&self, idx: usize) -> NetworkSpec {
        let mut spec = self.spec.clone();
        spec.topology = self.topologies[idx % self.topologies.len()];
        spec
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub net: Network,
    /// One variant per trainable layer.
    pub optimizers: Vec<Variant>,
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub members: Vec<Member>,
    pub fusion: FusionRule,
    /// Weight of external scores in `normalized ENN + w * external`.
    pub external_weight: f64,
    pub master_seed: u64,
}

/// Builds, assigns optimizers to, and trains one member. Member `idx` owns
/// the stream `master.child(idx)`, so results do not depend on scheduling.
pub fn train_member(
    cfg: &EnsembleConfig,
    data: &TrainingSet,
    idx: usize,
    master: &RngStream,
) -> Result<Member> {
    let spec = cfg.member_spec(idx);
    let stream = master.child(idx as u64);
    let mut net = build_network(&spec, data.x.cols(), &mut stream.child(STREAM_INIT))?;
    let optimizers = assign_optimizers(&net, cfg.policy, &mut stream.child(STREAM_OPTIMIZERS));
    let epochs = cfg.train.epochs_for(spec.topology);
    let loss_trace = train_network(
        &mut net,
        data,
        &optimizers,
        &cfg.train,
        epochs,
        &mut stream.child(STREAM_TRAIN),
    )?;
    Ok(Member {
        net,
        optimizers,
        loss_trace,
    })
}

/// Trains every member in parallel and returns them in index order.
pub fn train_ensemble(cfg: &EnsembleConfig, data: &TrainingSet, master_seed: u64) -> Result<EnsembleModel> {
    cfg.validate()?;
    if data.y.cols() != cfg.spec.n_labels {
        return Err(Error::Config {
            field: "spec.n_labels",
            msg: format!("{} labels configured, data has {}", cfg.spec.n_labels, data.y.cols()),
        });
    }
    let master = RngStream::from_seed(master_seed);
    let members = (0..cfg.members)
        .into_par_iter()
        .map(|i| train_member(cfg, data, i, &master))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel {
        members,
        fusion: FusionRule::Average,
        external_weight: 0.0,
        master_seed,
    })
}

impl EnsembleModel {
    pub fn n_labels(&self) -> usize {
        self.members[0].net.spec.n_labels
    }

    /// Per-member confidences for raw `n x d` features.
    pub fn member_scores(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.members.par_iter().map(|m| m.net.predict(x)).collect()
    }

    /// Fused confidences in `[0, 1]`.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        match self.fusion {
            FusionRule::Average => fuse_average(&self.member_scores(x)?),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            master_seed: self.master_seed,
            fusion: self.fusion,
            external_weight: self.external_weight,
            members: self
                .members
                .iter()
                .map(|m| MemberRecord {
                    spec: m.net.spec.clone(),
                    input_dim: m.net.input_dim,
                    optimizers: m.optimizers.clone(),
                    tensors: m
                        .net
                        .named_state()
                        .into_iter()
                        .map(|(name, t)| TensorRecord {
                            name,
                            shape: t.shape().to_vec(),
                            values: t.into_data(),
                        })
                        .collect(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::invalid(format!("unsupported model format `{}`", file.format)));
        }
        if file.members.is_empty() {
            return Err(Error::invalid("model has no members"));
        }
        let mut members = Vec::with_capacity(file.members.len());
        for rec in file.members {
            // Parameters are overwritten below, so the init stream is irrelevant.
            let mut net = build_network(&rec.spec, rec.input_dim, &mut RngStream::from_seed(0))?;
            let state = rec
                .tensors
                .into_iter()
                .map(|t| Ok((t.name, Tensor::new(t.shape, t.values)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            net.load_state(&state)?;
            if rec.optimizers.len() != net.n_trainable_layers() {
                return Err(Error::invalid("optimizer tags do not match the trainable layers"));
            }
            members.push(Member {
                net,
                optimizers: rec.optimizers,
                loss_trace: Vec::new(),
            });
        }
        let l = members[0].net.spec.n_labels;
        if members.iter().any(|m| m.net.spec.n_labels != l) {
            return Err(Error::invalid("members disagree on the label count"));
        }
        Ok(Self {
            members,
            fusion: file.fusion,
            external_weight: file.external_weight,
            master_seed: file.master_seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    master_seed: u64,
    fusion: FusionRule,
    external_weight: f64,
    members: Vec<MemberRecord>,
}

#[derive(Serialize, Deserialize)]
struct MemberRecord {
    spec: NetworkSpec,
    input_dim: usize,
    optimizers: Vec<Variant>,
    tensors: Vec<TensorRecord>,
}

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}
