//! Network construction, training, and score fusion.

mod fusion;
mod model;
mod network;
mod train;

pub use fusion::{fuse_average, fuse_weighted_external, fused_threshold, normalize_enn, NORMALIZED_THRESHOLD};
pub use model::{train_ensemble, train_member, EnsembleConfig, EnsembleModel, FusionRule, Member, MODEL_FORMAT};
pub use network::{build_network, InputEncoding, Layer, LayerCache, LayerKind, Network, NetworkSpec, Topology};
pub use train::{
    assign_optimizers, assign_optimizers_stochastic, build_optimizer_states, train_network, OptimizerPolicy,
    TrainConfig,
};
