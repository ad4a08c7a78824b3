//! The five network topologies and their layer graphs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    batchnorm_apply, batchnorm_backward, conv1d_backward, conv1d_forward, dense_backward,
    dense_forward, dropout, dropout_backward, gru_backward, gru_forward, maxpool_time_backward,
    maxpool_time_forward, relu, relu_backward, sigmoid, sigmoid_backward, BatchNormCache,
    BatchNormParams, ConvCache, ConvParams, DenseCache, DenseParams, GruCache, GruParams,
    MaxPoolCache, Mode, BN_PARAM_NAMES, CONV_PARAM_NAMES, DENSE_PARAM_NAMES, GRU_PARAM_NAMES,
};
use crate::numerics::{RngStream, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    #[serde(rename = "GRU_A")]
    GruA,
    #[serde(rename = "GRU_B")]
    GruB,
    #[serde(rename = "TCN_A")]
    TcnA,
    #[serde(rename = "TCN_B")]
    TcnB,
    #[serde(rename = "GRU_TCN")]
    GruTcn,
}

impl Topology {
    pub const ALL: [Topology; 5] = [
        Topology::GruA,
        Topology::GruB,
        Topology::TcnA,
        Topology::TcnB,
        Topology::GruTcn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Topology::GruA => "GRU_A",
            Topology::GruB => "GRU_B",
            Topology::TcnA => "TCN_A",
            Topology::TcnB => "TCN_B",
            Topology::GruTcn => "GRU_TCN",
        }
    }

    /// GRU-family topologies train for 150 epochs, TCN-family for 100.
    pub fn default_epochs(self) -> usize {
        match self {
            Topology::TcnA | Topology::TcnB => 100,
            Topology::GruA | Topology::GruB | Topology::GruTcn => 150,
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Topology::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(&norm))
            .ok_or_else(|| Error::invalid(format!("unknown topology `{s}`")))
    }
}

/// How a flat feature vector is presented to the sequence models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputEncoding {
    /// `d` time steps of one channel each.
    #[default]
    SequenceOfScalars,
    /// One time step of `d` channels.
    SingleStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub topology: Topology,
    pub hidden_units: usize,
    pub tcn_filters: usize,
    pub tcn_blocks: usize,
    pub kernel_width: usize,
    pub dropout: f64,
    pub pre_conv_filters: usize,
    pub n_labels: usize,
    pub input_encoding: InputEncoding,
}

impl NetworkSpec {
    /// Full-size hyperparameters: 50 GRU units, four TCN blocks of 175
    /// filters with width 3, dropout 0.05 and a 32-filter pre-convolution.
    pub fn new(topology: Topology, n_labels: usize) -> Self {
        Self {
            topology,
            hidden_units: 50,
            tcn_filters: 175,
            tcn_blocks: 4,
            kernel_width: 3,
            dropout: 0.05,
            pre_conv_filters: 32,
            n_labels,
            input_encoding: InputEncoding::SequenceOfScalars,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden_units", self.hidden_units),
            ("tcn_filters", self.tcn_filters),
            ("tcn_blocks", self.tcn_blocks),
            ("pre_conv_filters", self.pre_conv_filters),
            ("n_labels", self.n_labels),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("network spec: {name} must be >= 1")));
            }
        }
        if self.kernel_width.is_multiple_of(2) {
            return Err(Error::invalid("network spec: kernel_width must be odd"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("network spec: dropout must lie in [0, 1)"));
        }
        Ok(())
    }

    /// `(T, C)` of the sequence a `d`-dimensional feature vector becomes.
    pub fn sequence_shape(&self, d: usize) -> (usize, usize) {
        match self.input_encoding {
            InputEncoding::SequenceOfScalars => (d, 1),
            InputEncoding::SingleStep => (1, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerKind {
    Gru(GruParams),
    Conv(ConvParams),
    BatchNorm(BatchNormParams),
    Dense(DenseParams),
    Relu,
    Sigmoid,
    Dropout(f64),
    MaxPoolTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
}

impl Layer {
    fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(
            self.kind,
            LayerKind::Gru(_) | LayerKind::Conv(_) | LayerKind::BatchNorm(_) | LayerKind::Dense(_)
        )
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match &self.kind {
            LayerKind::Gru(_) => &GRU_PARAM_NAMES,
            LayerKind::Conv(_) => &CONV_PARAM_NAMES,
            LayerKind::BatchNorm(_) => &BN_PARAM_NAMES,
            LayerKind::Dense(_) => &DENSE_PARAM_NAMES,
            _ => &[],
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match &self.kind {
            LayerKind::Gru(p) => p.tensors().to_vec(),
            LayerKind::Conv(p) => vec![&p.kernels, &p.bias],
            LayerKind::BatchNorm(p) => vec![&p.gamma, &p.beta],
            LayerKind::Dense(p) => vec![&p.weights, &p.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match &mut self.kind {
            LayerKind::Gru(p) => p.tensors_mut().into_iter().collect(),
            LayerKind::Conv(p) => vec![&mut p.kernels, &mut p.bias],
            LayerKind::BatchNorm(p) => vec![&mut p.gamma, &mut p.beta],
            LayerKind::Dense(p) => vec![&mut p.weights, &mut p.bias],
            _ => Vec::new(),
        }
    }

    /// Parameters plus non-trainable buffers (batch-norm running statistics).
    fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let names = self.param_names();
        if !matches!(self.kind, LayerKind::BatchNorm(_)) {
            let params = self.params_mut();
            return names.iter().copied().zip(params).collect();
        }
        if let LayerKind::BatchNorm(p) = &mut self.kind {
            return vec![
                ("gamma", &mut p.gamma),
                ("beta", &mut p.beta),
                ("running_mean", &mut p.running_mean),
                ("running_var", &mut p.running_var),
            ];
        }
        Vec::new()
    }
}

/// Per-layer intermediates from one forward pass.
#[derive(Debug, Clone)]
pub enum LayerCache {
    Gru(GruCache),
    Conv(ConvCache),
    BatchNorm(BatchNormCache),
    Dense(DenseCache),
    Relu(Tensor),
    Sigmoid(Tensor),
    Dropout(Option<Tensor>),
    MaxPoolTime(MaxPoolCache),
}

/// A feed-forward chain of layers ending in a sigmoid over `n_labels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

/// Builds and initializes the layer graph of `spec` for `input_dim` features.
pub fn build_network(spec: &NetworkSpec, input_dim: usize, rng: &mut RngStream) -> Result<Network> {
    spec.validate()?;
    if input_dim == 0 {
        return Err(Error::invalid("network input dimension must be >= 1"));
    }
    let (_, channels) = spec.sequence_shape(input_dim);
    let l = spec.n_labels;
    let n = spec.hidden_units;
    let mut layers = Vec::new();

    let tcn_stack = |layers: &mut Vec<Layer>, mut cin: usize, rng: &mut RngStream| -> Result<usize> {
        for block in 1..=spec.tcn_blocks {
            let dilation = 1usize << (block - 1);
            for half in 1..=2 {
                layers.push(Layer::new(
                    format!("tcn{block}.conv{half}"),
                    LayerKind::Conv(ConvParams::init(cin, spec.tcn_filters, spec.kernel_width, dilation, rng)?),
                ));
                layers.push(Layer::new(format!("tcn{block}.relu{half}"), LayerKind::Relu));
                layers.push(Layer::new(
                    format!("tcn{block}.bn{half}"),
                    LayerKind::BatchNorm(BatchNormParams::new(spec.tcn_filters)),
                ));
                cin = spec.tcn_filters;
            }
            layers.push(Layer::new(format!("tcn{block}.dropout"), LayerKind::Dropout(spec.dropout)));
        }
        Ok(cin)
    };

    match spec.topology {
        Topology::GruA => {
            layers.push(Layer::new("gru", LayerKind::Gru(GruParams::init(channels, n, rng))));
            layers.push(Layer::new("pool", LayerKind::MaxPoolTime));
            layers.push(Layer::new("dense", LayerKind::Dense(DenseParams::init(n, l, rng))));
            layers.push(Layer::new("sigmoid", LayerKind::Sigmoid));
        }
        Topology::GruB => {
            let f = spec.pre_conv_filters;
            layers.push(Layer::new(
                "preconv",
                LayerKind::Conv(ConvParams::init(channels, f, spec.kernel_width, 1, rng)?),
            ));
            layers.push(Layer::new("prebn", LayerKind::BatchNorm(BatchNormParams::new(f))));
            layers.push(Layer::new("gru", LayerKind::Gru(GruParams::init(f, n, rng))));
            layers.push(Layer::new("pool", LayerKind::MaxPoolTime));
            layers.push(Layer::new("dense", LayerKind::Dense(DenseParams::init(n, l, rng))));
            layers.push(Layer::new("sigmoid", LayerKind::Sigmoid));
        }
        Topology::TcnA | Topology::TcnB => {
            let mut cin = channels;
            if spec.topology == Topology::TcnB {
                let f = spec.pre_conv_filters;
                layers.push(Layer::new(
                    "preconv",
                    LayerKind::Conv(ConvParams::init(cin, f, spec.kernel_width, 1, rng)?),
                ));
                cin = f;
            }
            let cout = tcn_stack(&mut layers, cin, rng)?;
            layers.push(Layer::new("dense", LayerKind::Dense(DenseParams::init(cout, l, rng))));
            layers.push(Layer::new("pool", LayerKind::MaxPoolTime));
            layers.push(Layer::new("sigmoid", LayerKind::Sigmoid));
        }
        Topology::GruTcn => {
            layers.push(Layer::new("gru", LayerKind::Gru(GruParams::init(channels, n, rng))));
            layers.push(Layer::new("gru.dense", LayerKind::Dense(DenseParams::init(n, l, rng))));
            layers.push(Layer::new("gru.sigmoid", LayerKind::Sigmoid));
            let cout = tcn_stack(&mut layers, l, rng)?;
            layers.push(Layer::new("dense", LayerKind::Dense(DenseParams::init(cout, l, rng))));
            layers.push(Layer::new("pool", LayerKind::MaxPoolTime));
            layers.push(Layer::new("sigmoid", LayerKind::Sigmoid));
        }
    }

    Ok(Network {
        spec: spec.clone(),
        input_dim,
        layers,
    })
}

impl Network {
    /// Reshapes `n x d` features into the network's `n x T x C` input.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        if x.ndim() != 2 || x.cols() != self.input_dim {
            return Err(Error::shape("Network::encode", &[x.shape()[0], self.input_dim], x.shape()));
        }
        let (t, c) = self.spec.sequence_shape(self.input_dim);
        x.clone().reshape(&[x.rows(), t, c])
    }

    pub fn trainable_layers(&self) -> impl Iterator<Item = &Layer> {
        self.layers.iter().filter(|l| l.is_trainable())
    }

    pub fn n_trainable_layers(&self) -> usize {
        self.trainable_layers().count()
    }

    /// All trainable tensors, in layer order.
    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// `(layer.param, tensor)` for every parameter and buffer.
    pub fn named_state(&self) -> Vec<(String, Tensor)> {
        let mut clone = self.clone();
        clone
            .layers
            .iter_mut()
            .flat_map(|l| {
                let lname = l.name.clone();
                l.state_mut()
                    .into_iter()
                    .map(move |(p, t)| (format!("{lname}.{p}"), t.clone()))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Overwrites parameters and buffers from a name-to-tensor map. Every
    /// entry of the network must be present with a matching shape.
    pub fn load_state(&mut self, state: &BTreeMap<String, Tensor>) -> Result<()> {
        for layer in &mut self.layers {
            let lname = layer.name.clone();
            for (p, t) in layer.state_mut() {
                let key = format!("{lname}.{p}");
                let src = state
                    .get(&key)
                    .ok_or_else(|| Error::invalid(format!("missing tensor `{key}`")))?;
                if src.shape() != t.shape() {
                    return Err(Error::shape("Network::load_state", t.shape(), src.shape()));
                }
                *t = src.clone();
            }
        }
        Ok(())
    }

    /// Forward pass on an encoded `B x T x C` batch. In train mode batch-norm
    /// running statistics are updated and dropout draws from `rng`.
    pub fn forward(
        &mut self,
        x: &Tensor,
        mode: Mode,
        rng: &mut RngStream,
    ) -> Result<(Tensor, Vec<LayerCache>)> {
        let (out, caches) = self.forward_inner(x, mode, Some(rng))?;
        if mode == Mode::Train {
            for (layer, cache) in self.layers.iter_mut().zip(&caches) {
                if let (LayerKind::BatchNorm(p), LayerCache::BatchNorm(c)) = (&mut layer.kind, cache) {
                    p.update_running_stats(c);
                }
            }
        }
        Ok((out, caches))
    }

    /// Eval-mode confidences (`n x l`) for raw `n x d` features.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let enc = self.encode(x)?;
        Ok(self.forward_inner(&enc, Mode::Eval, None)?.0)
    }

    fn forward_inner(
        &self,
        x: &Tensor,
        mode: Mode,
        mut rng: Option<&mut RngStream>,
    ) -> Result<(Tensor, Vec<LayerCache>)> {
        let mut act = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = match &layer.kind {
                LayerKind::Gru(p) => {
                    let (y, c) = gru_forward(p, &act, None)?;
                    (y, LayerCache::Gru(c))
                }
                LayerKind::Conv(p) => {
                    let (y, c) = conv1d_forward(p, &act)?;
                    (y, LayerCache::Conv(c))
                }
                LayerKind::BatchNorm(p) => {
                    let (y, c) = batchnorm_apply(p, &act, mode)?;
                    (y, LayerCache::BatchNorm(c))
                }
                LayerKind::Dense(p) => {
                    let (y, c) = dense_forward(p, &act)?;
                    (y, LayerCache::Dense(c))
                }
                LayerKind::Relu => (relu(&act), LayerCache::Relu(act)),
                LayerKind::Sigmoid => {
                    let y = sigmoid(&act);
                    (y.clone(), LayerCache::Sigmoid(y))
                }
                LayerKind::Dropout(p) => {
                    let (y, mask) = match rng.as_deref_mut() {
                        Some(r) => dropout(&act, *p, r, mode)?,
                        None => (act.clone(), None),
                    };
                    (y, LayerCache::Dropout(mask))
                }
                LayerKind::MaxPoolTime => {
                    let (y, c) = maxpool_time_forward(&act)?;
                    (y, LayerCache::MaxPoolTime(c))
                }
            };
            act = next;
            caches.push(cache);
        }
        act.ensure_finite("network output")?;
        Ok((act, caches))
    }

    /// Backpropagates `upstream` (gradient w.r.t. the output) and returns the
    /// parameter gradients in [`Network::params`] order plus the input gradient.
    pub fn backward(&self, caches: &[LayerCache], upstream: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        if caches.len() != self.layers.len() {
            return Err(Error::invalid("cache does not match the network"));
        }
        let mut grad = upstream.clone();
        let mut per_layer: Vec<Vec<Tensor>> = vec![Vec::new(); self.layers.len()];
        for (idx, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            grad = match (&layer.kind, cache) {
                (LayerKind::Gru(p), LayerCache::Gru(c)) => {
                    let g = gru_backward(p, c, &grad)?;
                    per_layer[idx] = g.params;
                    g.input
                }
                (LayerKind::Conv(p), LayerCache::Conv(c)) => {
                    let g = conv1d_backward(p, c, &grad)?;
                    per_layer[idx] = g.params;
                    g.input
                }
                (LayerKind::BatchNorm(p), LayerCache::BatchNorm(c)) => {
                    let g = batchnorm_backward(p, c, &grad)?;
                    per_layer[idx] = g.params;
                    g.input
                }
                (LayerKind::Dense(p), LayerCache::Dense(c)) => {
                    let g = dense_backward(p, c, &grad)?;
                    per_layer[idx] = g.params;
                    g.input
                }
                (LayerKind::Relu, LayerCache::Relu(x)) => relu_backward(x, &grad)?,
                (LayerKind::Sigmoid, LayerCache::Sigmoid(y)) => sigmoid_backward(y, &grad)?,
                (LayerKind::Dropout(_), LayerCache::Dropout(mask)) => dropout_backward(mask.as_ref(), &grad)?,
                (LayerKind::MaxPoolTime, LayerCache::MaxPoolTime(c)) => maxpool_time_backward(c, &grad)?,
                _ => return Err(Error::invalid(format!("cache kind mismatch at layer `{}`", layer.name))),
            };
        }
        Ok((per_layer.into_iter().flatten().collect(), grad))
    }
}
