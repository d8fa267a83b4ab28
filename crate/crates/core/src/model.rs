//! The link predictor: input projection, stacked sum+max message passing
//! layers, mean readout and a three layer MLP head with a sigmoid output.
//!
//! ```text
//! h0      = relu(X W0 + b0)
//! h(k)    = phi_k(concat(h(k-1), sum_nbr h(k-1) + max_nbr h(k-1)))
//! r       = mean over the nodes of the pair graph of h(K)
//! p       = sigmoid(L3(relu(L2(relu(L1(r))))))
//! ```
//!
//! Parameters live in one flat list in a fixed declared order (see
//! [`ModelConfig::param_shapes`]); the optimizer and checkpoint code rely on
//! that order.

use std::ops::Range;
use std::sync::Arc;

use rand::Rng;

use crate::autodiff::{Adjacency, Real, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng;
pub use crate::subgraph::FeatureMode;
use crate::subgraph::FeaturizedGraph;

/// How node states are pooled into the graph representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Readout {
    /// Mean over every node of the pair graph.
    #[default]
    Mean,
    /// Mean of each star separately, concatenated (head input is `2 * hidden`).
    PerStar,
}

impl Readout {
    pub fn code(self) -> u32 {
        match self {
            Readout::Mean => 0,
            Readout::PerStar => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Readout::Mean),
            1 => Some(Readout::PerStar),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub features: FeatureMode,
    pub hidden_dim: usize,
    pub num_layers: usize,
    /// Number of linear+relu blocks inside each layer's update MLP.
    pub phi_depth: usize,
    /// Output widths of the three head layers; the last must be 1.
    pub head_dims: [usize; 3],
    pub readout: Readout,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            features: FeatureMode::default(),
            hidden_dim: 64,
            num_layers: 3,
            phi_depth: 1,
            head_dims: [64, 32, 1],
            readout: Readout::Mean,
        }
    }
}

impl ModelConfig {
    pub fn input_dim(&self) -> usize {
        self.features.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 || self.phi_depth == 0 {
            return Err(Error::BadParameter("layers, hidden width and phi depth must be >= 1".into()));
        }
        if self.head_dims.iter().any(|&d| d == 0) || self.head_dims[2] != 1 {
            return Err(Error::BadParameter(format!(
                "head widths {:?} must be >= 1 and end in 1",
                self.head_dims
            )));
        }
        Ok(())
    }

    fn head_input_dim(&self) -> usize {
        match self.readout {
            Readout::Mean => self.hidden_dim,
            Readout::PerStar => 2 * self.hidden_dim,
        }
    }

    /// Shapes of all parameter tensors in declared order: input projection,
    /// then each layer's update blocks, then the three head layers. Every
    /// weight is followed by its bias.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let d = self.hidden_dim;
        let mut shapes = vec![vec![self.input_dim(), d], vec![d]];
        for _ in 0..self.num_layers {
            for j in 0..self.phi_depth {
                let fan_in = if j == 0 { 2 * d } else { d };
                shapes.push(vec![fan_in, d]);
                shapes.push(vec![d]);
            }
        }
        let mut fan_in = self.head_input_dim();
        for &w in &self.head_dims {
            shapes.push(vec![fan_in, w]);
            shapes.push(vec![w]);
            fan_in = w;
        }
        shapes
    }

    fn layer_range(&self, k: usize) -> Range<usize> {
        let start = 2 + 2 * k * self.phi_depth;
        start..start + 2 * self.phi_depth
    }

    fn head_start(&self) -> usize {
        2 + 2 * self.num_layers * self.phi_depth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S = f32> {
    config: ModelConfig,
    tensors: Vec<Tensor<S>>,
}

impl<S: Real> ModelParams<S> {
    /// Wraps tensors after checking them against `config`.
    pub fn new(config: ModelConfig, tensors: Vec<Tensor<S>>) -> Result<Self> {
        config.validate()?;
        let shapes = config.param_shapes();
        if shapes.len() != tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter tensors, config needs {}",
                tensors.len(),
                shapes.len()
            )));
        }
        for (i, (s, t)) in shapes.iter().zip(&tensors).enumerate() {
            if s.as_slice() != t.shape() {
                return Err(Error::ShapeMismatch(format!("parameter {i}: {:?} vs {:?}", t.shape(), s)));
            }
        }
        Ok(ModelParams { config, tensors })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let tensors = config.param_shapes().iter().map(|s| Tensor::zeros(s)).collect();
        Ok(ModelParams { config, tensors })
    }

    /// Glorot-uniform weights, zero biases; deterministic per seed.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream_rng(rng::INIT, seed, 0);
        let tensors = config
            .param_shapes()
            .iter()
            .map(|shape| {
                if shape.len() == 1 {
                    return Tensor::zeros(shape);
                }
                let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                let data = (0..shape[0] * shape[1])
                    .map(|_| S::from_f64_lossy(rng.gen_range(-limit..limit)))
                    .collect();
                Tensor::new(shape.clone(), data).expect("shape matches data")
            })
            .collect();
        Ok(ModelParams { config, tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor<S>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<S>] {
        &mut self.tensors
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<T: Real>(&self) -> ModelParams<T> {
        ModelParams { config: self.config, tensors: self.tensors.iter().map(Tensor::cast).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Records every parameter as a tape leaf, in declared order.
    pub fn to_tape(&self, tape: &mut Tape<S>) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t.clone())).collect()
    }
}

/// Several pair graphs stacked into one block-diagonal graph.
#[derive(Debug, Clone)]
pub struct GraphBatch<S = f32> {
    features: Tensor<S>,
    adjacency: Arc<Adjacency>,
    graphs: Vec<Range<usize>>,
    attacker_stars: Vec<Range<usize>>,
    target_stars: Vec<Range<usize>>,
}

impl<S: Real> GraphBatch<S> {
    pub fn new(graphs: &[&FeaturizedGraph]) -> Result<Self> {
        let Some(first) = graphs.first() else {
            return Err(Error::EmptyInput);
        };
        let dim = first.feature_dim;
        let total: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let mut data = Vec::with_capacity(total * dim);
        let mut edges = Vec::new();
        let mut ranges = Vec::with_capacity(graphs.len());
        let mut attacker_stars = Vec::with_capacity(graphs.len());
        let mut target_stars = Vec::with_capacity(graphs.len());
        let mut offset = 0usize;
        for g in graphs {
            if g.feature_dim != dim || g.node_features.len() != g.num_nodes() * dim {
                return Err(Error::ShapeMismatch("inconsistent feature width in batch".into()));
            }
            data.extend(g.node_features.iter().map(|&v| S::from_f64_lossy(v as f64)));
            edges.extend(g.adjacency.iter().map(|&(i, j)| (i + offset as u32, j + offset as u32)));
            let n = g.num_nodes();
            let split = offset + g.attacker_star_len();
            ranges.push(offset..offset + n);
            attacker_stars.push(offset..split);
            target_stars.push(split..offset + n);
            offset += n;
        }
        Ok(GraphBatch {
            features: Tensor::new(vec![total, dim], data)?,
            adjacency: Arc::new(Adjacency::from_edges(total, &edges)?),
            graphs: ranges,
            attacker_stars,
            target_stars,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }
}

/// One message passing layer: `phi(concat(h, sum+max of neighbours))`, where
/// `phi` is the `(weight, bias)` chain in `phi`, each followed by relu.
pub fn hagnet_layer<S: Real>(
    tape: &mut Tape<S>,
    h: Var,
    adj: &Arc<Adjacency>,
    phi: &[(Var, Var)],
) -> Result<Var> {
    let agg = tape.neighbor_sum_max(h, adj)?;
    let mut x = tape.concat_cols(h, agg)?;
    for &(w, b) in phi {
        let z = tape.linear(x, w, b)?;
        x = tape.relu(z)?;
    }
    Ok(x)
}

/// Link probabilities `[graphs x 1]` for every graph in `batch`; `params`
/// are the tape leaves returned by [`ModelParams::to_tape`].
pub fn forward_on_tape<S: Real>(
    config: &ModelConfig,
    tape: &mut Tape<S>,
    params: &[Var],
    batch: &GraphBatch<S>,
) -> Result<Var> {
    if params.len() != config.param_shapes().len() {
        return Err(Error::ShapeMismatch(format!("{} parameter handles", params.len())));
    }
    let x = tape.leaf(batch.features.clone());
    let z = tape.linear(x, params[0], params[1])?;
    let mut h = tape.relu(z)?;
    for k in 0..config.num_layers {
        let r = config.layer_range(k);
        let phi: Vec<(Var, Var)> = params[r].chunks(2).map(|c| (c[0], c[1])).collect();
        h = hagnet_layer(tape, h, &batch.adjacency, &phi)?;
    }
    let mut r = match config.readout {
        Readout::Mean => tape.segment_mean(h, batch.graphs.clone())?,
        Readout::PerStar => {
            let a = tape.segment_mean(h, batch.attacker_stars.clone())?;
            let t = tape.segment_mean(h, batch.target_stars.clone())?;
            tape.concat_cols(a, t)?
        }
    };
    let head = config.head_start();
    for l in 0..3 {
        r = tape.linear(r, params[head + 2 * l], params[head + 2 * l + 1])?;
        if l < 2 {
            r = tape.relu(r)?;
        }
    }
    tape.sigmoid(r)
}

/// Link probability for a single pair graph.
pub fn forward<S: Real>(params: &ModelParams<S>, g: &FeaturizedGraph) -> Result<f64> {
    Ok(predict(params, &[g])?[0])
}

/// Link probabilities for a slice of graphs, evaluated in one batch.
pub fn predict<S: Real>(params: &ModelParams<S>, graphs: &[&FeaturizedGraph]) -> Result<Vec<f64>> {
    if graphs.is_empty() {
        return Ok(Vec::new());
    }
    check_feature_dim(params, graphs)?;
    let batch = GraphBatch::new(graphs)?;
    let mut tape = Tape::new();
    let vars = params.to_tape(&mut tape);
    let out = forward_on_tape(params.config(), &mut tape, &vars, &batch)?;
    Ok(tape.value(out).data().iter().map(|v| v.as_f64()).collect())
}

/// Mean cross-entropy over `batch` and its gradient for every parameter
/// tensor (declared order). Labels are 0/1.
pub fn loss_and_grads<S: Real>(
    params: &ModelParams<S>,
    batch: &GraphBatch<S>,
    labels: &[f64],
) -> Result<(f64, Vec<Tensor<S>>)> {
    let mut tape = Tape::new();
    let vars = params.to_tape(&mut tape);
    let p = forward_on_tape(params.config(), &mut tape, &vars, batch)?;
    let loss = tape.bce_mean(p, labels)?;
    let value = tape.value(loss).data()[0].as_f64();
    let mut grads = tape.backward(loss)?;
    Ok((value, grads.take(&vars)))
}

fn check_feature_dim<S: Real>(params: &ModelParams<S>, graphs: &[&FeaturizedGraph]) -> Result<()> {
    let want = params.config().input_dim();
    match graphs.iter().find(|g| g.feature_dim != want) {
        Some(g) => Err(Error::ShapeMismatch(format!(
            "graph has {} input features, model expects {want}",
            g.feature_dim
        ))),
        None => Ok(()),
    }
}
