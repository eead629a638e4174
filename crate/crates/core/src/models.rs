//! DBGNN and GCN architectures, training and inductive prediction.
//!
//! Both models take one-hot node identities as input features. Their index
//! spaces come from a [`Registry`] built over the training and the test
//! window, so a model trained on one window can be applied to the other.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::centrality::Measure;
use crate::debruijn::DeBruijnGraph;
use crate::error::{invalid, Error, Result};
use crate::graph::{NodeId, TemporalGraph};
use crate::nn::{
    conv_backward, conv_forward, linear_backward, linear_forward, masked_mse, normalize_sparse,
    Activation, Adam, DenseMatrix, Features, LayerCache, LayerGrads, LayerParams, SparseMatrix,
};

/// Width of the per-order graph convolutions.
pub const HIDDEN: usize = 16;
/// Width of the bipartite layer, i.e. of exported embeddings.
pub const EMBEDDING: usize = 8;

/// Shared index space over the first- and higher-order nodes of several
/// windows. Order one always covers every first-order node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RegistryData", into = "RegistryData")]
pub struct Registry {
    node_count: usize,
    orders: Vec<Vec<Vec<NodeId>>>,
    index: Vec<HashMap<Vec<NodeId>, usize>>,
}

#[derive(Serialize, Deserialize)]
struct RegistryData {
    node_count: usize,
    orders: Vec<Vec<Vec<NodeId>>>,
}

impl From<RegistryData> for Registry {
    fn from(d: RegistryData) -> Self {
        Registry::from_orders(d.node_count, d.orders)
    }
}

impl From<Registry> for RegistryData {
    fn from(r: Registry) -> Self {
        RegistryData {
            node_count: r.node_count,
            orders: r.orders,
        }
    }
}

impl Registry {
    fn from_orders(node_count: usize, orders: Vec<Vec<Vec<NodeId>>>) -> Self {
        let index = orders
            .iter()
            .map(|seqs| {
                seqs.iter()
                    .enumerate()
                    .map(|(i, s)| (s.clone(), i))
                    .collect()
            })
            .collect();
        Self {
            node_count,
            orders,
            index,
        }
    }

    /// Union of the higher-order nodes of every window, sorted per order.
    /// Each window lists its De Bruijn graphs of orders `1..=K`.
    pub fn build(node_count: usize, windows: &[&[DeBruijnGraph]]) -> Result<Self> {
        let max_order = windows.first().map_or(0, |w| w.len());
        if max_order == 0 {
            return Err(Error::Registry("no De Bruijn graphs given".into()));
        }
        let mut orders: Vec<Vec<Vec<NodeId>>> = vec![(0..node_count).map(|v| vec![v]).collect()];
        for k in 2..=max_order {
            let mut seqs = Vec::new();
            for w in windows {
                if w.len() != max_order {
                    return Err(Error::Registry(format!(
                        "windows disagree on the maximum order ({} vs {max_order})",
                        w.len()
                    )));
                }
                seqs.extend(w[k - 1].nodes().iter().cloned());
            }
            seqs.sort();
            seqs.dedup();
            orders.push(seqs);
        }
        for w in windows {
            for (k, dbg) in w.iter().enumerate() {
                if dbg.order() != k + 1 {
                    return Err(Error::Registry(format!(
                        "graph at position {k} has order {}",
                        dbg.order()
                    )));
                }
                if let Some(seq) = dbg.nodes().iter().flatten().find(|&&v| v >= node_count) {
                    return Err(Error::Registry(format!(
                        "node {seq} outside 0..{node_count}"
                    )));
                }
            }
        }
        Ok(Self::from_orders(node_count, orders))
    }

    pub fn max_order(&self) -> usize {
        self.orders.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of slots of order `k` (1-based).
    pub fn len(&self, k: usize) -> usize {
        self.orders[k - 1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_count == 0
    }

    pub fn nodes(&self, k: usize) -> &[Vec<NodeId>] {
        &self.orders[k - 1]
    }

    pub fn index_of(&self, seq: &[NodeId]) -> Option<usize> {
        self.index.get(seq.len().checked_sub(1)?)?.get(seq).copied()
    }

    fn slot(&self, seq: &[NodeId]) -> Result<usize> {
        self.index_of(seq)
            .ok_or_else(|| Error::Registry(format!("sequence {seq:?} has no registry slot")))
    }
}

/// How the bipartite layer combines the higher-order messages that arrive at
/// a first-order node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
}

impl std::fmt::Display for Aggregation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Sum => "sum",
        })
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "sum" => Ok(Aggregation::Sum),
            other => Err(invalid(format!("unknown aggregation `{other}`"))),
        }
    }
}

/// One window's De Bruijn graphs mapped into registry index space.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowGraphs {
    /// Normalized propagation matrix per order.
    pub propagation: Vec<SparseMatrix>,
    /// Per order, `first-order nodes x order-k slots`: which higher-order
    /// nodes present in the window feed each first-order node.
    pub bipartite: Vec<SparseMatrix>,
    /// First-order nodes incident to at least one temporal edge.
    pub active: Vec<bool>,
}

impl WindowGraphs {
    pub fn new(
        registry: &Registry,
        dbgs: &[DeBruijnGraph],
        window: &TemporalGraph,
        aggregation: Aggregation,
    ) -> Result<Self> {
        if dbgs.len() != registry.max_order() {
            return Err(Error::Registry(format!(
                "expected {} De Bruijn graphs, got {}",
                registry.max_order(),
                dbgs.len()
            )));
        }
        if window.node_count() != registry.node_count() {
            return Err(Error::Registry(format!(
                "window has {} nodes, registry {}",
                window.node_count(),
                registry.node_count()
            )));
        }
        let n = registry.node_count();
        let mut propagation = Vec::with_capacity(dbgs.len());
        let mut members: Vec<Vec<(usize, usize)>> = Vec::with_capacity(dbgs.len());
        for (k, dbg) in dbgs.iter().enumerate() {
            let slots: Vec<usize> = dbg
                .nodes()
                .iter()
                .map(|s| registry.slot(s))
                .collect::<Result<_>>()?;
            // rows receive: an edge u -> v sends u's message to v
            let entries = dbg
                .edges()
                .iter()
                .map(|(&(u, v), &w)| (slots[v], slots[u], w as f64));
            propagation.push(normalize_sparse(registry.len(k + 1), entries, true)?);
            members.push(
                slots
                    .iter()
                    .enumerate()
                    .map(|(i, &slot)| (dbg.bipartite(i), slot))
                    .collect(),
            );
        }
        let mut incoming = vec![0usize; n];
        for &(v, _) in members.iter().flatten() {
            incoming[v] += 1;
        }
        let bipartite = members
            .into_iter()
            .enumerate()
            .map(|(k, m)| {
                let entries = m.into_iter().map(|(v, slot)| {
                    let w = match aggregation {
                        Aggregation::Mean => 1.0 / incoming[v] as f64,
                        Aggregation::Sum => 1.0,
                    };
                    (v, slot, w)
                });
                SparseMatrix::from_triplets(n, registry.len(k + 1), entries)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            propagation,
            bipartite,
            active: window.active_nodes(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.active.len()
    }
}

/// Layers and gradients shared by both architectures.
pub trait Model {
    fn layer_names(&self) -> Vec<String>;
    fn layers(&self) -> Vec<&LayerParams>;
    fn layers_mut(&mut self) -> Vec<&mut LayerParams>;

    /// One prediction per first-order node.
    fn forward(&self, w: &WindowGraphs) -> Result<Vec<f64>>;

    /// Loss, gradients for every layer (in [`Model::layers`] order) and
    /// predictions for one full-batch step.
    fn loss_and_grads(
        &self,
        w: &WindowGraphs,
        target: &[f64],
        mask: &[bool],
    ) -> Result<(f64, Vec<LayerGrads>, Vec<f64>)>;
}

fn column(m: &DenseMatrix) -> Vec<f64> {
    m.data().to_vec()
}

fn check_width(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::ShapeMismatch {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// De Bruijn graph neural network: a graph convolution per order, a
/// bipartite layer onto first-order nodes and a linear head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbgnnModel {
    pub convs: Vec<LayerParams>,
    pub bipartite: LayerParams,
    pub head: LayerParams,
    pub registry: Registry,
}

struct DbgnnTape {
    convs: Vec<LayerCache>,
    aggregated: DenseMatrix,
    embedding: LayerCache,
    output: LayerCache,
}

impl DbgnnModel {
    fn check(&self, w: &WindowGraphs) -> Result<()> {
        check_width("dbgnn orders", self.convs.len(), w.propagation.len())?;
        for (k, (p, a)) in self.convs.iter().zip(&w.propagation).enumerate() {
            check_width("dbgnn propagation", p.in_dim(), a.rows())?;
            check_width(
                "dbgnn bipartite",
                self.registry.len(k + 1),
                w.bipartite[k].cols(),
            )?;
        }
        check_width("dbgnn nodes", self.registry.node_count(), w.node_count())
    }

    fn tape(&self, w: &WindowGraphs) -> Result<DbgnnTape> {
        self.check(w)?;
        let convs = self
            .convs
            .iter()
            .zip(&w.propagation)
            .map(|(p, a)| conv_forward(a, Features::OneHot, p))
            .collect::<Result<Vec<_>>>()?;
        let mut aggregated = DenseMatrix::zeros(w.node_count(), HIDDEN);
        for (b, c) in w.bipartite.iter().zip(&convs) {
            aggregated.add_assign(&b.matmul(&c.output)?)?;
        }
        let embedding = linear_forward(
            Features::Dense(&aggregated),
            w.node_count(),
            &self.bipartite,
        )?;
        let output = linear_forward(
            Features::Dense(&embedding.output),
            w.node_count(),
            &self.head,
        )?;
        Ok(DbgnnTape {
            convs,
            aggregated,
            embedding,
            output,
        })
    }

    /// Bipartite-layer activations, `first-order nodes x 8`.
    pub fn embeddings(&self, w: &WindowGraphs) -> Result<DenseMatrix> {
        Ok(self.tape(w)?.embedding.output)
    }
}

/// Initializes a DBGNN for the registry's orders; `dbgs` are the training
/// window's graphs and only fix the order count.
pub fn build_dbgnn(dbgs: &[DeBruijnGraph], registry: &Registry, seed: u64) -> Result<DbgnnModel> {
    if dbgs.len() != registry.max_order() {
        return Err(Error::Registry(format!(
            "{} De Bruijn graphs for a registry of order {}",
            dbgs.len(),
            registry.max_order()
        )));
    }
    if let Some((k, g)) = dbgs.iter().enumerate().find(|(k, g)| g.order() != k + 1) {
        return Err(invalid(format!(
            "graph at position {k} has order {}",
            g.order()
        )));
    }
    let convs = (1..=registry.max_order())
        .map(|k| LayerParams::glorot(registry.len(k), HIDDEN, Activation::Sigmoid, seed, k as u64))
        .collect();
    Ok(DbgnnModel {
        convs,
        bipartite: LayerParams::glorot(HIDDEN, EMBEDDING, Activation::Elu, seed, 100),
        head: LayerParams::glorot(EMBEDDING, 1, Activation::Elu, seed, 101),
        registry: registry.clone(),
    })
}

/// Forward pass of a DBGNN on one window.
pub fn dbgnn_forward(m: &DbgnnModel, w: &WindowGraphs) -> Result<Vec<f64>> {
    m.forward(w)
}

impl Model for DbgnnModel {
    fn layer_names(&self) -> Vec<String> {
        (1..=self.convs.len())
            .map(|k| format!("conv_order_{k}"))
            .chain(["bipartite".to_string(), "head".to_string()])
            .collect()
    }

    fn layers(&self) -> Vec<&LayerParams> {
        self.convs
            .iter()
            .chain([&self.bipartite, &self.head])
            .collect()
    }

    fn layers_mut(&mut self) -> Vec<&mut LayerParams> {
        self.convs
            .iter_mut()
            .chain([&mut self.bipartite, &mut self.head])
            .collect()
    }

    fn forward(&self, w: &WindowGraphs) -> Result<Vec<f64>> {
        Ok(column(&self.tape(w)?.output.output))
    }

    fn loss_and_grads(
        &self,
        w: &WindowGraphs,
        target: &[f64],
        mask: &[bool],
    ) -> Result<(f64, Vec<LayerGrads>, Vec<f64>)> {
        let tape = self.tape(w)?;
        let pred = column(&tape.output.output);
        let (loss, d_pred) = masked_mse(&pred, target, mask)?;
        let d_pred = DenseMatrix::from_vec(pred.len(), 1, d_pred)?;
        let (head, d_emb) = linear_backward(
            Features::Dense(&tape.embedding.output),
            &self.head,
            &tape.output,
            &d_pred,
            true,
        )?;
        let (bip, d_agg) = linear_backward(
            Features::Dense(&tape.aggregated),
            &self.bipartite,
            &tape.embedding,
            &d_emb.expect("requested"),
            true,
        )?;
        let d_agg = d_agg.expect("requested");
        let mut grads = Vec::with_capacity(self.convs.len() + 2);
        for ((p, cache), (a, b)) in self
            .convs
            .iter()
            .zip(&tape.convs)
            .zip(w.propagation.iter().zip(&w.bipartite))
        {
            let d_hidden = b.t_matmul(&d_agg)?;
            let (g, _) = conv_backward(a, Features::OneHot, p, cache, &d_hidden, false)?;
            grads.push(g);
        }
        grads.push(bip);
        grads.push(head);
        Ok((loss, grads, pred))
    }
}

/// Two-layer GCN on the first-order graph with a linear head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    pub conv1: LayerParams,
    pub conv2: LayerParams,
    pub head: LayerParams,
    pub node_count: usize,
}

struct GcnTape {
    h1: LayerCache,
    h2: LayerCache,
    output: LayerCache,
}

impl GcnModel {
    pub fn new(node_count: usize, seed: u64) -> Self {
        Self {
            conv1: LayerParams::glorot(node_count, HIDDEN, Activation::Sigmoid, seed, 1),
            conv2: LayerParams::glorot(HIDDEN, EMBEDDING, Activation::Elu, seed, 2),
            head: LayerParams::glorot(EMBEDDING, 1, Activation::Elu, seed, 101),
            node_count,
        }
    }

    fn tape(&self, w: &WindowGraphs) -> Result<GcnTape> {
        check_width("gcn nodes", self.node_count, w.node_count())?;
        let a = w
            .propagation
            .first()
            .ok_or_else(|| Error::Registry("window has no first-order graph".into()))?;
        let h1 = conv_forward(a, Features::OneHot, &self.conv1)?;
        let h2 = conv_forward(a, Features::Dense(&h1.output), &self.conv2)?;
        let output = linear_forward(Features::Dense(&h2.output), self.node_count, &self.head)?;
        Ok(GcnTape { h1, h2, output })
    }
}

impl Model for GcnModel {
    fn layer_names(&self) -> Vec<String> {
        ["conv_1", "conv_2", "head"].map(String::from).to_vec()
    }

    fn layers(&self) -> Vec<&LayerParams> {
        vec![&self.conv1, &self.conv2, &self.head]
    }

    fn layers_mut(&mut self) -> Vec<&mut LayerParams> {
        vec![&mut self.conv1, &mut self.conv2, &mut self.head]
    }

    fn forward(&self, w: &WindowGraphs) -> Result<Vec<f64>> {
        Ok(column(&self.tape(w)?.output.output))
    }

    fn loss_and_grads(
        &self,
        w: &WindowGraphs,
        target: &[f64],
        mask: &[bool],
    ) -> Result<(f64, Vec<LayerGrads>, Vec<f64>)> {
        let tape = self.tape(w)?;
        let a = &w.propagation[0];
        let pred = column(&tape.output.output);
        let (loss, d_pred) = masked_mse(&pred, target, mask)?;
        let d_pred = DenseMatrix::from_vec(pred.len(), 1, d_pred)?;
        let (head, d_h2) = linear_backward(
            Features::Dense(&tape.h2.output),
            &self.head,
            &tape.output,
            &d_pred,
            true,
        )?;
        let (conv2, d_h1) = conv_backward(
            a,
            Features::Dense(&tape.h1.output),
            &self.conv2,
            &tape.h2,
            &d_h2.expect("requested"),
            true,
        )?;
        let (conv1, _) = conv_backward(
            a,
            Features::OneHot,
            &self.conv1,
            &tape.h1,
            &d_h1.expect("requested"),
            false,
        )?;
        Ok((loss, vec![conv1, conv2, head], pred))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub measure: Measure,
    pub delta: f64,
    /// Highest De Bruijn order used by the DBGNN.
    pub order: usize,
    pub aggregation: Aggregation,
    /// Min-max scale training targets to `[0, 1]` and invert on prediction.
    pub scale_targets: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr: 0.01,
            weight_decay: 5e-4,
            seed: 0,
            measure: Measure::TemporalCloseness,
            delta: 1.0,
            order: 2,
            aggregation: Aggregation::Mean,
            scale_targets: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(invalid("epochs must be >= 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(invalid("weight decay must be non-negative"));
        }
        if self.order == 0 {
            return Err(invalid("order must be >= 1"));
        }
        Ok(())
    }
}

/// Affine map of training targets onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub min: f64,
    pub max: f64,
}

impl TargetScale {
    fn fit(target: &[f64], mask: &[bool]) -> Self {
        let (min, max) = target
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&t, _)| {
                (lo.min(t), hi.max(t))
            });
        Self { min, max }
    }

    fn span(&self) -> f64 {
        if self.max > self.min {
            self.max - self.min
        } else {
            1.0
        }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.min) / self.span()
    }

    pub fn inverse(&self, y: f64) -> f64 {
        y * self.span() + self.min
    }
}

/// Result of [`train`]: the per-epoch loss (before each update) and the
/// target scaling in effect, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub loss_trace: Vec<f64>,
    pub scale: Option<TargetScale>,
}

impl TrainingRun {
    pub fn final_loss(&self) -> f64 {
        self.loss_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Full-batch ADAM on the masked MSE over the window's active nodes.
pub fn train<M: Model>(
    model: &mut M,
    window: &WindowGraphs,
    targets: &[f64],
    cfg: &TrainConfig,
) -> Result<TrainingRun> {
    cfg.validate()?;
    check_width("targets", window.node_count(), targets.len())?;
    let mask = &window.active;
    if !mask.iter().any(|&m| m) {
        return Err(invalid("training window has no active nodes"));
    }
    let scale = cfg.scale_targets.then(|| TargetScale::fit(targets, mask));
    let scaled: Vec<f64> = match scale {
        Some(s) => targets.iter().map(|&y| s.forward(y)).collect(),
        None => targets.to_vec(),
    };
    let mut adam = Adam::new(cfg.lr, cfg.weight_decay);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let diverged = |loss: f64| Error::Diverged {
            epoch,
            lr: cfg.lr,
            loss,
        };
        let (loss, grads, _) = match model.loss_and_grads(window, &scaled, mask) {
            Ok(step) => step,
            Err(Error::NonFinite(_)) => return Err(diverged(f64::NAN)),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(diverged(loss));
        }
        trace.push(loss);
        match adam.step(&mut model.layers_mut(), &grads) {
            Ok(()) => {}
            Err(Error::NonFinite(_)) => return Err(diverged(loss)),
            Err(e) => return Err(e),
        }
        if model.layers().iter().any(|p| !p.is_finite()) {
            return Err(diverged(loss));
        }
    }
    Ok(TrainingRun {
        loss_trace: trace,
        scale,
    })
}

/// Predictions for every first-order node, mapped back through the target
/// scale when one was used.
pub fn predict<M: Model>(
    model: &M,
    window: &WindowGraphs,
    scale: Option<TargetScale>,
) -> Result<Vec<f64>> {
    let raw = model.forward(window)?;
    Ok(match scale {
        Some(s) => raw.into_iter().map(|y| s.inverse(y)).collect(),
        None => raw,
    })
}

/// Applies a trained model to a test window and keeps the nodes active
/// there.
pub fn predict_on_test<M: Model>(
    model: &M,
    window: &WindowGraphs,
    scale: Option<TargetScale>,
) -> Result<Vec<(NodeId, f64)>> {
    let all = predict(model, window, scale)?;
    Ok(all
        .into_iter()
        .enumerate()
        .filter(|&(v, _)| window.active[v])
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Dbgnn,
    Gcn,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Dbgnn => "dbgnn",
            Architecture::Gcn => "gcn",
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dbgnn" => Ok(Architecture::Dbgnn),
            "gcn" => Ok(Architecture::Gcn),
            other => Err(invalid(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedLayer {
    pub name: String,
    #[serde(flatten)]
    pub params: LayerParams,
}

pub const CHECKPOINT_FORMAT: &str = "tempora-checkpoint/1";

/// JSON checkpoint: named layers with shapes, plus everything needed to
/// rebuild the model around them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub architecture: Architecture,
    pub layers: Vec<NamedLayer>,
    pub registry: Registry,
    pub config: TrainConfig,
    pub scale: Option<TargetScale>,
}

impl Checkpoint {
    fn named<M: Model>(model: &M) -> Vec<NamedLayer> {
        model
            .layer_names()
            .into_iter()
            .zip(model.layers())
            .map(|(name, p)| NamedLayer {
                name,
                params: p.clone(),
            })
            .collect()
    }

    pub fn from_dbgnn(m: &DbgnnModel, config: &TrainConfig, scale: Option<TargetScale>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            architecture: Architecture::Dbgnn,
            layers: Self::named(m),
            registry: m.registry.clone(),
            config: config.clone(),
            scale,
        }
    }

    pub fn from_gcn(
        m: &GcnModel,
        registry: &Registry,
        config: &TrainConfig,
        scale: Option<TargetScale>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            architecture: Architecture::Gcn,
            layers: Self::named(m),
            registry: registry.clone(),
            config: config.clone(),
            scale,
        }
    }

    fn take(&self, expected: &[String]) -> Result<Vec<LayerParams>> {
        let names: Vec<&str> = self.layers.iter().map(|l| l.name.as_str()).collect();
        if names != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(invalid(format!(
                "checkpoint layers {names:?}, expected {expected:?}"
            )));
        }
        Ok(self.layers.iter().map(|l| l.params.clone()).collect())
    }

    pub fn to_dbgnn(&self) -> Result<DbgnnModel> {
        if self.architecture != Architecture::Dbgnn {
            return Err(invalid("checkpoint does not hold a DBGNN"));
        }
        let k = self.registry.max_order();
        let mut m = DbgnnModel {
            convs: (1..=k)
                .map(|k| LayerParams::zeros(self.registry.len(k), HIDDEN, Activation::Sigmoid))
                .collect(),
            bipartite: LayerParams::zeros(HIDDEN, EMBEDDING, Activation::Elu),
            head: LayerParams::zeros(EMBEDDING, 1, Activation::Elu),
            registry: self.registry.clone(),
        };
        self.fill(&mut m)?;
        Ok(m)
    }

    pub fn to_gcn(&self) -> Result<GcnModel> {
        if self.architecture != Architecture::Gcn {
            return Err(invalid("checkpoint does not hold a GCN"));
        }
        let mut m = GcnModel::new(self.registry.node_count(), 0);
        self.fill(&mut m)?;
        Ok(m)
    }

    fn fill<M: Model>(&self, m: &mut M) -> Result<()> {
        let params = self.take(&m.layer_names())?;
        for (slot, p) in m.layers_mut().into_iter().zip(params) {
            if slot.weight.shape() != p.weight.shape() || slot.bias.len() != p.bias.len() {
                return Err(Error::ShapeMismatch {
                    op: "checkpoint",
                    expected: format!("{:?}", slot.weight.shape()),
                    found: format!("{:?}", p.weight.shape()),
                });
            }
            if !p.is_finite() {
                return Err(Error::NonFinite("checkpoint parameters".into()));
            }
            *slot = p;
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let c: Checkpoint = serde_json::from_reader(input)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(invalid(format!(
                "unsupported checkpoint format `{}`",
                c.format
            )));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debruijn::build_debruijn_orders;
    use crate::graph::tests::g1;
    use crate::paths::EventGraph;

    fn fixture(k: usize) -> (TemporalGraph, Vec<DeBruijnGraph>, Registry, WindowGraphs) {
        let g = g1();
        let dbgs = build_debruijn_orders(&EventGraph::new(&g, 10.0).unwrap(), k).unwrap();
        let reg = Registry::build(g.node_count(), &[&dbgs]).unwrap();
        let w = WindowGraphs::new(&reg, &dbgs, &g, Aggregation::Mean).unwrap();
        (g, dbgs, reg, w)
    }

    #[test]
    fn registry_spans_windows() {
        let g = g1();
        let a = build_debruijn_orders(&EventGraph::new(&g, 2.0).unwrap(), 2).unwrap();
        let b = build_debruijn_orders(&EventGraph::new(&g, 10.0).unwrap(), 2).unwrap();
        let reg = Registry::build(4, &[&a, &b]).unwrap();
        assert_eq!(reg.len(1), 4);
        // δ=2 has (a,b),(b,c),(c,d); δ=10 adds nothing new at order 2
        assert_eq!(reg.nodes(2), &[vec![0, 1], vec![1, 2], vec![2, 3]]);
        assert_eq!(reg.index_of(&[1, 2]), Some(1));
        assert_eq!(reg.index_of(&[3]), Some(3));
        assert_eq!(reg.index_of(&[3, 0]), None);
        let c = build_debruijn_orders(&EventGraph::new(&g, 10.0).unwrap(), 3).unwrap();
        assert!(Registry::build(4, &[&a, &c]).is_err());
    }

    #[test]
    fn shapes_follow_the_registry() {
        let (_, dbgs, reg, w) = fixture(2);
        let m = build_dbgnn(&dbgs, &reg, 1).unwrap();
        assert_eq!(m.convs[0].weight.shape(), (4, HIDDEN));
        assert_eq!(m.convs[1].weight.shape(), (3, HIDDEN));
        assert_eq!(m.bipartite.weight.shape(), (HIDDEN, EMBEDDING));
        assert_eq!(m.head.weight.shape(), (EMBEDDING, 1));
        assert_eq!(m.forward(&w).unwrap().len(), 4);
        assert_eq!(m, build_dbgnn(&dbgs, &reg, 1).unwrap());
        assert!(build_dbgnn(&dbgs[..1], &reg, 1).is_err());
    }

    #[test]
    fn mean_bipartite_weights() {
        let (_, _, _, w) = fixture(2);
        // b receives itself and (a,b); c receives itself and (b,c); a only itself
        let b1 = w.bipartite[0].to_dense();
        let b2 = w.bipartite[1].to_dense();
        assert_eq!(b1.get(0, 0), 1.0);
        assert_eq!(b1.get(1, 1), 0.5);
        assert_eq!(b2.get(1, 0), 0.5);
        assert_eq!(b2.get(2, 1), 0.5);
        assert_eq!(b2.row(0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_parameters_predict_zero() {
        let (_, dbgs, reg, w) = fixture(2);
        let mut m = build_dbgnn(&dbgs, &reg, 1).unwrap();
        for p in m.layers_mut() {
            *p = LayerParams::zeros(p.in_dim(), p.out_dim(), p.activation);
        }
        assert_eq!(m.forward(&w).unwrap(), vec![0.0; 4]);
        assert_eq!(m.embeddings(&w).unwrap(), DenseMatrix::zeros(4, EMBEDDING));
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let (_, dbgs, reg, w) = fixture(2);
        let cfg = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let target = vec![0.3; 4];
        let mut a = build_dbgnn(&dbgs, &reg, 5).unwrap();
        let run = train(&mut a, &w, &target, &cfg).unwrap();
        assert_eq!(run.loss_trace.len(), 200);
        assert!(run.final_loss() < run.loss_trace[0]);
        let mut b = build_dbgnn(&dbgs, &reg, 5).unwrap();
        assert_eq!(train(&mut b, &w, &target, &cfg).unwrap(), run);
        assert_eq!(a, b);

        let mut gcn = GcnModel::new(4, 5);
        let run = train(&mut gcn, &w, &target, &cfg).unwrap();
        assert!(run.final_loss() < run.loss_trace[0]);
    }

    #[test]
    fn one_step_moves_every_layer() {
        let (_, dbgs, reg, w) = fixture(2);
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let target = vec![1.0, 2.0, 3.0, 4.0];
        let mut m = build_dbgnn(&dbgs, &reg, 2).unwrap();
        let before = m.clone();
        train(&mut m, &w, &target, &cfg).unwrap();
        for (x, y) in m.layers().iter().zip(before.layers()) {
            assert_ne!(x.weight, y.weight);
        }
        let mut g = GcnModel::new(4, 2);
        let before = g.clone();
        train(&mut g, &w, &target, &cfg).unwrap();
        for (x, y) in g.layers().iter().zip(before.layers()) {
            assert_ne!(x.weight, y.weight);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let (_, dbgs, reg, w) = fixture(1);
        let cfg = TrainConfig {
            epochs: 5,
            lr: 1e300,
            ..TrainConfig::default()
        };
        let mut m = build_dbgnn(&dbgs, &reg, 0).unwrap();
        match train(&mut m, &w, &[1e200; 4], &cfg) {
            Err(Error::Diverged { lr, .. }) => assert_eq!(lr, 1e300),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn target_scaling_round_trips() {
        let s = TargetScale::fit(&[2.0, 10.0, 6.0, 100.0], &[true, true, true, false]);
        assert_eq!(s.forward(6.0), 0.5);
        assert_eq!(s.inverse(0.5), 6.0);
        let flat = TargetScale::fit(&[3.0, 3.0], &[true, true]);
        assert_eq!(flat.inverse(flat.forward(3.0)), 3.0);
    }

    #[test]
    fn checkpoints_round_trip() {
        let (_, dbgs, reg, w) = fixture(2);
        let cfg = TrainConfig::default();
        let m = build_dbgnn(&dbgs, &reg, 3).unwrap();
        let mut buf = Vec::new();
        Checkpoint::from_dbgnn(&m, &cfg, None)
            .write(&mut buf)
            .unwrap();
        let back = Checkpoint::read(buf.as_slice()).unwrap();
        assert_eq!(back.to_dbgnn().unwrap(), m);
        assert!(back.to_gcn().is_err());
        assert_eq!(back.layers[1].name, "conv_order_2");

        let g = GcnModel::new(4, 3);
        let mut buf = Vec::new();
        Checkpoint::from_gcn(&g, &reg, &cfg, None)
            .write(&mut buf)
            .unwrap();
        let back = Checkpoint::read(buf.as_slice()).unwrap().to_gcn().unwrap();
        assert_eq!(back.forward(&w).unwrap(), g.forward(&w).unwrap());
    }
}
