//! Higher-order De Bruijn graph models of time-respecting paths.
//!
//! The order-`k` model has one node per time-respecting walk of length `k - 1`
//! (a sequence of `k` first-order nodes) and one weighted edge per observed
//! length-`k` path: `(v0..v{k-1}) -> (v1..vk)` with weight equal to the number
//! of time-respecting paths `v0..vk`. Order one is the time-aggregated graph.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::graph::{aggregate, NodeId, TemporalGraph};
use crate::paths::{count_paths_length_k, EventGraph, PathCounts};

/// Probability floor for unseen contexts and continuations.
pub const LIKELIHOOD_FLOOR: f64 = 1e-12;

/// Order-`k` De Bruijn graph. Higher-order nodes are kept in lexicographic
/// order of their node-index sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeBruijnGraph {
    order: usize,
    nodes: Vec<Vec<NodeId>>,
    index: HashMap<Vec<NodeId>, usize>,
    edges: BTreeMap<(usize, usize), u64>,
}

impl DeBruijnGraph {
    fn from_parts(order: usize, mut nodes: Vec<Vec<NodeId>>, paths: &PathCounts) -> Self {
        nodes.sort();
        nodes.dedup();
        let index: HashMap<Vec<NodeId>, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let edges = paths
            .counts
            .iter()
            .map(|(seq, &w)| {
                let u = index[&seq[..order]];
                let v = index[&seq[1..]];
                ((u, v), w)
            })
            .collect();
        Self {
            order,
            nodes,
            index,
            edges,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Node sequences, one per higher-order node.
    pub fn nodes(&self) -> &[Vec<NodeId>] {
        &self.nodes
    }

    pub fn index_of(&self, seq: &[NodeId]) -> Option<usize> {
        self.index.get(seq).copied()
    }

    pub fn edges(&self) -> &BTreeMap<(usize, usize), u64> {
        &self.edges
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    /// First-order node a higher-order node maps to: the last element of its
    /// sequence.
    pub fn bipartite(&self, ho_node: usize) -> NodeId {
        *self.nodes[ho_node].last().expect("sequences are non-empty")
    }

    fn seq_label(g: &TemporalGraph, seq: &[NodeId]) -> String {
        seq.iter().map(|&v| g.name(v)).collect::<Vec<_>>().join("|")
    }

    /// `src_seq,dst_seq,weight` CSV with `|`-joined node names.
    pub fn write_edges_csv<W: Write>(&self, g: &TemporalGraph, mut out: W) -> Result<()> {
        writeln!(out, "src_seq,dst_seq,weight")?;
        for (&(u, v), w) in &self.edges {
            writeln!(
                out,
                "{},{},{}",
                Self::seq_label(g, &self.nodes[u]),
                Self::seq_label(g, &self.nodes[v]),
                w
            )?;
        }
        Ok(())
    }

    /// `ho_seq,first_order_node` CSV.
    pub fn write_bipartite_csv<W: Write>(&self, g: &TemporalGraph, mut out: W) -> Result<()> {
        writeln!(out, "ho_seq,first_order_node")?;
        for (i, seq) in self.nodes.iter().enumerate() {
            writeln!(
                out,
                "{},{}",
                Self::seq_label(g, seq),
                g.name(self.bipartite(i))
            )?;
        }
        Ok(())
    }
}

/// Builds the order-`k` De Bruijn graph of `g` under waiting time `delta`.
pub fn build_debruijn(g: &TemporalGraph, delta: f64, k: usize) -> Result<DeBruijnGraph> {
    if k < 1 {
        return Err(invalid("De Bruijn order must be >= 1"));
    }
    let eg = EventGraph::new(g, delta)?;
    let mut graphs = build_debruijn_orders(&eg, k)?;
    Ok(graphs.pop().expect("one graph per order"))
}

/// De Bruijn graphs of orders `1..=max_order` sharing one event graph and one
/// round of path counting.
pub fn build_debruijn_orders(eg: &EventGraph, max_order: usize) -> Result<Vec<DeBruijnGraph>> {
    if max_order < 1 {
        return Err(invalid("De Bruijn order must be >= 1"));
    }
    let counts: Vec<PathCounts> = (1..=max_order)
        .map(|k| count_paths_length_k(eg, k))
        .collect::<Result<_>>()?;
    let mut graphs = Vec::with_capacity(max_order);
    for k in 1..=max_order {
        let nodes: Vec<Vec<NodeId>> = if k == 1 {
            (0..eg.node_count()).map(|v| vec![v]).collect()
        } else {
            counts[k - 2].counts.keys().cloned().collect()
        };
        graphs.push(DeBruijnGraph::from_parts(k, nodes, &counts[k - 1]));
    }
    Ok(graphs)
}

/// Order-one De Bruijn graph straight from the aggregate, without building an
/// event graph.
pub fn first_order(g: &TemporalGraph) -> DeBruijnGraph {
    let counts = aggregate(g)
        .weights()
        .iter()
        .map(|(&(s, t), &w)| (vec![s, t], w))
        .collect();
    let paths = PathCounts { order: 1, counts };
    DeBruijnGraph::from_parts(1, (0..g.node_count()).map(|v| vec![v]).collect(), &paths)
}

/// Order-`k` Markov chain over first-order nodes: for every context of `k`
/// nodes, a distribution over the next node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub order: usize,
    pub probabilities: BTreeMap<Vec<NodeId>, Vec<(NodeId, f64)>>,
}

impl TransitionModel {
    /// Maximum-likelihood model of order `order` fitted to the final
    /// transition of every path in `paths`.
    pub fn fit(paths: &PathCounts, order: usize) -> Result<Self> {
        if order < 1 || order > paths.order {
            return Err(invalid(format!(
                "cannot fit an order-{order} model to paths of length {}",
                paths.order
            )));
        }
        let mut counts: BTreeMap<Vec<NodeId>, BTreeMap<NodeId, u64>> = BTreeMap::new();
        for (seq, &c) in &paths.counts {
            let last = seq.len() - 1;
            *counts
                .entry(seq[last - order..last].to_vec())
                .or_default()
                .entry(seq[last])
                .or_insert(0) += c;
        }
        Ok(Self::normalize(order, counts))
    }

    fn normalize(order: usize, counts: BTreeMap<Vec<NodeId>, BTreeMap<NodeId, u64>>) -> Self {
        let probabilities = counts
            .into_iter()
            .filter_map(|(ctx, row)| {
                let total: u64 = row.values().sum();
                (total > 0).then(|| {
                    let dist = row
                        .into_iter()
                        .map(|(next, c)| (next, c as f64 / total as f64))
                        .collect();
                    (ctx, dist)
                })
            })
            .collect();
        Self {
            order,
            probabilities,
        }
    }

    pub fn probability(&self, context: &[NodeId], next: NodeId) -> f64 {
        self.probabilities
            .get(context)
            .and_then(|row| row.iter().find(|(v, _)| *v == next))
            .map_or(0.0, |(_, p)| *p)
    }

    /// Realized free parameters: `sum over contexts of (support - 1)`.
    pub fn free_parameters(&self) -> usize {
        self.probabilities
            .values()
            .map(|row| row.len().saturating_sub(1))
            .sum()
    }
}

/// Row-normalized edge weights of a De Bruijn graph.
pub fn transition_probabilities(dbg: &DeBruijnGraph) -> TransitionModel {
    let mut counts: BTreeMap<Vec<NodeId>, BTreeMap<NodeId, u64>> = BTreeMap::new();
    for (&(u, v), &w) in dbg.edges() {
        *counts
            .entry(dbg.nodes()[u].clone())
            .or_default()
            .entry(dbg.bipartite(v))
            .or_insert(0) += w;
    }
    TransitionModel::normalize(dbg.order(), counts)
}

/// Log-likelihood of the final transitions of `paths` under `model`.
/// Zero-probability transitions contribute `ln(LIKELIHOOD_FLOOR)`.
pub fn log_likelihood(model: &TransitionModel, paths: &PathCounts) -> Result<f64> {
    if paths.is_empty() {
        return Err(invalid("no evaluation paths"));
    }
    if paths.order < model.order {
        return Err(invalid(format!(
            "order-{} model needs paths of length >= {}, got {}",
            model.order, model.order, paths.order
        )));
    }
    let k = model.order;
    let mut total = 0.0;
    for (seq, &count) in &paths.counts {
        let last = seq.len() - 1;
        let p = model.probability(&seq[last - k..last], seq[last]);
        total += count as f64 * p.max(LIKELIHOOD_FLOOR).ln();
    }
    Ok(total)
}

/// Degrees of freedom of a higher-order model against the lower-order model
/// it refines: every refined context may use the realized support of its
/// parent context, giving `sum over parents of (refinements - 1)(support - 1)`.
fn nested_degrees_of_freedom(lower: &TransitionModel, higher: &TransitionModel) -> i64 {
    let refined: usize = higher
        .probabilities
        .keys()
        .map(|ctx| {
            lower
                .probabilities
                .get(&ctx[1..])
                .map_or(0, |row| row.len().saturating_sub(1))
        })
        .sum();
    refined as i64 - lower.free_parameters() as i64
}

/// One likelihood-ratio test of order `k + 1` against order `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTest {
    pub order: usize,
    pub log_likelihood_lower: f64,
    pub log_likelihood_higher: f64,
    pub statistic: f64,
    pub degrees_of_freedom: i64,
    pub p_value: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub optimal_order: usize,
    /// Highest order that had any paths to test with.
    pub searched_up_to: usize,
    pub tests: Vec<OrderTest>,
}

/// Likelihood-ratio order detection.
///
/// For each `k < max_k`, the evaluation data are the time-respecting paths of
/// length `k + 1`. Both competing models are fitted to the final transitions
/// of those paths (the order-`k` one by marginalizing out the first node),
/// which makes them nested. `2 (L_{k+1} - L_k)` is compared against a
/// chi-squared distribution. Degrees of freedom count, for every order-`k`
/// context, its observed refinements times its realized support (both minus
/// one), clamped to at least one. The largest accepted
/// order is returned.
pub fn select_order(
    g: &TemporalGraph,
    delta: f64,
    max_k: usize,
    significance: f64,
) -> Result<OrderSelection> {
    if max_k < 1 {
        return Err(invalid("max_k must be >= 1"));
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(invalid(format!(
            "significance {significance} is outside (0, 1)"
        )));
    }
    let eg = EventGraph::new(g, delta)?;
    let mut tests = Vec::new();
    let mut optimal_order = 1;
    let mut searched_up_to = 1;
    for k in 1..max_k {
        let data = count_paths_length_k(&eg, k + 1)?;
        if data.is_empty() {
            log::info!(
                "no time-respecting paths of length {}; stopping at order {k}",
                k + 1
            );
            break;
        }
        searched_up_to = k + 1;
        let lower = TransitionModel::fit(&data, k)?;
        let higher = TransitionModel::fit(&data, k + 1)?;
        let l_lower = log_likelihood(&lower, &data)?;
        let l_higher = log_likelihood(&higher, &data)?;
        let statistic = (2.0 * (l_higher - l_lower)).max(0.0);
        let df = nested_degrees_of_freedom(&lower, &higher);
        let chi2 =
            ChiSquared::new(df.max(1) as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let p_value = chi2.sf(statistic);
        let accepted = p_value < significance;
        if accepted {
            optimal_order = k + 1;
        }
        tests.push(OrderTest {
            order: k,
            log_likelihood_lower: l_lower,
            log_likelihood_higher: l_higher,
            statistic,
            degrees_of_freedom: df,
            p_value,
            accepted,
        });
    }
    Ok(OrderSelection {
        optimal_order,
        searched_up_to,
        tests,
    })
}
