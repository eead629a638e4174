//! Synthetic temporal graphs.
//!
//! The walk generators emit random walks on a random static digraph as
//! sequences of temporal edges one time unit apart. Consecutive walks are
//! separated by `gap` time units, so with any waiting time `delta < gap` the
//! time-respecting paths of the output are exactly the sub-walks, and their
//! Markov order is the order of the generating process.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{NodeId, TemporalEdge, TemporalGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// First-order random walks.
    Memoryless,
    /// Walks whose next step depends on the previous two nodes.
    PlantedOrder2,
    /// Edges with independent uniform endpoints and timestamps.
    Uniform,
}

impl std::fmt::Display for SynthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SynthKind::Memoryless => "memoryless",
            SynthKind::PlantedOrder2 => "planted-order2",
            SynthKind::Uniform => "uniform",
        })
    }
}

impl std::str::FromStr for SynthKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "memoryless" => Ok(SynthKind::Memoryless),
            "planted-order2" | "planted-order-2" => Ok(SynthKind::PlantedOrder2),
            "uniform" => Ok(SynthKind::Uniform),
            other => Err(invalid(format!("unknown generator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub nodes: usize,
    /// Minimum number of temporal edges to emit.
    pub edges: usize,
    /// Out-degree of the underlying static digraph (walk generators).
    pub out_degree: usize,
    /// Steps per walk.
    pub walk_length: usize,
    /// Time between the last edge of a walk and the first of the next.
    pub gap: f64,
    /// Weight of the context-specific preferred successor in the planted
    /// second-order transition tables; `0` reduces to a first-order process.
    pub strength: f64,
    /// Timestamp range for [`SynthKind::Uniform`].
    pub horizon: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            kind: SynthKind::PlantedOrder2,
            nodes: 80,
            edges: 3000,
            out_degree: 4,
            walk_length: 8,
            gap: 5.0,
            strength: 0.9,
            horizon: 1000.0,
            seed: 0,
        }
    }
}

pub fn generate(spec: &SynthSpec) -> Result<TemporalGraph> {
    if spec.nodes < 2 {
        return Err(invalid("generators need at least two nodes"));
    }
    if spec.edges == 0 {
        return Err(invalid("edge count must be positive"));
    }
    match spec.kind {
        SynthKind::Uniform => uniform(spec),
        SynthKind::Memoryless | SynthKind::PlantedOrder2 => walks(spec),
    }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

fn uniform(spec: &SynthSpec) -> Result<TemporalGraph> {
    if !(spec.horizon >= 1.0) {
        return Err(invalid("horizon must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.nodes;
    let horizon = spec.horizon as u64;
    let edges = (0..spec.edges)
        .map(|_| {
            let source = rng.random_range(0..n);
            let target = (source + rng.random_range(1..n)) % n;
            TemporalEdge {
                source,
                target,
                time: rng.random_range(0..horizon) as f64,
            }
        })
        .collect();
    TemporalGraph::from_parts(names(n), edges, true)
}

/// Picks an index from unnormalized non-negative weights.
fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

fn walks(spec: &SynthSpec) -> Result<TemporalGraph> {
    let n = spec.nodes;
    let degree = spec.out_degree;
    if degree == 0 || degree >= n {
        return Err(invalid(format!("out-degree must be in 1..{n}")));
    }
    if spec.walk_length == 0 {
        return Err(invalid("walk length must be positive"));
    }
    if !(0.0..=1.0).contains(&spec.strength) {
        return Err(invalid("strength must be in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // static digraph without self-loops
    let successors: Vec<Vec<NodeId>> = (0..n)
        .map(|v| {
            sample(&mut rng, n - 1, degree)
                .into_iter()
                .map(|i| if i >= v { i + 1 } else { i })
                .collect()
        })
        .collect();
    let first_order: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..degree).map(|_| 0.5 + rng.random::<f64>()).collect())
        .collect();
    let first_total: Vec<f64> = first_order.iter().map(|w| w.iter().sum()).collect();
    // preferred successor slot per (previous node, current node)
    let preferred: Vec<Vec<usize>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(0..degree)).collect())
        .collect();

    let mut edges = Vec::with_capacity(spec.edges + spec.walk_length);
    let mut time = 0.0;
    while edges.len() < spec.edges {
        let mut prev: Option<NodeId> = None;
        let mut cur = rng.random_range(0..n);
        for step in 0..spec.walk_length {
            let slot = match (spec.kind, prev) {
                (SynthKind::PlantedOrder2, Some(p)) => {
                    let mut w: Vec<f64> = first_order[cur]
                        .iter()
                        .map(|x| (1.0 - spec.strength) * x / first_total[cur])
                        .collect();
                    w[preferred[p][cur]] += spec.strength;
                    pick(&mut rng, &w)
                }
                _ => pick(&mut rng, &first_order[cur]),
            };
            let next = successors[cur][slot];
            edges.push(TemporalEdge {
                source: cur,
                target: next,
                time: time + step as f64,
            });
            prev = Some(cur);
            cur = next;
        }
        time += (spec.walk_length - 1) as f64 + spec.gap;
    }
    TemporalGraph::from_parts(names(n), edges, true)
}
