//! Temporal and static betweenness / closeness.
//!
//! Temporal betweenness follows Brandes' dependency accumulation, lifted from
//! nodes to the event graph: per source, a breadth-first sweep over events
//! yields shortest-path counts, and a reverse sweep propagates the weight of
//! every shortest path back to the events it traverses.
//!
//! Shortest time-respecting paths may revisit a node. A node is credited once
//! per path, at its first interior occurrence; events where the head node was
//! already reached at a smaller level need a correction pass that counts the
//! shortest prefixes avoiding that node.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{NodeId, TemporalGraph, WeightedGraph};
use crate::paths::{temporal_sssp, EventGraph, TemporalSssp, UNREACHABLE};

/// Sources handled per parallel task. Fixed so that the floating-point
/// reduction order does not depend on the thread count.
const SOURCE_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    TemporalBetweenness,
    TemporalCloseness,
    StaticBetweenness,
    StaticCloseness,
    ApproxTemporalBetweenness,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::TemporalBetweenness => "temporal-betweenness",
            Measure::TemporalCloseness => "temporal-closeness",
            Measure::StaticBetweenness => "static-betweenness",
            Measure::StaticCloseness => "static-closeness",
            Measure::ApproxTemporalBetweenness => "approx-temporal-betweenness",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "temporal-betweenness" => Measure::TemporalBetweenness,
            "temporal-closeness" => Measure::TemporalCloseness,
            "static-betweenness" => Measure::StaticBetweenness,
            "static-closeness" => Measure::StaticCloseness,
            "approx-temporal-betweenness" => Measure::ApproxTemporalBetweenness,
            other => return Err(invalid(format!("unknown measure `{other}`"))),
        })
    }
}

/// Parameters a centrality vector was computed with.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CentralityParams {
    pub delta: Option<f64>,
    pub samples: Option<String>,
    pub seed: Option<u64>,
    /// Distance substituted for unreachable pairs (closeness only).
    pub unreachable_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityVector {
    pub measure: Measure,
    pub values: Vec<f64>,
    pub params: CentralityParams,
}

impl CentralityVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `node,value` CSV preceded by `#` comment lines recording the
    /// measure and its parameters.
    pub fn write_csv<W: Write>(&self, g: &TemporalGraph, mut out: W) -> Result<()> {
        writeln!(out, "# measure: {}", self.measure)?;
        if let Some(d) = self.params.delta {
            writeln!(out, "# delta: {d}")?;
        }
        if let Some(s) = &self.params.samples {
            writeln!(out, "# samples: {s}")?;
        }
        if let Some(s) = self.params.seed {
            writeln!(out, "# seed: {s}")?;
        }
        if let Some(d) = self.params.unreachable_distance {
            writeln!(out, "# unreachable_distance: {d}")?;
        }
        writeln!(out, "node,value")?;
        for (v, value) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", g.name(v), value)?;
        }
        Ok(())
    }
}

/// Writes `node,static_value,temporal_value` rows for static-vs-temporal
/// scatter plots.
pub fn write_scatter_csv<W: Write>(
    g: &TemporalGraph,
    static_values: &CentralityVector,
    temporal_values: &CentralityVector,
    mut out: W,
) -> Result<()> {
    if static_values.len() != temporal_values.len() {
        return Err(Error::ShapeMismatch {
            op: "write_scatter_csv",
            expected: static_values.len().to_string(),
            found: temporal_values.len().to_string(),
        });
    }
    writeln!(
        out,
        "# static: {}, temporal: {}",
        static_values.measure, temporal_values.measure
    )?;
    if let Some(d) = temporal_values.params.delta {
        writeln!(out, "# delta: {d}")?;
    }
    writeln!(out, "node,static_value,temporal_value")?;
    for v in 0..static_values.len() {
        writeln!(
            out,
            "{},{},{}",
            g.name(v),
            static_values.values[v],
            temporal_values.values[v]
        )?;
    }
    Ok(())
}

/// Adds the betweenness contribution of one source to `out`.
///
/// `target_weight(t)` is the weight of a single shortest path ending in `t`,
/// i.e. `1 / sigma(s, t)` for exact betweenness.
fn accumulate_source(
    eg: &EventGraph,
    sp: &TemporalSssp,
    target_weight: impl Fn(NodeId) -> f64,
    out: &mut [f64],
) {
    let events = eg.events();
    let source = sp.source;
    let level = &sp.event_level;
    let terminal_weight = |f: usize| {
        let head = events[f].target;
        if head != source && level[f] == sp.dist[head] {
            target_weight(head)
        } else {
            0.0
        }
    };

    // Weighted number of shortest-path continuations after each event.
    let mut dependency = vec![0.0; eg.event_count()];
    for &e in sp.order.iter().rev() {
        let next = level[e] + 1;
        let mut d = 0.0;
        for &f in eg.successors(e) {
            if level[f] == next {
                d += terminal_weight(f) + dependency[f];
            }
        }
        dependency[e] = d;
    }

    let mut late: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for &e in &sp.order {
        let v = events[e].target;
        let d = dependency[e];
        if v == source || d == 0.0 {
            continue;
        }
        if level[e] == sp.dist[v] {
            out[v] += sp.event_sigma[e] * d;
        } else {
            late.entry(v).or_default().push(e);
        }
    }

    if late.is_empty() {
        return;
    }
    // Count shortest prefixes that reach each late event without an earlier
    // visit to its head node.
    let mut avoiding = vec![0.0; eg.event_count()];
    for (v, late_events) in late {
        let first = sp.dist[v] as usize;
        let last = late_events
            .iter()
            .map(|&e| level[e] as usize)
            .max()
            .unwrap();
        let start = first.saturating_sub(1).max(1);
        for l in start..last {
            for &q in sp.level(l) {
                let head = events[q].target;
                let beta = if head == v {
                    0.0
                } else if l == 1 || l < first {
                    sp.event_sigma[q]
                } else {
                    avoiding[q]
                };
                if beta == 0.0 {
                    continue;
                }
                for &f in eg.successors(q) {
                    if level[f] as usize == l + 1 {
                        avoiding[f] += beta;
                    }
                }
            }
        }
        for &e in &late_events {
            out[v] += avoiding[e] * dependency[e];
        }
        for l in start..=last {
            for &q in sp.level(l) {
                avoiding[q] = 0.0;
            }
        }
    }
}

/// Sums per-source vectors in source order, chunk by chunk.
fn reduce_sources<F>(sources: &[NodeId], n: usize, per_source: F) -> Result<Vec<f64>>
where
    F: Fn(NodeId, &mut [f64]) -> Result<()> + Sync,
{
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; n];
            for &s in chunk {
                per_source(s, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0.0; n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(total)
}

fn exact_weight(sp: &TemporalSssp) -> impl Fn(NodeId) -> f64 + '_ {
    |t| {
        if t != sp.source && sp.dist[t] != UNREACHABLE {
            1.0 / sp.sigma[t]
        } else {
            0.0
        }
    }
}

/// `c(v) = sum over s != v != t of sigma_st(v) / sigma_st`, counting each
/// shortest time-respecting path once per interior node it visits.
pub fn temporal_betweenness(g: &TemporalGraph, delta: f64) -> Result<CentralityVector> {
    let eg = EventGraph::new(g, delta)?;
    temporal_betweenness_on(&eg, delta)
}

pub(crate) fn temporal_betweenness_on(eg: &EventGraph, delta: f64) -> Result<CentralityVector> {
    let n = eg.node_count();
    let sources: Vec<NodeId> = (0..n).collect();
    let values = reduce_sources(&sources, n, |s, acc| {
        let sp = temporal_sssp(eg, s)?;
        accumulate_source(eg, &sp, exact_weight(&sp), acc);
        Ok(())
    })?;
    Ok(CentralityVector {
        measure: Measure::TemporalBetweenness,
        values,
        params: CentralityParams {
            delta: Some(delta),
            ..Default::default()
        },
    })
}

/// `c(v) = 1 / sum over u != v of d(u, v)` with incoming temporal distances;
/// unreachable pairs count as distance `n`.
pub fn temporal_closeness(g: &TemporalGraph, delta: f64) -> Result<CentralityVector> {
    let n = g.node_count();
    if n < 2 {
        return Err(invalid("closeness needs at least two nodes"));
    }
    let eg = EventGraph::new(g, delta)?;
    let cap = n as u64;
    let sums: Vec<Vec<u64>> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0u64; n];
            for &u in chunk {
                let sp = temporal_sssp(&eg, u)?;
                for v in 0..n {
                    if v != u {
                        acc[v] += if sp.dist[v] == UNREACHABLE {
                            cap
                        } else {
                            sp.dist[v] as u64
                        };
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![0u64; n];
    for part in sums {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(CentralityVector {
        measure: Measure::TemporalCloseness,
        values: total.into_iter().map(|s| 1.0 / s as f64).collect(),
        params: CentralityParams {
            delta: Some(delta),
            unreachable_distance: Some(cap as f64),
            ..Default::default()
        },
    })
}

/// Hop-count BFS from `s` over the aggregate topology: distances, path
/// counts and visit order.
fn static_bfs(adj: &[Vec<NodeId>], s: NodeId) -> (Vec<u32>, Vec<f64>, Vec<NodeId>) {
    let n = adj.len();
    let mut dist = vec![UNREACHABLE; n];
    let mut sigma = vec![0.0; n];
    let mut order = Vec::with_capacity(n);
    dist[s] = 0;
    sigma[s] = 1.0;
    order.push(s);
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &w in &adj[u] {
            if w == u {
                continue;
            }
            if dist[w] == UNREACHABLE {
                dist[w] = dist[u] + 1;
                order.push(w);
            }
            if dist[w] == dist[u] + 1 {
                sigma[w] += sigma[u];
            }
        }
    }
    (dist, sigma, order)
}

/// Brandes betweenness on the aggregated graph, hop metric, weights ignored.
pub fn static_betweenness(wg: &WeightedGraph) -> CentralityVector {
    let n = wg.node_count();
    let adj = wg.successors();
    let sources: Vec<NodeId> = (0..n).collect();
    let values = reduce_sources(&sources, n, |s, acc| {
        let (dist, sigma, order) = static_bfs(&adj, s);
        let mut delta = vec![0.0; n];
        for &w in order.iter().rev() {
            for &x in &adj[w] {
                if x != w && dist[x] == dist[w] + 1 {
                    delta[w] += sigma[w] / sigma[x] * (1.0 + delta[x]);
                }
            }
            if w != s {
                acc[w] += delta[w];
            }
        }
        Ok(())
    })
    .expect("static accumulation is infallible");
    CentralityVector {
        measure: Measure::StaticBetweenness,
        values,
        params: CentralityParams::default(),
    }
}

/// Closeness on the aggregated graph with incoming hop distances and the same
/// unreachable cap `n` as [`temporal_closeness`].
pub fn static_closeness(wg: &WeightedGraph) -> CentralityVector {
    let n = wg.node_count();
    let adj = wg.successors();
    let mut total = vec![0u64; n];
    for u in 0..n {
        let (dist, _, _) = static_bfs(&adj, u);
        for v in 0..n {
            if v != u {
                total[v] += if dist[v] == UNREACHABLE {
                    n as u64
                } else {
                    dist[v] as u64
                };
            }
        }
    }
    CentralityVector {
        measure: Measure::StaticCloseness,
        values: total.into_iter().map(|s| 1.0 / s as f64).collect(),
        params: CentralityParams {
            unreachable_distance: Some(n as f64),
            ..Default::default()
        },
    }
}

/// How many node pairs the betweenness estimator looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Every ordered pair once; the estimate is then exact.
    All,
    /// This many ordered pairs drawn uniformly with replacement.
    Pairs(usize),
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sampling::All => f.write_str("all"),
            Sampling::Pairs(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Sampling::All);
        }
        s.parse::<usize>().map(Sampling::Pairs).map_err(|_| {
            invalid(format!(
                "samples must be a positive integer or `all`, got `{s}`"
            ))
        })
    }
}

/// Unbiased pair-sampling estimate of temporal betweenness: for each sampled
/// ordered pair `(s, t)`, every interior node `v` receives
/// `sigma_st(v) / sigma_st`; the sum is scaled by `n (n - 1) / samples`.
pub fn approx_temporal_betweenness(
    g: &TemporalGraph,
    delta: f64,
    samples: Sampling,
    seed: u64,
) -> Result<CentralityVector> {
    let eg = EventGraph::new(g, delta)?;
    let n = g.node_count();
    let params = CentralityParams {
        delta: Some(delta),
        samples: Some(samples.to_string()),
        seed: Some(seed),
        ..Default::default()
    };
    let mut result = CentralityVector {
        measure: Measure::ApproxTemporalBetweenness,
        values: vec![0.0; n],
        params,
    };
    let count = match samples {
        Sampling::All => {
            result.values = temporal_betweenness_on(&eg, delta)?.values;
            return Ok(result);
        }
        Sampling::Pairs(0) => return Err(invalid("samples must be >= 1")),
        Sampling::Pairs(k) => k,
    };
    if n < 2 {
        return Ok(result);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: BTreeMap<NodeId, BTreeMap<NodeId, f64>> = BTreeMap::new();
    for _ in 0..count {
        let s = rng.random_range(0..n);
        let mut t = rng.random_range(0..n - 1);
        if t >= s {
            t += 1;
        }
        *pairs.entry(s).or_default().entry(t).or_insert(0.0) += 1.0;
    }
    let sources: Vec<NodeId> = pairs.keys().copied().collect();
    let sums = reduce_sources(&sources, n, |s, acc| {
        let sp = temporal_sssp(&eg, s)?;
        let targets = &pairs[&s];
        accumulate_source(
            &eg,
            &sp,
            |t| match targets.get(&t) {
                Some(&mult) if sp.dist[t] != UNREACHABLE => mult / sp.sigma[t],
                _ => 0.0,
            },
            acc,
        );
        Ok(())
    })?;
    let scale = (n * (n - 1)) as f64 / count as f64;
    result.values = sums.into_iter().map(|x| x * scale).collect();
    Ok(result)
}
