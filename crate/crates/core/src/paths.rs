//! Time-respecting paths.
//!
//! Two temporal edges `(u, v; t)` and `(v, w; t')` chain into a
//! time-respecting path iff `0 < t' - t <= delta`. The [`EventGraph`] makes
//! that succession relation explicit: its vertices are the temporal edges of a
//! graph and its arcs connect every pair of edges that may follow each other.
//! Timestamps strictly increase along arcs, so the event graph is a DAG, and
//! every path-counting or shortest-path question reduces to a walk over it.

use std::collections::{BTreeMap, HashMap};

use crate::error::{invalid, Result};
use crate::graph::{aggregate, NodeId, TemporalEdge, TemporalGraph};

/// Distance marker for unreachable nodes and events.
pub const UNREACHABLE: u32 = u32::MAX;

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "waiting time delta must be > 0, got {delta}"
        )))
    }
}

/// The δ-succession DAG over the temporal edges of a graph.
///
/// Events keep the (timestamp-sorted) order of the source graph, so event
/// indices coincide with edge indices.
#[derive(Debug, Clone)]
pub struct EventGraph {
    node_count: usize,
    events: Vec<TemporalEdge>,
    delta: f64,
    offsets: Vec<usize>,
    successors: Vec<usize>,
    outgoing: Vec<Vec<usize>>,
}

impl EventGraph {
    /// Builds the succession relation with per-node timestamp-sorted incidence
    /// lists and a binary search for the `(t, t + delta]` window of each event.
    /// `delta` may be `f64::INFINITY`.
    pub fn new(g: &TemporalGraph, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let events = g.edges().to_vec();
        let mut outgoing = vec![Vec::new(); g.node_count()];
        for (i, e) in events.iter().enumerate() {
            outgoing[e.source].push(i);
        }
        let mut offsets = Vec::with_capacity(events.len() + 1);
        let mut successors = Vec::new();
        offsets.push(0);
        for e in &events {
            let out = &outgoing[e.target];
            let start = out.partition_point(|&j| events[j].time <= e.time);
            let end = out.partition_point(|&j| events[j].time - e.time <= delta);
            if start < end {
                successors.extend_from_slice(&out[start..end]);
            }
            offsets.push(successors.len());
        }
        Ok(Self {
            node_count: g.node_count(),
            events,
            delta,
            offsets,
            successors,
            outgoing,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn events(&self) -> &[TemporalEdge] {
        &self.events
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Events that may directly follow `event` on a time-respecting path.
    pub fn successors(&self, event: usize) -> &[usize] {
        &self.successors[self.offsets[event]..self.offsets[event + 1]]
    }

    pub fn arc_count(&self) -> usize {
        self.successors.len()
    }

    /// Events leaving `node`, in timestamp order.
    pub fn outgoing(&self, node: NodeId) -> &[usize] {
        &self.outgoing[node]
    }
}

/// Counts of time-respecting paths of a fixed length `order`, keyed by the
/// traversed node sequence (`order + 1` nodes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathCounts {
    pub order: usize,
    pub counts: BTreeMap<Vec<NodeId>, u64>,
}

impl PathCounts {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Counts time-respecting paths with exactly `k` edges, i.e. event-graph
/// walks with `k - 1` arcs, projected onto node sequences.
pub fn count_paths_length_k(eg: &EventGraph, k: usize) -> Result<PathCounts> {
    if k == 0 {
        return Err(invalid("path length k must be >= 1"));
    }
    let mut frontier: Vec<HashMap<Vec<NodeId>, u64>> = eg
        .events()
        .iter()
        .map(|e| HashMap::from([(vec![e.source, e.target], 1)]))
        .collect();
    for _ in 1..k {
        let mut next: Vec<HashMap<Vec<NodeId>, u64>> = vec![HashMap::new(); eg.event_count()];
        for (p, seqs) in frontier.iter().enumerate() {
            if seqs.is_empty() {
                continue;
            }
            for &e in eg.successors(p) {
                let head = eg.events()[e].target;
                let slot = &mut next[e];
                for (seq, &count) in seqs {
                    let mut extended = Vec::with_capacity(seq.len() + 1);
                    extended.extend_from_slice(seq);
                    extended.push(head);
                    *slot.entry(extended).or_insert(0) += count;
                }
            }
        }
        frontier = next;
    }
    let mut counts = BTreeMap::new();
    for seqs in frontier {
        for (seq, count) in seqs {
            *counts.entry(seq).or_insert(0) += count;
        }
    }
    Ok(PathCounts { order: k, counts })
}

/// Single-source shortest time-respecting paths.
///
/// Distances are hop counts. Two paths are distinct iff their temporal-edge
/// sequences differ, so parallel edges at different times count separately.
#[derive(Debug, Clone)]
pub struct TemporalSssp {
    pub source: NodeId,
    /// Hop distance per node, [`UNREACHABLE`] if no path exists.
    pub dist: Vec<u32>,
    /// Number of distinct shortest paths per node (`sigma[source] = 1`).
    pub sigma: Vec<f64>,
    /// Minimal number of edges of a path from the source ending in each event.
    pub event_level: Vec<u32>,
    /// Number of such minimal paths per event.
    pub event_sigma: Vec<f64>,
    /// Reached events in non-decreasing level order.
    pub order: Vec<usize>,
    /// `order[level_start[l - 1]..level_start[l]]` holds the events at level `l`.
    pub level_start: Vec<usize>,
}

impl TemporalSssp {
    pub fn is_reachable(&self, node: NodeId) -> bool {
        self.dist[node] != UNREACHABLE
    }

    /// Number of BFS levels.
    pub fn depth(&self) -> usize {
        self.level_start.len() - 1
    }

    /// Events reached at `level` (1-based).
    pub fn level(&self, level: usize) -> &[usize] {
        &self.order[self.level_start[level - 1]..self.level_start[level]]
    }
}

/// Level-synchronous BFS over the event graph from every event leaving
/// `source`. Shortest paths to events have optimal substructure (the
/// succession relation only looks at the last event), so a breadth-first
/// sweep yields exact levels and path counts.
pub fn temporal_sssp(eg: &EventGraph, source: NodeId) -> Result<TemporalSssp> {
    let n = eg.node_count();
    if source >= n {
        return Err(crate::error::Error::UnknownNode(format!("#{source}")));
    }
    let m = eg.event_count();
    let mut event_level = vec![UNREACHABLE; m];
    let mut event_sigma = vec![0.0; m];
    let mut order: Vec<usize> = eg.outgoing(source).to_vec();
    for &e in &order {
        event_level[e] = 1;
        event_sigma[e] = 1.0;
    }
    let mut level_start = vec![0];
    if !order.is_empty() {
        level_start.push(order.len());
    }
    let mut begin = 0;
    let mut level = 1;
    while begin < order.len() {
        let end = order.len();
        for i in begin..end {
            let p = order[i];
            let sp = event_sigma[p];
            for &f in eg.successors(p) {
                if event_level[f] == UNREACHABLE {
                    event_level[f] = level + 1;
                    order.push(f);
                }
                if event_level[f] == level + 1 {
                    event_sigma[f] += sp;
                }
            }
        }
        if order.len() > end {
            level_start.push(order.len());
        }
        begin = end;
        level += 1;
    }

    let mut dist = vec![UNREACHABLE; n];
    let mut sigma = vec![0.0; n];
    dist[source] = 0;
    sigma[source] = 1.0;
    for &e in &order {
        let v = eg.events()[e].target;
        let l = event_level[e];
        if l < dist[v] {
            dist[v] = l;
            sigma[v] = event_sigma[e];
        } else if l == dist[v] && v != source {
            sigma[v] += event_sigma[e];
        }
    }
    Ok(TemporalSssp {
        source,
        dist,
        sigma,
        event_level,
        event_sigma,
        order,
        level_start,
    })
}

/// One explicit time-respecting path.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitPath {
    pub nodes: Vec<NodeId>,
    pub times: Vec<f64>,
}

impl ExplicitPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Exhaustively lists every time-respecting path with `1..=max_len` edges by
/// depth-first search over the raw edge list. Exponential; meant as a
/// reference for tiny graphs.
pub fn enumerate_paths_bruteforce(
    g: &TemporalGraph,
    delta: f64,
    max_len: usize,
) -> Vec<ExplicitPath> {
    fn extend(
        edges: &[TemporalEdge],
        delta: f64,
        max_len: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<ExplicitPath>,
    ) {
        let last = edges[*stack.last().unwrap()];
        let mut nodes = vec![edges[stack[0]].source];
        nodes.extend(stack.iter().map(|&i| edges[i].target));
        out.push(ExplicitPath {
            nodes,
            times: stack.iter().map(|&i| edges[i].time).collect(),
        });
        if stack.len() == max_len {
            return;
        }
        for (j, next) in edges.iter().enumerate() {
            let gap = next.time - last.time;
            if next.source == last.target && gap > 0.0 && gap <= delta {
                stack.push(j);
                extend(edges, delta, max_len, stack, out);
                stack.pop();
            }
        }
    }

    let mut out = Vec::new();
    if max_len == 0 {
        return out;
    }
    let edges = g.edges();
    let mut stack = Vec::new();
    for i in 0..edges.len() {
        stack.push(i);
        extend(edges, delta, max_len, &mut stack, &mut out);
        stack.pop();
    }
    out
}

/// Writes oracle paths as `node_seq,timestamps` CSV with `|`-joined fields.
pub fn write_paths_csv<W: std::io::Write>(
    g: &TemporalGraph,
    paths: &[ExplicitPath],
    mut out: W,
) -> Result<()> {
    writeln!(out, "node_seq,timestamps")?;
    for p in paths {
        let nodes: Vec<&str> = p.nodes.iter().map(|&v| g.name(v)).collect();
        let times: Vec<String> = p.times.iter().map(|t| t.to_string()).collect();
        writeln!(out, "{},{}", nodes.join("|"), times.join("|"))?;
    }
    Ok(())
}

/// Upper bound `n * lambda_1^2` on the number of time-respecting paths of
/// length two, with `lambda_1` the spectral radius of the undirected weighted
/// aggregate graph.
pub fn length_two_path_bound(g: &TemporalGraph) -> f64 {
    let lambda = aggregate(g).undirected_spectral_radius();
    g.node_count() as f64 * lambda * lambda
}
