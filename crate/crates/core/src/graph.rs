//! Temporal graph data model, edge-list ingestion, time aggregation and
//! time-based splitting.
//!
//! A [`TemporalGraph`] stores instantaneous directed interactions `(v, w; t)`
//! sorted by timestamp. Undirected inputs are materialized as two directed
//! edges with equal timestamps so every downstream algorithm only has to deal
//! with directions.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Dense node index.
pub type NodeId = usize;

/// A single instantaneous interaction `source -> target` at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub time: f64,
}

/// Node set plus a timestamp-sorted sequence of temporal edges.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalGraph {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
    edges: Vec<TemporalEdge>,
    directed: bool,
}

impl TemporalGraph {
    /// Builds a graph from named observations.
    ///
    /// Observations are stably sorted by timestamp and node indices are then
    /// assigned in order of first appearance in that sorted stream, so that
    /// writing a graph back out and re-reading it reproduces the same indices.
    pub fn from_observations<S: AsRef<str>>(
        observations: &[(S, S, f64)],
        directed: bool,
    ) -> Result<Self> {
        let mut builder = GraphBuilder::new(directed);
        for (s, t, time) in observations {
            builder.push(s.as_ref(), t.as_ref(), *time)?;
        }
        Ok(builder.build())
    }

    /// Builds a graph over an explicit node list. Edges are sorted stably by
    /// time; endpoint indices must be in range.
    pub fn from_parts(
        names: Vec<String>,
        mut edges: Vec<TemporalEdge>,
        directed: bool,
    ) -> Result<Self> {
        let n = names.len();
        for e in &edges {
            if e.source >= n || e.target >= n {
                return Err(invalid(format!(
                    "edge ({}, {}) references a node outside 0..{n}",
                    e.source, e.target
                )));
            }
            if !e.time.is_finite() {
                return Err(Error::NonFinite("edge timestamp".into()));
            }
        }
        edges.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut index = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(invalid(format!("duplicate node name `{name}`")));
            }
        }
        Ok(Self {
            names,
            index,
            edges,
            directed,
        })
    }

    /// A graph over the same node index space holding only `edges`.
    pub fn with_edges(&self, edges: Vec<TemporalEdge>) -> Self {
        let mut edges = edges;
        edges.sort_by(|a, b| a.time.total_cmp(&b.time));
        Self {
            names: self.names.clone(),
            index: self.index.clone(),
            edges,
            directed: self.directed,
        }
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[TemporalEdge] {
        &self.edges
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, node: NodeId) -> &str {
        &self.names[node]
    }

    pub fn index_of(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    /// Looks a node up by name, failing with [`Error::UnknownNode`].
    pub fn node(&self, name: &str) -> Result<NodeId> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Per-node flag: incident to at least one temporal edge.
    pub fn active_nodes(&self) -> Vec<bool> {
        let mut active = vec![false; self.node_count()];
        for e in &self.edges {
            active[e.source] = true;
            active[e.target] = true;
        }
        active
    }

    /// Writes the graph as whitespace-delimited `source target time` lines.
    /// Undirected graphs emit one line per observation.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        let step = if self.directed { 1 } else { 2 };
        for e in self.edges.iter().step_by(step) {
            writeln!(
                out,
                "{} {} {}",
                self.names[e.source], self.names[e.target], e.time
            )?;
        }
        Ok(())
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("node names are valid UTF-8")
    }
}

/// Accumulates named observations and assigns dense indices on `build`.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    directed: bool,
    rows: Vec<(String, String, f64)>,
}

impl GraphBuilder {
    pub fn new(directed: bool) -> Self {
        Self {
            directed,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, source: &str, target: &str, time: f64) -> Result<()> {
        if !time.is_finite() {
            return Err(Error::NonFinite(format!(
                "timestamp of edge {source} -> {target}"
            )));
        }
        self.rows
            .push((source.to_string(), target.to_string(), time));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn build(mut self) -> TemporalGraph {
        self.rows.sort_by(|a, b| a.2.total_cmp(&b.2));
        let mut names = Vec::new();
        let mut index: HashMap<String, NodeId> = HashMap::new();
        let mut id = |name: &str, names: &mut Vec<String>| -> NodeId {
            if let Some(&i) = index.get(name) {
                return i;
            }
            let i = names.len();
            names.push(name.to_string());
            index.insert(name.to_string(), i);
            i
        };
        let mut edges = Vec::with_capacity(self.rows.len() * if self.directed { 1 } else { 2 });
        for (s, t, time) in &self.rows {
            let source = id(s, &mut names);
            let target = id(t, &mut names);
            edges.push(TemporalEdge {
                source,
                target,
                time: *time,
            });
            if !self.directed {
                edges.push(TemporalEdge {
                    source: target,
                    target: source,
                    time: *time,
                });
            }
        }
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        TemporalGraph {
            names,
            index,
            edges,
            directed: self.directed,
        }
    }
}

/// Field separator for edge-list files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Delimiter {
    /// Comma if the first data line contains one, otherwise whitespace.
    #[default]
    Auto,
    Whitespace,
    Char(char),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseOptions {
    pub delimiter: Delimiter,
    pub directed: bool,
    /// Skip the first non-comment line.
    pub header: bool,
    pub source_column: usize,
    pub target_column: usize,
    pub timestamp_column: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Auto,
            directed: true,
            header: false,
            source_column: 0,
            target_column: 1,
            timestamp_column: 2,
        }
    }
}

/// Parses a `source target timestamp` edge list. Lines starting with `#` or
/// `%` and blank lines are skipped; extra columns are ignored.
pub fn parse_edge_list<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<TemporalGraph> {
    let needed = opts
        .source_column
        .max(opts.target_column)
        .max(opts.timestamp_column)
        + 1;
    let mut builder = GraphBuilder::new(opts.directed);
    let mut delimiter = opts.delimiter;
    let mut header_pending = opts.header;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        if delimiter == Delimiter::Auto {
            delimiter = if trimmed.contains(',') {
                Delimiter::Char(',')
            } else {
                Delimiter::Whitespace
            };
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let fields: Vec<&str> = match delimiter {
            Delimiter::Char(c) => trimmed.split(c).map(str::trim).collect(),
            _ => trimmed.split_whitespace().collect(),
        };
        if fields.len() < needed.max(3) {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected at least {} fields, found {}",
                    needed.max(3),
                    fields.len()
                ),
            });
        }
        let raw_time = fields[opts.timestamp_column];
        let time: f64 = raw_time.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("timestamp `{raw_time}` is not numeric"),
        })?;
        if !time.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("timestamp `{raw_time}` is not finite"),
            });
        }
        builder.push(fields[opts.source_column], fields[opts.target_column], time)?;
    }
    if builder.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(builder.build())
}

pub fn parse_edge_list_str(text: &str, opts: &ParseOptions) -> Result<TemporalGraph> {
    parse_edge_list(text.as_bytes(), opts)
}

/// Reads an edge-list file, decompressing it when the name ends in `.gz`.
pub fn read_edge_list(path: impl AsRef<Path>, opts: &ParseOptions) -> Result<TemporalGraph> {
    let path = path.as_ref();
    let file = File::open(path)?;
    if path.extension().is_some_and(|ext| ext == "gz") {
        parse_edge_list(BufReader::new(MultiGzDecoder::new(file)), opts)
    } else {
        parse_edge_list(BufReader::new(file), opts)
    }
}

/// Static, time-aggregated graph: `weight(v, w)` counts the temporal edges
/// `(v, w; ·)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WeightedGraph {
    node_count: usize,
    weights: BTreeMap<(NodeId, NodeId), u64>,
}

impl WeightedGraph {
    pub fn new(node_count: usize, weights: BTreeMap<(NodeId, NodeId), u64>) -> Self {
        Self {
            node_count,
            weights,
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, source: NodeId, target: NodeId) -> u64 {
        self.weights.get(&(source, target)).copied().unwrap_or(0)
    }

    pub fn weights(&self) -> &BTreeMap<(NodeId, NodeId), u64> {
        &self.weights
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.values().sum()
    }

    /// Out-neighbour lists in ascending order, self-loops included.
    pub fn successors(&self) -> Vec<Vec<NodeId>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(s, t) in self.weights.keys() {
            adj[s].push(t);
        }
        adj
    }

    /// Largest eigenvalue of the undirected weighted adjacency
    /// `S[i][j] = max(w(i, j), w(j, i))`, by shifted power iteration.
    pub fn undirected_spectral_radius(&self) -> f64 {
        let n = self.node_count;
        if n == 0 || self.weights.is_empty() {
            return 0.0;
        }
        let mut sym: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
        for (&(s, t), &w) in &self.weights {
            let w = w as f64;
            for key in [(s, t), (t, s)] {
                let entry = sym.entry(key).or_insert(0.0);
                *entry = entry.max(w);
            }
        }
        let mut x = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            // (S + I) x keeps the dominant eigenvalue unique in magnitude.
            let mut y = x.clone();
            for (&(i, j), &w) in &sym {
                y[i] += w * x[j];
            }
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut y {
                *v /= norm;
            }
            let mut sy = vec![0.0; n];
            for (&(i, j), &w) in &sym {
                sy[i] += w * y[j];
            }
            let next: f64 = y.iter().zip(&sy).map(|(a, b)| a * b).sum();
            let converged = (next - lambda).abs() <= 1e-13 * next.abs().max(1.0);
            lambda = next;
            x = y;
            if converged {
                break;
            }
        }
        lambda
    }
}

/// Time-aggregated weighted graph of `g`.
pub fn aggregate(g: &TemporalGraph) -> WeightedGraph {
    let mut weights = BTreeMap::new();
    for e in g.edges() {
        *weights.entry((e.source, e.target)).or_insert(0) += 1;
    }
    WeightedGraph::new(g.node_count(), weights)
}

/// The outcome of [`time_split`].
#[derive(Debug, Clone)]
pub struct TimeSplit {
    pub train: TemporalGraph,
    pub test: TemporalGraph,
    pub fraction: f64,
    /// Largest training timestamp; every test timestamp is `>=` this value.
    pub boundary_time: f64,
}

/// Splits `g` into the first `ceil(fraction * m)` temporal edges and the rest.
///
/// The cut is on edge count, so edges sharing the boundary timestamp may land
/// on both sides. For undirected graphs the cut is rounded up so both
/// directions of an observation stay together.
pub fn time_split(g: &TemporalGraph, fraction: f64) -> Result<TimeSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid(format!(
            "split fraction {fraction} is outside (0, 1)"
        )));
    }
    if g.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = g.edge_count();
    let mut cut = ((fraction * m as f64).ceil() as usize).clamp(1, m);
    if !g.is_directed() && cut % 2 == 1 {
        cut = (cut + 1).min(m);
    }
    let (head, tail) = g.edges().split_at(cut);
    if tail.is_empty() {
        log::warn!("time split leaves the test window empty ({m} edges, fraction {fraction})");
    }
    Ok(TimeSplit {
        train: g.with_edges(head.to_vec()),
        test: g.with_edges(tail.to_vec()),
        fraction,
        boundary_time: head.last().map(|e| e.time).unwrap_or(f64::NEG_INFINITY),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub temporal_edges: usize,
    pub static_edges: usize,
    pub time_span: f64,
    pub distinct_timestamps: usize,
}

pub fn graph_stats(g: &TemporalGraph) -> GraphStats {
    let edges = g.edges();
    let time_span = match (edges.first(), edges.last()) {
        (Some(a), Some(b)) => b.time - a.time,
        _ => 0.0,
    };
    let mut distinct_timestamps = 0;
    let mut last = None;
    for e in edges {
        if last != Some(e.time) {
            distinct_timestamps += 1;
            last = Some(e.time);
        }
    }
    GraphStats {
        nodes: g.node_count(),
        temporal_edges: g.edge_count(),
        static_edges: aggregate(g).edge_count(),
        time_span,
        distinct_timestamps,
    }
}
