//! Reference implementations shared by the integration and acceptance tests.
//!
//! Everything here works from the exhaustive path list produced by
//! `enumerate_paths_bruteforce` and never touches the event graph.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempora::graph::{TemporalEdge, TemporalGraph};
use tempora::paths::{enumerate_paths_bruteforce, ExplicitPath};

pub mod nets;

pub const DELTA_INF: f64 = 1e12;

pub struct Oracle {
    pub n: usize,
    pub paths: Vec<ExplicitPath>,
    /// (s, t) -> (distance, shortest paths)
    pub shortest: BTreeMap<(usize, usize), (usize, Vec<usize>)>,
}

impl Oracle {
    pub fn new(g: &TemporalGraph, delta: f64) -> Self {
        let paths = enumerate_paths_bruteforce(g, delta, g.edge_count().max(1));
        let mut shortest: BTreeMap<(usize, usize), (usize, Vec<usize>)> = BTreeMap::new();
        for (i, p) in paths.iter().enumerate() {
            let s = p.nodes[0];
            let t = *p.nodes.last().unwrap();
            if s == t {
                continue;
            }
            let entry = shortest.entry((s, t)).or_insert((usize::MAX, Vec::new()));
            if p.len() < entry.0 {
                *entry = (p.len(), vec![i]);
            } else if p.len() == entry.0 {
                entry.1.push(i);
            }
        }
        Self {
            n: g.node_count(),
            paths,
            shortest,
        }
    }

    pub fn dist(&self, s: usize, t: usize) -> Option<usize> {
        if s == t {
            return Some(0);
        }
        self.shortest.get(&(s, t)).map(|e| e.0)
    }

    pub fn sigma(&self, s: usize, t: usize) -> usize {
        if s == t {
            return 1;
        }
        self.shortest.get(&(s, t)).map_or(0, |e| e.1.len())
    }

    pub fn betweenness(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n];
        for (&(s, t), (_, ids)) in &self.shortest {
            let sigma = ids.len() as f64;
            for &i in ids {
                let p = &self.paths[i];
                let interior: BTreeSet<usize> = p.nodes[1..p.nodes.len() - 1]
                    .iter()
                    .copied()
                    .filter(|&v| v != s && v != t)
                    .collect();
                for v in interior {
                    c[v] += 1.0 / sigma;
                }
            }
        }
        c
    }

    pub fn closeness(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| {
                let total: usize = (0..self.n)
                    .filter(|&u| u != v)
                    .map(|u| self.dist(u, v).unwrap_or(self.n))
                    .sum();
                1.0 / total as f64
            })
            .collect()
    }

    pub fn path_counts(&self, k: usize) -> BTreeMap<Vec<usize>, u64> {
        let mut counts = BTreeMap::new();
        for p in self.paths.iter().filter(|p| p.len() == k) {
            *counts.entry(p.nodes.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Is `nodes` realized by at least one enumerated path?
    pub fn is_walk(&self, nodes: &[usize]) -> bool {
        nodes.len() == 1 || self.paths.iter().any(|p| p.nodes == nodes)
    }
}

/// Random temporal graph with at most `max_nodes` nodes and `max_edges`
/// edges, integer timestamps from a small range so ties occur.
pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> TemporalGraph {
    let n = rng.random_range(2..=max_nodes);
    let m = rng.random_range(1..=max_edges);
    let horizon = rng.random_range(3..=15);
    let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let s = rng.random_range(0..n);
        let t = if rng.random_bool(0.05) {
            s
        } else {
            (s + rng.random_range(1..n)) % n
        };
        edges.push(TemporalEdge {
            source: s,
            target: t,
            time: rng.random_range(0..horizon) as f64,
        });
    }
    TemporalGraph::from_parts(names, edges, true).unwrap()
}

pub fn corpus(seed: u64, count: usize) -> Vec<(TemporalGraph, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deltas = [1.0, 2.0, 5.0, DELTA_INF];
    (0..count)
        .map(|_| {
            let g = random_graph(&mut rng, 8, 20);
            let delta = deltas[rng.random_range(0..deltas.len())];
            (g, delta)
        })
        .collect()
}
