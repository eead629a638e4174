use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::experiment::ground_truth;
use crate::centrality::Measure;
use crate::debruijn::build_debruijn_orders;
use crate::error::{invalid, Error, Result};
use crate::graph::{NodeId, TemporalGraph};
use crate::models::{Aggregation, DbgnnModel, Model, WindowGraphs};
use crate::paths::EventGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub measure: Measure,
    pub delta: f64,
    pub aggregation: Aggregation,
    pub repetitions: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            measure: Measure::TemporalBetweenness,
            delta: 1.0,
            aggregation: Aggregation::Mean,
            repetitions: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRecord {
    pub measure: Measure,
    pub nodes: usize,
    pub temporal_edges: usize,
    /// Per repetition, exact centrality of the window.
    pub exact_seconds: Vec<f64>,
    /// Per repetition, De Bruijn graphs of the window plus a forward pass.
    pub refit_seconds: Vec<f64>,
    pub exact_median: f64,
    pub refit_median: f64,
    pub speedup: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn refit_and_predict(
    model: &DbgnnModel,
    window: &TemporalGraph,
    cfg: &BenchmarkConfig,
) -> Result<Vec<f64>> {
    let dbgs = build_debruijn_orders(
        &EventGraph::new(window, cfg.delta)?,
        model.registry.max_order(),
    )?;
    let w = WindowGraphs::new(&model.registry, &dbgs, window, cfg.aggregation)?;
    model.forward(&w)
}

/// Median wall-clock of exact centrality on `window` against De Bruijn
/// construction plus inference with a trained DBGNN, measured on a single
/// thread.
pub fn benchmark_speedup(
    model: &DbgnnModel,
    window: &TemporalGraph,
    cfg: &BenchmarkConfig,
) -> Result<SpeedupRecord> {
    if cfg.repetitions == 0 {
        return Err(invalid("repetitions must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| invalid(e.to_string()))?;
    pool.install(|| {
        let mut exact_seconds = Vec::with_capacity(cfg.repetitions);
        let mut refit_seconds = Vec::with_capacity(cfg.repetitions);
        for _ in 0..cfg.repetitions {
            let clock = Instant::now();
            std::hint::black_box(ground_truth(window, cfg.measure, cfg.delta)?);
            exact_seconds.push(clock.elapsed().as_secs_f64());

            let clock = Instant::now();
            std::hint::black_box(refit_and_predict(model, window, cfg)?);
            refit_seconds.push(clock.elapsed().as_secs_f64());
        }
        let exact_median = median(&exact_seconds);
        let refit_median = median(&refit_seconds);
        Ok(SpeedupRecord {
            measure: cfg.measure,
            nodes: window.node_count(),
            temporal_edges: window.edge_count(),
            exact_seconds,
            refit_seconds,
            exact_median,
            refit_median,
            speedup: exact_median / refit_median,
        })
    })
}

/// Bipartite-layer activations of the nodes active in the window.
pub fn embeddings(model: &DbgnnModel, window: &WindowGraphs) -> Result<Vec<(NodeId, Vec<f64>)>> {
    let emb = model.embeddings(window)?;
    Ok(window
        .active
        .iter()
        .enumerate()
        .filter(|&(_, &a)| a)
        .map(|(v, _)| (v, emb.row(v).to_vec()))
        .collect())
}

/// Writes `node,e0,..,e7` CSV rows, one per active first-order node.
pub fn export_embeddings<W: Write>(
    model: &DbgnnModel,
    window: &WindowGraphs,
    g: &TemporalGraph,
    mut out: W,
) -> Result<()> {
    if g.node_count() != window.node_count() {
        return Err(Error::ShapeMismatch {
            op: "export_embeddings",
            expected: window.node_count().to_string(),
            found: g.node_count().to_string(),
        });
    }
    let rows = embeddings(model, window)?;
    let width = model.bipartite.out_dim();
    let header: Vec<String> = (0..width).map(|i| format!("e{i}")).collect();
    writeln!(out, "node,{}", header.join(","))?;
    for (v, row) in rows {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{},{}", g.name(v), cells.join(","))?;
    }
    Ok(())
}
