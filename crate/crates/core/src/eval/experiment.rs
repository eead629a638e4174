use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{rank_metrics, MetricSet};
use crate::centrality::{temporal_betweenness, temporal_closeness, Measure};
use crate::debruijn::{build_debruijn_orders, DeBruijnGraph};
use crate::error::{invalid, Error, Result};
use crate::graph::{read_edge_list, time_split, NodeId, ParseOptions, TemporalGraph, TimeSplit};
use crate::models::{
    build_dbgnn, predict, train, Aggregation, Architecture, DbgnnModel, GcnModel, Registry,
    TargetScale, TrainConfig, WindowGraphs,
};
use crate::paths::EventGraph;
use crate::synth::{generate, SynthSpec};

/// Where the temporal graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dataset {
    File {
        path: PathBuf,
        #[serde(default)]
        parse: ParseOptions,
    },
    /// Generated once per run, with the generator seed offset by the run
    /// index.
    Synthetic(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: Dataset,
    pub measures: Vec<Measure>,
    pub models: Vec<Architecture>,
    pub delta: f64,
    pub order: usize,
    pub train_fraction: f64,
    pub epochs: usize,
    pub lr_grid: Vec<f64>,
    pub weight_decay: f64,
    pub runs: usize,
    /// Model seed of run `r` is `seed + r`.
    pub seed: u64,
    pub aggregation: Aggregation,
    pub scale_targets: bool,
    pub hits_k: usize,
    /// Measure wall-clock phases. Off keeps reports bitwise reproducible.
    pub record_timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: Dataset::Synthetic(SynthSpec::default()),
            measures: vec![Measure::TemporalCloseness, Measure::TemporalBetweenness],
            models: vec![Architecture::Dbgnn, Architecture::Gcn],
            delta: 1.0,
            order: 2,
            train_fraction: 0.5,
            epochs: 1000,
            lr_grid: vec![0.1, 0.01, 0.001, 0.0001],
            weight_decay: 5e-4,
            runs: 20,
            seed: 0,
            aggregation: Aggregation::Mean,
            scale_targets: false,
            hits_k: 10,
            record_timings: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(invalid("runs must be >= 1"));
        }
        if self.lr_grid.is_empty() || self.measures.is_empty() || self.models.is_empty() {
            return Err(invalid(
                "learning-rate grid, measures and models must be non-empty",
            ));
        }
        if let Some(m) = self
            .measures
            .iter()
            .find(|m| !matches!(m, Measure::TemporalCloseness | Measure::TemporalBetweenness))
        {
            return Err(invalid(format!(
                "measure `{m}` is not available for experiments (use temporal-closeness or temporal-betweenness)"
            )));
        }
        if self.hits_k == 0 {
            return Err(invalid("hits k must be >= 1"));
        }
        for &lr in &self.lr_grid {
            self.train_config(lr, Measure::TemporalCloseness, 0)
                .validate()?;
        }
        Ok(())
    }

    pub fn train_config(&self, lr: f64, measure: Measure, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr,
            weight_decay: self.weight_decay,
            seed,
            measure,
            delta: self.delta,
            order: self.order,
            aggregation: self.aggregation,
            scale_targets: self.scale_targets,
        }
    }

    pub fn load_graph(&self, run: usize) -> Result<TemporalGraph> {
        match &self.dataset {
            Dataset::File { path, parse } => read_edge_list(path, parse),
            Dataset::Synthetic(spec) => generate(&SynthSpec {
                seed: spec.seed + run as u64,
                ..spec.clone()
            }),
        }
    }
}

/// Exact centrality used as ground truth.
pub fn ground_truth(g: &TemporalGraph, measure: Measure, delta: f64) -> Result<Vec<f64>> {
    match measure {
        Measure::TemporalCloseness => Ok(temporal_closeness(g, delta)?.values),
        Measure::TemporalBetweenness => Ok(temporal_betweenness(g, delta)?.values),
        other => Err(invalid(format!("no ground truth for `{other}`"))),
    }
}

/// A split graph with De Bruijn graphs and registry for both windows.
pub struct PreparedWindows {
    pub split: TimeSplit,
    pub train_dbgs: Vec<DeBruijnGraph>,
    pub test_dbgs: Vec<DeBruijnGraph>,
    pub registry: Registry,
    pub train: WindowGraphs,
    pub test: WindowGraphs,
}

impl PreparedWindows {
    pub fn new(
        g: &TemporalGraph,
        train_fraction: f64,
        delta: f64,
        order: usize,
        aggregation: Aggregation,
    ) -> Result<Self> {
        let split = time_split(g, train_fraction)?;
        if split.test.is_empty() {
            return Err(invalid("the test window is empty"));
        }
        let train_dbgs = build_debruijn_orders(&EventGraph::new(&split.train, delta)?, order)?;
        let test_dbgs = build_debruijn_orders(&EventGraph::new(&split.test, delta)?, order)?;
        let registry = Registry::build(g.node_count(), &[&train_dbgs, &test_dbgs])?;
        let train = WindowGraphs::new(&registry, &train_dbgs, &split.train, aggregation)?;
        let test = WindowGraphs::new(&registry, &test_dbgs, &split.test, aggregation)?;
        Ok(Self {
            split,
            train_dbgs,
            test_dbgs,
            registry,
            train,
            test,
        })
    }
}

/// A trained model of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Trained {
    Dbgnn(DbgnnModel),
    Gcn(GcnModel),
}

impl Trained {
    pub fn predict(&self, w: &WindowGraphs, scale: Option<TargetScale>) -> Result<Vec<f64>> {
        match self {
            Trained::Dbgnn(m) => predict(m, w, scale),
            Trained::Gcn(m) => predict(m, w, scale),
        }
    }
}

/// Trains one architecture on the training window.
pub fn fit_model(
    arch: Architecture,
    prepared: &PreparedWindows,
    targets: &[f64],
    cfg: &TrainConfig,
) -> Result<(Trained, crate::models::TrainingRun)> {
    match arch {
        Architecture::Dbgnn => {
            let mut m = build_dbgnn(&prepared.train_dbgs, &prepared.registry, cfg.seed)?;
            let run = train(&mut m, &prepared.train, targets, cfg)?;
            Ok((Trained::Dbgnn(m), run))
        }
        Architecture::Gcn => {
            let mut m = GcnModel::new(prepared.registry.node_count(), cfg.seed);
            let run = train(&mut m, &prepared.train, targets, cfg)?;
            Ok((Trained::Gcn(m), run))
        }
    }
}

/// Metrics of one trained model on the test window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub measure: Measure,
    pub model: Architecture,
    pub lr: f64,
    pub run: usize,
    pub seed: u64,
    pub metrics: MetricSet,
    pub final_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (`n - 1`); zero for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Aggregate over runs for one measure, model and learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub measure: Measure,
    pub model: Architecture,
    pub lr: f64,
    pub runs: usize,
    pub spearman: MeanStd,
    pub kendall_tau: MeanStd,
    pub hits_at_k: MeanStd,
    pub mae: MeanStd,
    /// Highest mean Spearman among the learning rates of this measure and
    /// model.
    pub best: bool,
}

/// Mean wall-clock seconds per run for one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub measure: Measure,
    /// Exact centrality on the test window.
    pub ground_truth_seconds: f64,
    /// Mean over the trained models of one run.
    pub training_seconds: f64,
    /// Test-window De Bruijn graphs plus one DBGNN forward pass.
    pub refit_inference_seconds: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub tie_break: String,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub timings: Option<Vec<PhaseTimings>>,
}

pub const TIE_BREAK: &str =
    "average ranks for correlations; top-k ordered by value descending, then node index ascending";

struct RunOutput {
    records: Vec<RunRecord>,
    timings: Vec<(Measure, f64, f64, f64)>,
}

fn active_pairs(pred: &[f64], truth: &[f64], active: &[bool]) -> (Vec<f64>, Vec<f64>) {
    active
        .iter()
        .enumerate()
        .filter(|&(_, &a)| a)
        .map(|(v, _)| (pred[v], truth[v]))
        .unzip()
}

fn run_once(cfg: &ExperimentConfig, run: usize) -> Result<RunOutput> {
    let g = cfg.load_graph(run)?;
    let seed = cfg.seed + run as u64;
    let prepared = PreparedWindows::new(
        &g,
        cfg.train_fraction,
        cfg.delta,
        cfg.order,
        cfg.aggregation,
    )?;
    let mut records = Vec::new();
    let mut timings = Vec::new();
    for &measure in &cfg.measures {
        let train_truth = ground_truth(&prepared.split.train, measure, cfg.delta)?;
        let clock = Instant::now();
        let test_truth = ground_truth(&prepared.split.test, measure, cfg.delta)?;
        let truth_seconds = clock.elapsed().as_secs_f64();
        let mut training_seconds = 0.0;
        let mut trained_count = 0;
        let mut refit_seconds = f64::NAN;
        for &arch in &cfg.models {
            for &lr in &cfg.lr_grid {
                let tc = cfg.train_config(lr, measure, seed);
                let clock = Instant::now();
                let (model, fit) = fit_model(arch, &prepared, &train_truth, &tc)?;
                training_seconds += clock.elapsed().as_secs_f64();
                trained_count += 1;
                let pred = model.predict(&prepared.test, fit.scale)?;
                let (p, t) = active_pairs(&pred, &test_truth, &prepared.test.active);
                records.push(RunRecord {
                    measure,
                    model: arch,
                    lr,
                    run,
                    seed,
                    metrics: rank_metrics(&p, &t, cfg.hits_k)?,
                    final_loss: fit.final_loss(),
                });
                if cfg.record_timings && refit_seconds.is_nan() {
                    if let Trained::Dbgnn(m) = &model {
                        let clock = Instant::now();
                        let dbgs = build_debruijn_orders(
                            &EventGraph::new(&prepared.split.test, cfg.delta)?,
                            cfg.order,
                        )?;
                        let w = WindowGraphs::new(
                            &m.registry,
                            &dbgs,
                            &prepared.split.test,
                            cfg.aggregation,
                        )?;
                        predict(m, &w, fit.scale)?;
                        refit_seconds = clock.elapsed().as_secs_f64();
                    }
                }
            }
        }
        timings.push((
            measure,
            truth_seconds,
            training_seconds / trained_count as f64,
            refit_seconds,
        ));
    }
    Ok(RunOutput { records, timings })
}

/// Split, ground truth, De Bruijn graphs, training, prediction on the test
/// window and scoring, repeated over `cfg.runs` seeds. Runs execute in
/// parallel; records are ordered by run, measure, model and learning rate.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let outputs: Vec<RunOutput> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| run_once(cfg, run))
        .collect::<Result<_>>()?;
    let runs: Vec<RunRecord> = outputs.iter().flat_map(|o| o.records.clone()).collect();
    let summary = summarize(&runs, cfg);
    let timings = cfg.record_timings.then(|| {
        cfg.measures
            .iter()
            .enumerate()
            .map(|(i, &measure)| {
                let mean = |f: fn(&(Measure, f64, f64, f64)) -> f64| {
                    outputs.iter().map(|o| f(&o.timings[i])).sum::<f64>() / outputs.len() as f64
                };
                let ground_truth_seconds = mean(|t| t.1);
                let refit_inference_seconds = mean(|t| t.3);
                PhaseTimings {
                    measure,
                    ground_truth_seconds,
                    training_seconds: mean(|t| t.2),
                    refit_inference_seconds,
                    speedup: ground_truth_seconds / refit_inference_seconds,
                }
            })
            .collect()
    });
    Ok(ExperimentReport {
        config: cfg.clone(),
        tie_break: TIE_BREAK.into(),
        runs,
        summary,
        timings,
    })
}

/// Mean and standard deviation per (measure, model, lr), with the best
/// learning rate per (measure, model) flagged.
pub fn summarize(records: &[RunRecord], cfg: &ExperimentConfig) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &measure in &cfg.measures {
        for &model in &cfg.models {
            let start = rows.len();
            for &lr in &cfg.lr_grid {
                let sel: Vec<&RunRecord> = records
                    .iter()
                    .filter(|r| r.measure == measure && r.model == model && r.lr == lr)
                    .collect();
                if sel.is_empty() {
                    continue;
                }
                let stat = |f: fn(&MetricSet) -> f64| {
                    MeanStd::of(&sel.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>())
                };
                rows.push(SummaryRow {
                    measure,
                    model,
                    lr,
                    runs: sel.len(),
                    spearman: stat(|m| m.spearman),
                    kendall_tau: stat(|m| m.kendall_tau),
                    hits_at_k: stat(|m| m.hits_at_k),
                    mae: stat(|m| m.mae),
                    best: false,
                });
            }
            let group = &mut rows[start..];
            let best = group
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.spearman.mean.is_nan())
                .max_by(|a, b| {
                    a.1.spearman
                        .mean
                        .total_cmp(&b.1.spearman.mean)
                        .then(b.0.cmp(&a.0))
                })
                .map(|(i, _)| i);
            if let Some(i) = best {
                group[i].best = true;
            }
        }
    }
    rows
}

impl ExperimentReport {
    /// The flagged row for a measure and model.
    pub fn best(&self, measure: Measure, model: Architecture) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.best && r.measure == measure && r.model == model)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Aligned-column summary table.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{:<22} {:<6} {:>8} {:>5}  {:>17}  {:>17}  {:>15}  {:>19}  best",
            "measure", "model", "lr", "runs", "spearman", "kendall", "hits@k", "mae"
        )?;
        let pm = |m: MeanStd| format!("{:.4} ± {:.4}", m.mean, m.std);
        for r in &self.summary {
            writeln!(
                out,
                "{:<22} {:<6} {:>8} {:>5}  {:>17}  {:>17}  {:>15}  {:>19}  {}",
                r.measure.as_str(),
                r.model.as_str(),
                r.lr,
                r.runs,
                pm(r.spearman),
                pm(r.kendall_tau),
                format!("{:.2} ± {:.2}", r.hits_at_k.mean, r.hits_at_k.std),
                format!("{:.4e} ± {:.2e}", r.mae.mean, r.mae.std),
                if r.best { "*" } else { "" }
            )?;
        }
        if let Some(timings) = &self.timings {
            writeln!(out)?;
            for t in timings {
                writeln!(
                    out,
                    "{}: ground truth {:.6}s, training {:.6}s, refit+inference {:.6}s, speed-up {:.2}",
                    t.measure, t.ground_truth_seconds, t.training_seconds, t.refit_inference_seconds, t.speedup
                )?;
            }
        }
        Ok(())
    }

    /// One CSV row per run record.
    pub fn write_runs_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "measure,model,lr,run,seed,spearman,kendall_tau,hits_at_k,mae,final_loss"
        )?;
        for r in &self.runs {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.measure,
                r.model.as_str(),
                r.lr,
                r.run,
                r.seed,
                r.metrics.spearman,
                r.metrics.kendall_tau,
                r.metrics.hits_at_k,
                r.metrics.mae,
                r.final_loss
            )?;
        }
        Ok(())
    }
}

/// `node,predicted,ground_truth` rows for the given nodes.
pub fn write_predictions_csv<W: Write>(
    g: &TemporalGraph,
    nodes: &[NodeId],
    pred: &[f64],
    truth: &[f64],
    mut out: W,
) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            op: "write_predictions_csv",
            expected: truth.len().to_string(),
            found: pred.len().to_string(),
        });
    }
    writeln!(out, "node,predicted,ground_truth")?;
    for &v in nodes {
        writeln!(out, "{},{},{}", g.name(v), pred[v], truth[v])?;
    }
    Ok(())
}
