use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempora::centrality::{
    approx_temporal_betweenness, static_betweenness, static_closeness, temporal_betweenness,
    temporal_closeness, write_scatter_csv, CentralityVector, Measure, Sampling,
};
use tempora::debruijn::{build_debruijn, build_debruijn_orders, select_order};
use tempora::eval::{
    benchmark_speedup, export_embeddings, fit_model, ground_truth, rank_metrics, run_experiment,
    write_predictions_csv, BenchmarkConfig, Dataset, ExperimentConfig, MetricSet, PreparedWindows,
    Trained,
};
use tempora::graph::{
    aggregate, graph_stats, read_edge_list, time_split, Delimiter, ParseOptions, TemporalGraph,
};
use tempora::models::{Architecture, Checkpoint, TrainConfig, WindowGraphs};
use tempora::paths::{
    count_paths_length_k, enumerate_paths_bruteforce, length_two_path_bound, write_paths_csv,
    EventGraph,
};
use tempora::synth::{generate, SynthKind, SynthSpec};

use crate::args::*;
use crate::output::{write_value, Ctx};
use crate::CliError;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn existing(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} `{}` not found", path.display())))
    }
}

fn check_delta(delta: f64) -> Result<(), CliError> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(usage(format!(
            "--delta must be positive and finite, got {delta}"
        )))
    }
}

fn check_fraction(f: f64) -> Result<(), CliError> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(usage(format!(
            "--train-fraction must lie in (0, 1), got {f}"
        )))
    }
}

fn parse_options(a: &InputArgs) -> Result<ParseOptions, CliError> {
    let delimiter = match a.delimiter.as_str() {
        "auto" => Delimiter::Auto,
        "whitespace" => Delimiter::Whitespace,
        "tab" | "\\t" => Delimiter::Char('\t'),
        s if s.chars().count() == 1 => Delimiter::Char(s.chars().next().unwrap()),
        s => {
            return Err(usage(format!(
                "--delimiter `{s}` is not auto, whitespace or one character"
            )))
        }
    };
    let cols: Vec<usize> = a
        .columns
        .split(',')
        .map(|c| c.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--columns `{}` is not three indices", a.columns)))?;
    let [source_column, target_column, timestamp_column] = cols[..] else {
        return Err(usage(format!(
            "--columns `{}` is not three indices",
            a.columns
        )));
    };
    Ok(ParseOptions {
        delimiter,
        directed: !a.undirected,
        header: a.header,
        source_column,
        target_column,
        timestamp_column,
    })
}

fn input_path(a: &InputArgs) -> Result<&PathBuf, CliError> {
    let path = a
        .input
        .as_ref()
        .ok_or_else(|| usage("--input is required"))?;
    existing(path, "input file")?;
    Ok(path)
}

fn load_file(a: &InputArgs) -> Result<TemporalGraph, CliError> {
    let opts = parse_options(a)?;
    Ok(read_edge_list(input_path(a)?, &opts)?)
}

fn synth_spec(kind: SynthKind, p: &SynthParams, seed: u64) -> SynthSpec {
    SynthSpec {
        kind,
        nodes: p.nodes,
        edges: p.edges,
        out_degree: p.out_degree,
        walk_length: p.walk_length,
        gap: p.gap,
        strength: p.strength,
        horizon: p.horizon,
        seed,
    }
}

fn dataset(s: &SourceArgs, seed: u64) -> Result<Dataset, CliError> {
    match s.synth {
        Some(kind) => Ok(Dataset::Synthetic(synth_spec(kind, &s.params, seed))),
        None => Ok(Dataset::File {
            path: input_path(&s.file)?.clone(),
            parse: parse_options(&s.file)?,
        }),
    }
}

fn load_source(s: &SourceArgs, seed: u64) -> Result<TemporalGraph, CliError> {
    match dataset(s, seed)? {
        Dataset::Synthetic(spec) => Ok(generate(&spec)?),
        Dataset::File { path, parse } => Ok(read_edge_list(path, &parse)?),
    }
}

fn train_config(
    t: &TrainingArgs,
    lr: f64,
    measure: Measure,
    seed: u64,
) -> Result<TrainConfig, CliError> {
    check_delta(t.delta)?;
    check_fraction(t.train_fraction)?;
    let cfg = TrainConfig {
        epochs: t.epochs,
        lr,
        weight_decay: t.weight_decay,
        seed,
        measure,
        delta: t.delta,
        order: t.order,
        aggregation: t.aggregation,
        scale_targets: t.scale_targets,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn active_nodes(active: &[bool]) -> Vec<usize> {
    (0..active.len()).filter(|&v| active[v]).collect()
}

pub fn stats(ctx: &Ctx, a: &StatsArgs) -> Result<(), CliError> {
    let g = load_file(&a.input)?;
    let s = graph_stats(&g);
    match a.format {
        Format::Json => ctx.write_json(a.output.as_deref(), &s),
        Format::Text => ctx.write_commented(a.output.as_deref(), |out| {
            writeln!(out, "nodes: {}", s.nodes)?;
            writeln!(out, "temporal_edges: {}", s.temporal_edges)?;
            writeln!(out, "static_edges: {}", s.static_edges)?;
            writeln!(out, "time_span: {}", s.time_span)?;
            writeln!(out, "distinct_timestamps: {}", s.distinct_timestamps)?;
            Ok(())
        }),
    }
}

fn sampling(s: &str) -> Result<Sampling, CliError> {
    match s.parse() {
        Ok(Sampling::Pairs(0)) => Err(usage("--samples must be at least 1")),
        Ok(v) => Ok(v),
        Err(e) => Err(usage(e.to_string())),
    }
}

fn centrality_of(
    g: &TemporalGraph,
    m: Measure,
    delta: f64,
    samples: &str,
    seed: u64,
) -> Result<CentralityVector, CliError> {
    Ok(match m {
        Measure::TemporalBetweenness => temporal_betweenness(g, delta)?,
        Measure::TemporalCloseness => temporal_closeness(g, delta)?,
        Measure::StaticBetweenness => static_betweenness(&aggregate(g)),
        Measure::StaticCloseness => static_closeness(&aggregate(g)),
        Measure::ApproxTemporalBetweenness => {
            approx_temporal_betweenness(g, delta, sampling(samples)?, seed)?
        }
    })
}

pub fn centrality(ctx: &Ctx, a: &CentralityArgs) -> Result<(), CliError> {
    check_delta(a.delta)?;
    if a.measure == Measure::ApproxTemporalBetweenness {
        sampling(&a.samples)?;
    }
    let g = load_file(&a.input)?;
    let values = centrality_of(&g, a.measure, a.delta, &a.samples, ctx.seed)?;
    ctx.write_commented(a.output.as_deref(), |out| Ok(values.write_csv(&g, out)?))?;
    if let Some(path) = &a.scatter {
        let (static_m, temporal_m) = match a.measure {
            Measure::TemporalCloseness | Measure::StaticCloseness => {
                (Measure::StaticCloseness, Measure::TemporalCloseness)
            }
            Measure::StaticBetweenness => {
                (Measure::StaticBetweenness, Measure::TemporalBetweenness)
            }
            m => (Measure::StaticBetweenness, m),
        };
        let s = centrality_of(&g, static_m, a.delta, &a.samples, ctx.seed)?;
        let t = centrality_of(&g, temporal_m, a.delta, &a.samples, ctx.seed)?;
        ctx.write_commented(Some(path), |out| Ok(write_scatter_csv(&g, &s, &t, out)?))?;
    }
    Ok(())
}

pub fn paths(ctx: &Ctx, a: &PathsArgs) -> Result<(), CliError> {
    check_delta(a.delta)?;
    if a.k == 0 {
        return Err(usage("-k must be at least 1"));
    }
    let g = load_file(&a.input)?;
    if a.explicit {
        let found = enumerate_paths_bruteforce(&g, a.delta, a.k);
        return ctx.write_commented(a.output.as_deref(), |out| {
            Ok(write_paths_csv(&g, &found, out)?)
        });
    }
    let counts = count_paths_length_k(&EventGraph::new(&g, a.delta)?, a.k)?;
    ctx.write_commented(a.output.as_deref(), |out| {
        writeln!(out, "# total: {}", counts.total())?;
        if a.k == 2 {
            writeln!(out, "# length_two_bound: {}", length_two_path_bound(&g))?;
        }
        writeln!(out, "node_seq,count")?;
        for (seq, c) in &counts.counts {
            let names: Vec<&str> = seq.iter().map(|&v| g.name(v)).collect();
            writeln!(out, "{},{c}", names.join("|"))?;
        }
        Ok(())
    })
}

pub fn debruijn(ctx: &Ctx, a: &DebruijnArgs) -> Result<(), CliError> {
    check_delta(a.delta)?;
    if a.order == 0 {
        return Err(usage("--order must be at least 1"));
    }
    let g = load_file(&a.input)?;
    let dbg = build_debruijn(&g, a.delta, a.order)?;
    ctx.write_commented(a.output.as_deref(), |out| Ok(dbg.write_edges_csv(&g, out)?))?;
    if let Some(path) = &a.bipartite {
        ctx.write_commented(Some(path), |out| Ok(dbg.write_bipartite_csv(&g, out)?))?;
    }
    Ok(())
}

pub fn order_select(ctx: &Ctx, a: &OrderSelectArgs) -> Result<(), CliError> {
    check_delta(a.delta)?;
    if a.max_order == 0 {
        return Err(usage("--max-order must be at least 1"));
    }
    if !(a.significance > 0.0 && a.significance < 1.0) {
        return Err(usage("--significance must lie in (0, 1)"));
    }
    let g = load_file(&a.input)?;
    let sel = select_order(&g, a.delta, a.max_order, a.significance)?;
    match a.format {
        Format::Json => ctx.write_json(a.output.as_deref(), &sel),
        Format::Text => ctx.write_commented(a.output.as_deref(), |out| {
            writeln!(out, "optimal_order: {}", sel.optimal_order)?;
            writeln!(out, "searched_up_to: {}", sel.searched_up_to)?;
            writeln!(
                out,
                "{:>5} {:>14} {:>14} {:>12} {:>6} {:>10} accepted",
                "order", "loglik_lower", "loglik_higher", "statistic", "df", "p_value"
            )?;
            for t in &sel.tests {
                writeln!(
                    out,
                    "{:>5} {:>14.4} {:>14.4} {:>12.4} {:>6} {:>10.3e} {}",
                    t.order,
                    t.log_likelihood_lower,
                    t.log_likelihood_higher,
                    t.statistic,
                    t.degrees_of_freedom,
                    t.p_value,
                    t.accepted
                )?;
            }
            Ok(())
        }),
    }
}

#[derive(Serialize)]
struct TrainSummary {
    model: Architecture,
    measure: Measure,
    epochs: usize,
    lr: f64,
    final_loss: f64,
    test_nodes: usize,
    metrics: MetricSet,
}

pub fn train(ctx: &Ctx, a: &TrainArgs) -> Result<(), CliError> {
    let tc = train_config(&a.training, a.lr, a.measure, ctx.seed)?;
    let g = load_source(&a.source, ctx.seed)?;
    let t = &a.training;
    let prepared = PreparedWindows::new(&g, t.train_fraction, t.delta, t.order, t.aggregation)?;
    let train_truth = ground_truth(&prepared.split.train, a.measure, t.delta)?;
    let test_truth = ground_truth(&prepared.split.test, a.measure, t.delta)?;
    let (model, run) = fit_model(a.model, &prepared, &train_truth, &tc)?;
    let pred = model.predict(&prepared.test, run.scale)?;
    let nodes = active_nodes(&prepared.test.active);
    let p: Vec<f64> = nodes.iter().map(|&v| pred[v]).collect();
    let truth: Vec<f64> = nodes.iter().map(|&v| test_truth[v]).collect();
    let metrics = rank_metrics(&p, &truth, 10)?;

    if let Some(path) = &a.checkpoint {
        let ckpt = match &model {
            Trained::Dbgnn(m) => Checkpoint::from_dbgnn(m, &tc, run.scale),
            Trained::Gcn(m) => Checkpoint::from_gcn(m, &prepared.registry, &tc, run.scale),
        };
        let mut doc = serde_json::to_value(&ckpt).map_err(tempora::Error::from)?;
        doc["provenance"] = ctx.provenance();
        write_value(Some(path), &doc)?;
    }
    if let Some(path) = &a.predictions {
        ctx.write_commented(Some(path), |out| {
            Ok(write_predictions_csv(
                &prepared.split.test,
                &nodes,
                &pred,
                &test_truth,
                out,
            )?)
        })?;
    }
    if let Some(path) = &a.loss_trace {
        ctx.write_commented(Some(path), |out| {
            writeln!(out, "epoch,loss")?;
            for (i, l) in run.loss_trace.iter().enumerate() {
                writeln!(out, "{i},{l}")?;
            }
            Ok(())
        })?;
    }
    let summary = TrainSummary {
        model: a.model,
        measure: a.measure,
        epochs: t.epochs,
        lr: a.lr,
        final_loss: run.final_loss(),
        test_nodes: nodes.len(),
        metrics,
    };
    match a.format {
        Format::Json => ctx.write_json(a.output.as_deref(), &summary),
        Format::Text => ctx.write_commented(a.output.as_deref(), |out| {
            writeln!(out, "model: {}", summary.model)?;
            writeln!(out, "measure: {}", summary.measure)?;
            writeln!(out, "final_loss: {}", summary.final_loss)?;
            writeln!(out, "test_nodes: {}", summary.test_nodes)?;
            writeln!(out, "spearman: {:.4}", metrics.spearman)?;
            writeln!(out, "kendall_tau: {:.4}", metrics.kendall_tau)?;
            writeln!(out, "hits_at_{}: {}", metrics.k, metrics.hits_at_k)?;
            writeln!(out, "mae: {:.6e}", metrics.mae)?;
            Ok(())
        }),
    }
}

pub fn evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<(), CliError> {
    let t = &a.training;
    check_delta(t.delta)?;
    check_fraction(t.train_fraction)?;
    let cfg = ExperimentConfig {
        dataset: dataset(&a.source, ctx.seed)?,
        measures: a.measures.clone(),
        models: a.models.clone(),
        delta: t.delta,
        order: t.order,
        train_fraction: t.train_fraction,
        epochs: t.epochs,
        lr_grid: a.lr_grid.clone(),
        weight_decay: t.weight_decay,
        runs: a.runs,
        seed: ctx.seed,
        aggregation: t.aggregation,
        scale_targets: t.scale_targets,
        hits_k: a.hits_k,
        record_timings: a.timings,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let report = run_experiment(&cfg)?;
    if let Some(path) = &a.output {
        ctx.write_json(Some(path), &report)?;
    }
    if let Some(path) = &a.runs_csv {
        ctx.write_commented(Some(path), |out| Ok(report.write_runs_csv(out)?))?;
    }
    ctx.write_commented(a.text.as_deref(), |out| {
        writeln!(out, "# tie-break: {}", report.tie_break)?;
        Ok(report.write_text(out)?)
    })
}

pub fn benchmark(ctx: &Ctx, a: &BenchmarkArgs) -> Result<(), CliError> {
    if !matches!(
        a.measure,
        Measure::TemporalBetweenness | Measure::TemporalCloseness
    ) {
        return Err(usage(
            "--measure must be temporal-betweenness or temporal-closeness",
        ));
    }
    if a.repetitions == 0 {
        return Err(usage("--repetitions must be at least 1"));
    }
    let tc = train_config(&a.training, a.lr, a.measure, ctx.seed)?;
    let t = &a.training;
    let g = load_source(&a.source, ctx.seed)?;
    let prepared = PreparedWindows::new(&g, t.train_fraction, t.delta, t.order, t.aggregation)?;
    let truth = ground_truth(&prepared.split.train, a.measure, t.delta)?;
    let Trained::Dbgnn(model) = fit_model(Architecture::Dbgnn, &prepared, &truth, &tc)?.0 else {
        unreachable!("asked for a DBGNN")
    };
    let cfg = BenchmarkConfig {
        measure: a.measure,
        delta: t.delta,
        aggregation: t.aggregation,
        repetitions: a.repetitions,
    };
    let record = benchmark_speedup(&model, &prepared.split.test, &cfg)?;
    ctx.write_json(a.output.as_deref(), &record)
}

pub fn approx_betweenness(ctx: &Ctx, a: &ApproxArgs) -> Result<(), CliError> {
    check_delta(a.delta)?;
    let samples = sampling(&a.samples)?;
    let g = load_file(&a.input)?;
    let values = approx_temporal_betweenness(&g, a.delta, samples, ctx.seed)?;
    ctx.write_commented(a.output.as_deref(), |out| Ok(values.write_csv(&g, out)?))
}

pub fn export(ctx: &Ctx, a: &ExportArgs) -> Result<(), CliError> {
    check_fraction(a.train_fraction)?;
    let path = a
        .checkpoint
        .as_ref()
        .ok_or_else(|| usage("--checkpoint is required"))?;
    existing(path, "checkpoint")?;
    let g = load_file(&a.input)?;
    let file = File::open(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    let ckpt = Checkpoint::read(BufReader::new(file))?;
    if ckpt.architecture != Architecture::Dbgnn {
        return Err(usage("embeddings need a DBGNN checkpoint"));
    }
    let model = ckpt.to_dbgnn()?;
    let split = time_split(&g, a.train_fraction)?;
    let window = match a.window {
        WindowChoice::Train => &split.train,
        WindowChoice::Test => &split.test,
    };
    let dbgs = build_debruijn_orders(
        &EventGraph::new(window, ckpt.config.delta)?,
        model.registry.max_order(),
    )?;
    let w = WindowGraphs::new(&model.registry, &dbgs, window, ckpt.config.aggregation)?;
    ctx.write_commented(a.output.as_deref(), |out| {
        Ok(export_embeddings(&model, &w, window, out)?)
    })
}

pub fn synth(ctx: &Ctx, a: &SynthCommandArgs) -> Result<(), CliError> {
    let g = generate(&synth_spec(a.kind, &a.params, ctx.seed)).map_err(|e| usage(e.to_string()))?;
    ctx.write_commented(a.output.as_deref(), |out| Ok(g.write_edge_list(out)?))
}
