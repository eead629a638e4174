use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tempora::centrality::Measure;
use tempora::models::{Aggregation, Architecture};
use tempora::synth::SynthKind;

#[derive(Debug, Parser)]
#[command(
    name = "tempora",
    version,
    about = "Temporal centralities, De Bruijn graph models and DBGNN training"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// JSON file whose keys mirror the long flags; flags given on the command line win
    #[arg(long, global = true, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Worker threads for per-source and per-seed loops [default: logical cores]
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Seed for every random choice
    #[arg(long, global = true, env = "TEMPORA_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Leave the generation timestamp out of artifact headers
    #[arg(long, global = true)]
    pub deterministic_headers: bool,

    /// More log output (-v info, -vv debug); RUST_LOG takes precedence
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Node, edge and timestamp counts of an edge list
    Stats(StatsArgs),
    /// Exact or static centralities as `node,value` CSV
    Centrality(CentralityArgs),
    /// Counts (or explicit lists) of time-respecting paths of length k
    Paths(PathsArgs),
    /// Order-k De Bruijn graph as CSV
    Debruijn(DebruijnArgs),
    /// Likelihood-ratio detection of the optimal De Bruijn order
    OrderSelect(OrderSelectArgs),
    /// Train one model on the first window and score it on the second
    Train(TrainArgs),
    /// Repeated split/train/score runs over a learning-rate grid
    Evaluate(EvaluateArgs),
    /// Exact centrality against De Bruijn refit plus inference, single-threaded
    Benchmark(BenchmarkArgs),
    /// Pair-sampling estimate of temporal betweenness
    ApproxBetweenness(ApproxArgs),
    /// Bipartite-layer activations of a trained DBGNN as CSV
    ExportEmbeddings(ExportArgs),
    /// Generate a synthetic temporal edge list
    Synth(SynthCommandArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stats(_) => "stats",
            Command::Centrality(_) => "centrality",
            Command::Paths(_) => "paths",
            Command::Debruijn(_) => "debruijn",
            Command::OrderSelect(_) => "order-select",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Benchmark(_) => "benchmark",
            Command::ApproxBetweenness(_) => "approx-betweenness",
            Command::ExportEmbeddings(_) => "export-embeddings",
            Command::Synth(_) => "synth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowChoice {
    Train,
    Test,
}

/// Where an edge list comes from and how to read it.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// Edge list `source target timestamp`; `.gz` files are decompressed
    #[arg(long, short, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Treat every observation as an undirected contact
    #[arg(long)]
    pub undirected: bool,

    /// Field separator: auto, whitespace or a single character
    #[arg(long, default_value = "auto")]
    pub delimiter: String,

    /// Skip the first non-comment line
    #[arg(long)]
    pub header: bool,

    /// Zero-based source, target and timestamp columns
    #[arg(long, default_value = "0,1,2", value_name = "S,T,TIME")]
    pub columns: String,
}

/// Parameters of the synthetic generators.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthParams {
    #[arg(long, default_value_t = 80)]
    pub nodes: usize,

    /// Minimum number of temporal edges
    #[arg(long, default_value_t = 3000)]
    pub edges: usize,

    /// Out-degree of the static digraph the walks run on
    #[arg(long, default_value_t = 4)]
    pub out_degree: usize,

    /// Steps per walk
    #[arg(long, default_value_t = 8)]
    pub walk_length: usize,

    /// Idle time between consecutive walks
    #[arg(long, default_value_t = 5.0)]
    pub gap: f64,

    /// Weight of the planted second-order preference, in [0, 1]
    #[arg(long, default_value_t = 0.9)]
    pub strength: f64,

    /// Timestamp range of the uniform generator
    #[arg(long, default_value_t = 1000.0)]
    pub horizon: f64,
}

/// An edge-list file or a generated graph.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SourceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub file: InputArgs,

    /// Generate the graph instead of reading --input (seeded by --seed)
    #[arg(long, value_name = "KIND", conflicts_with = "input")]
    pub synth: Option<SynthKind>,

    #[command(flatten)]
    #[serde(flatten)]
    pub params: SynthParams,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct StatsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Write here instead of stdout
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CentralityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value_t = Measure::TemporalBetweenness)]
    pub measure: Measure,

    /// Maximum waiting time between consecutive edges of a path
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,

    /// Sampled pairs for approx-temporal-betweenness, or `all`
    #[arg(long, default_value = "1000")]
    pub samples: String,

    /// Also write `node,static_value,temporal_value` scatter pairs here
    #[arg(long, value_name = "PATH")]
    pub scatter: Option<PathBuf>,

    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PathsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,

    /// Path length in edges
    #[arg(long, short, default_value_t = 2)]
    pub k: usize,

    /// List every path of length 1..=k with its timestamps (exhaustive search)
    #[arg(long)]
    pub explicit: bool,

    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DebruijnArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,

    #[arg(long, default_value_t = 2)]
    pub order: usize,

    /// Edge CSV `src_seq,dst_seq,weight`
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Also write the `ho_seq,first_order_node` map here
    #[arg(long, value_name = "PATH")]
    pub bipartite: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OrderSelectArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,

    /// Highest order considered
    #[arg(long, default_value_t = 3)]
    pub max_order: usize,

    #[arg(long, default_value_t = 0.01)]
    pub significance: f64,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

/// Model and optimizer settings shared by train, evaluate and benchmark.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,

    /// Highest De Bruijn order fed to the DBGNN
    #[arg(long, default_value_t = 2)]
    pub order: usize,

    /// Share of temporal edges in the training window
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,

    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,

    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,

    /// How the bipartite layer combines higher-order messages: mean or sum
    #[arg(long, default_value_t = Aggregation::Mean)]
    pub aggregation: Aggregation,

    /// Fit on min-max scaled targets and map predictions back
    #[arg(long)]
    pub scale_targets: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingArgs,

    #[arg(long, default_value_t = Architecture::Dbgnn)]
    pub model: Architecture,

    #[arg(long, default_value_t = Measure::TemporalCloseness)]
    pub measure: Measure,

    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,

    /// Save the trained parameters as a JSON checkpoint
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,

    /// Test-window `node,predicted,ground_truth` CSV
    #[arg(long, value_name = "PATH")]
    pub predictions: Option<PathBuf>,

    /// Per-epoch `epoch,loss` CSV
    #[arg(long, value_name = "PATH")]
    pub loss_trace: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Summary destination instead of stdout
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingArgs,

    #[arg(
        long = "measure",
        value_delimiter = ',',
        default_value = "temporal-closeness,temporal-betweenness"
    )]
    pub measures: Vec<Measure>,

    #[arg(long = "model", value_delimiter = ',', default_value = "dbgnn,gcn")]
    pub models: Vec<Architecture>,

    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001,0.0001")]
    pub lr_grid: Vec<f64>,

    /// Repetitions; synthetic graphs are regenerated with seed + run
    #[arg(long, default_value_t = 20)]
    pub runs: usize,

    #[arg(long, default_value_t = 10)]
    pub hits_k: usize,

    /// Record per-phase wall-clock times (makes the report non-reproducible)
    #[arg(long)]
    pub timings: bool,

    /// JSON report
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// Aligned-column summary; printed to stdout when omitted
    #[arg(long, value_name = "PATH")]
    pub text: Option<PathBuf>,

    /// One CSV row per run, model and learning rate
    #[arg(long, value_name = "PATH")]
    pub runs_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,

    #[command(flatten)]
    #[serde(flatten)]
    pub training: TrainingArgs,

    #[arg(long, default_value_t = Measure::TemporalBetweenness)]
    pub measure: Measure,

    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,

    /// Timed repetitions; medians are reported
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,

    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ApproxArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,

    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,

    /// Ordered pairs drawn with replacement, or `all`
    #[arg(long, default_value = "1000")]
    pub samples: String,

    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,

    /// DBGNN checkpoint written by `train`
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,

    /// Must match the split used in training
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,

    #[arg(long, value_enum, default_value_t = WindowChoice::Test)]
    pub window: WindowChoice,

    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthCommandArgs {
    #[arg(long, default_value_t = SynthKind::PlantedOrder2)]
    pub kind: SynthKind,

    #[command(flatten)]
    #[serde(flatten)]
    pub params: SynthParams,

    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn lr_grid_parses_comma_lists() {
        let cli = Cli::try_parse_from([
            "tempora",
            "evaluate",
            "--synth",
            "uniform",
            "--lr-grid",
            "0.1,0.5",
        ])
        .unwrap();
        let Command::Evaluate(e) = cli.command else {
            panic!("evaluate expected")
        };
        assert_eq!(e.lr_grid, vec![0.1, 0.5]);
    }
}
