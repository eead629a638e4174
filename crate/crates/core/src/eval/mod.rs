//! Rank metrics, the end-to-end experiment runner, the speed-up benchmark
//! and embedding export.

mod bench;
mod experiment;
mod metrics;

pub use bench::{
    benchmark_speedup, embeddings, export_embeddings, median, BenchmarkConfig, SpeedupRecord,
};
pub use experiment::{
    fit_model, ground_truth, run_experiment, summarize, write_predictions_csv, Dataset,
    ExperimentConfig, ExperimentReport, MeanStd, PhaseTimings, PreparedWindows, RunRecord,
    SummaryRow, Trained, TIE_BREAK,
};
pub use metrics::{
    average_ranks, hits_at_k, kendall_tau_b, mean_absolute_error, pearson, rank_metrics, spearman,
    top_k, MetricSet,
};
