//! Temporal path centralities and De Bruijn graph neural networks.
//!
//! Start from a [`graph::TemporalGraph`], either parsed with
//! [`graph::read_edge_list`] or generated with [`synth::generate`].
//! [`paths::EventGraph`] fixes the maximum waiting time `delta` and supports
//! shortest paths, path counts and the De Bruijn graphs in [`debruijn`].
//! [`centrality`] computes exact and sampled temporal centralities.
//! [`models`] holds the DBGNN and GCN built on the kernel in [`nn`], and
//! [`eval`] runs multi-seed experiments and benchmarks.
//!
//! ```
//! use tempora::centrality::temporal_closeness;
//! use tempora::graph::TemporalGraph;
//!
//! let g = TemporalGraph::from_observations(
//!     &[("a", "b", 1.0), ("b", "c", 2.0), ("b", "c", 5.0), ("c", "d", 6.0)],
//!     true,
//! )?;
//! let c = temporal_closeness(&g, 2.0)?;
//! assert_eq!(c.values[g.node("d")?], 1.0 / 7.0);
//! # Ok::<(), tempora::Error>(())
//! ```

pub mod centrality;
pub mod debruijn;
pub mod error;
pub mod eval;
pub mod graph;
pub mod models;
pub mod nn;
pub mod paths;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/temporal-graphs.md")]
    mod temporal_graphs {}
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/centrality.md")]
    mod centrality {}
    #[doc = include_str!("../../../book/src/debruijn.md")]
    mod debruijn {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
