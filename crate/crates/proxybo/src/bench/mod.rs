//! Benchmark tables, synthetic benchmark generation, and search statistics.
//!
//! The engine never trains networks; it looks architectures up in a
//! [`BenchmarkTable`] that maps every encoding to precomputed metrics. This
//! module provides the table type and its canonical file format
//! ([`table`]), a seeded generator for synthetic tables with proxy columns
//! of controlled quality ([`synthetic`]), and the rank/curve statistics used
//! to judge proxies and compare strategies ([`stats`]).

pub mod stats;
pub mod synthetic;
pub mod table;

pub use stats::{
    average_ranks, evaluations_to_reach, mean_best_curve, spearman, spearman_top_fraction,
    speedup_table, SpeedupEntry,
};
pub use synthetic::{generate, ProxyTarget, SyntheticSpec};
pub use table::{BenchmarkMeta, BenchmarkRecord, BenchmarkTable};
