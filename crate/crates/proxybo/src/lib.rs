//! Proxy-guided Bayesian optimization for discrete architecture search spaces.
//!
//! This crate implements a sequential model-based search engine for tabular
//! neural-architecture benchmarks. The distinguishing idea is that cheap
//! *zero-cost proxies* — scores computed from a single forward/backward pass
//! of an untrained network — are folded into the Bayesian-optimization loop
//! as extra advisors. Each advisor's advice is only trusted in proportion to
//! its demonstrated ability to order the architectures evaluated so far, so
//! a helpful proxy accelerates the early search while a misleading one is
//! sidelined automatically as evidence accumulates.
//!
//! The pieces, bottom to top:
//!
//! * [`space`] — discrete cell-style search spaces and architecture encodings.
//! * [`tinynet`] — small seeded MLPs instantiated from encodings, with exact
//!   gradients; these host the gradient-based proxy computations.
//! * [`proxies`] — the proxy scorers (`snip`, `synflow`, `jacob_cov`) plus
//!   table-backed proxy columns.
//! * [`surrogate`] — a probabilistic random-forest regressor with
//!   cross-validated in-sample predictions.
//! * [`acquisition`] — closed-form expected improvement.
//! * [`guidance`] — generalization measurement, softmax influence weights,
//!   and the rank-combination rule that picks the next architecture.
//! * [`engine`] — full search runs (`proxybo`, `random`, `bo`, `rea`) over a
//!   benchmark table, with per-iteration traces.
//! * [`bench`] — benchmark table I/O, a synthetic benchmark generator with
//!   calibrated proxy columns, and evaluation statistics.
//!
//! Every run is driven by explicit integer seeds and is bit-reproducible:
//! the same inputs produce byte-identical traces.

pub mod acquisition;
pub mod bench;
pub mod engine;
pub mod error;
pub mod guidance;
pub mod proxies;
pub mod rng;
pub mod space;
pub mod surrogate;
pub mod tinynet;

pub use error::{Error, Result};
