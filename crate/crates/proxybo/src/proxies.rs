//! Zero-cost proxy scorers.
//!
//! A proxy assigns every architecture a cheap score meant to correlate with
//! its trained accuracy. Three gradient-based proxies are implemented against
//! the seeded host networks of [`crate::tinynet`], plus a table-backed proxy
//! that replays a precomputed column from a benchmark file.
//!
//! **Sign convention:** all scores are *lower-is-better*, matching the
//! minimization orientation of the search engine. The saliency-style proxies
//! are aggregated as the *negated* sum of their per-parameter saliencies, so
//! a network with large saliency (conventionally "good") gets a small score.
//! A proxy whose computation degenerates (non-finite gradients) yields `+∞`,
//! i.e. "worst possible", rather than an error, so one pathological
//! architecture cannot abort a search run.

use std::collections::HashMap;

use ndarray::Array2;

use crate::bench::BenchmarkTable;
use crate::error::{Error, Result};
use crate::rng;
use crate::space::{ArchEncoding, SearchSpaceSpec};
use crate::tinynet::{self, Batch, Loss, NetSpec, ParamSet};

/// Rows in the fixed data batch used by the gradient-based proxies.
pub const PROXY_BATCH_ROWS: usize = 16;

/// Ridge added to the Jacobian correlation matrix before the determinant.
pub const JACOBIAN_RIDGE: f64 = 1e-5;

/// Derivation tags for the context's input batch and parameter seeds.
const TAG_BATCH: u64 = 0x70_62_61_74; // "pbat"
const TAG_INIT: u64 = 0x70_69_6e_69; // "pini"

/// A named architecture scorer. Lower scores indicate better architectures.
pub trait ProxyScorer: Send + Sync {
    /// Short identifier used in traces and diagnostics (e.g. `"snip"`).
    fn name(&self) -> &str;

    /// Scores one architecture. Deterministic for a fixed scorer instance.
    fn score(&self, x: &ArchEncoding) -> Result<f64>;
}

/// Shared inputs of the gradient-based scorers: the space, a seed for
/// parameter initialization, and a fixed data batch derived from that seed.
#[derive(Debug, Clone)]
pub struct ProxyContext {
    space: SearchSpaceSpec,
    seed: u64,
    data: Batch,
}

impl ProxyContext {
    /// Builds a context whose data batch and initializations derive from `seed`.
    pub fn new(space: SearchSpaceSpec, seed: u64) -> Self {
        let data = Batch::seeded_normal(
            PROXY_BATCH_ROWS,
            tinynet::INPUT_DIM,
            Some(tinynet::OUTPUT_DIM),
            rng::mix(seed, TAG_BATCH),
        );
        Self { space, seed, data }
    }

    /// The search space this context scores.
    pub fn space(&self) -> &SearchSpaceSpec {
        &self.space
    }

    fn instantiate(&self, x: &ArchEncoding) -> Result<(NetSpec, ParamSet)> {
        tinynet::instantiate(x, &self.space, rng::mix(self.seed, TAG_INIT))
    }
}

/// Maps degenerate computations to the `+∞` sentinel, keeping real errors.
fn sentinel_on_non_finite(name: &str, x: &ArchEncoding, r: Result<f64>) -> Result<f64> {
    match r {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) | Err(Error::NonFinite { .. }) => {
            log::warn!("proxy {name} degenerated on {x}; scoring it as +inf");
            Ok(f64::INFINITY)
        }
        Err(e) => Err(e),
    }
}

/// Connection-sensitivity score from one labelled batch.
///
/// Computes the loss gradient of a half-squared-error objective and sums
/// `|g ⊙ θ|` over all parameters; the returned score is the negated sum.
pub fn snip_from_net(spec: &NetSpec, params: &ParamSet, batch: &Batch) -> Result<f64> {
    let grads = tinynet::grad_params(spec, params, batch, Loss::SquaredError)?;
    let saliency = grads.zip_sum(params, |g, w| (g * w).abs())?;
    Ok(-saliency)
}

/// Data-free synaptic-flow score.
///
/// Takes the parameters elementwise-absolute, feeds a single all-ones input,
/// and differentiates the summed outputs; the per-parameter saliency is
/// `g ⊙ |θ|` and the returned score is its negated sum. With non-negative
/// parameters and a non-negative input every term is non-negative, so the
/// score never benefits from cancellation.
pub fn synflow_from_net(spec: &NetSpec, params: &ParamSet) -> Result<f64> {
    let abs_params = params.map(f64::abs);
    synflow_raw_from_net(spec, &abs_params)
}

/// Synaptic-flow variant that skips the absolute-value transform.
///
/// Exposed for comparison: signed parameters let positive and negative flow
/// cancel, which makes the score noisier on ReLU-free paths.
pub fn synflow_raw_from_net(spec: &NetSpec, params: &ParamSet) -> Result<f64> {
    let batch = Batch::ones(1, spec.input_dim);
    let grads = tinynet::grad_params(spec, params, &batch, Loss::SumOfOutputs)?;
    let saliency = grads.zip_sum(params, |g, w| g * w)?;
    Ok(-saliency)
}

/// Jacobian-diversity score from per-example input-gradient rows.
///
/// Builds the Pearson correlation matrix of the rows, adds a small ridge for
/// numerical safety, and returns `-log |det|`: highly correlated (redundant)
/// Jacobians give a near-singular matrix, a strongly negative log-determinant,
/// and therefore a large (bad) score. Rows with zero variance correlate `0`
/// with everything (diagonal stays `1`).
pub fn jacob_cov_from_rows(rows: &Array2<f64>) -> Result<f64> {
    let n = rows.nrows();
    if n < 2 {
        return Err(Error::InvalidValue(
            "jacobian covariance needs at least two examples".into(),
        ));
    }
    let (corr, degenerate) = correlation_matrix(rows);
    if degenerate > 0 {
        log::debug!("{degenerate} of {n} jacobian rows had zero variance");
    }
    let mut k = corr;
    for i in 0..n {
        k[[i, i]] += JACOBIAN_RIDGE;
    }
    let (sign, log_abs_det) = log_abs_determinant(&k);
    if sign == 0 {
        // Exactly singular despite the ridge: treat as maximally redundant.
        return Ok(f64::INFINITY);
    }
    Ok(-log_abs_det)
}

/// Pearson correlation matrix of the rows of `m`, plus the count of
/// zero-variance rows (which correlate 0 with everything by convention).
pub fn correlation_matrix(m: &Array2<f64>) -> (Array2<f64>, usize) {
    let n = m.nrows();
    let d = m.ncols();
    let means: Vec<f64> = (0..n).map(|i| m.row(i).sum() / d as f64).collect();
    let norms: Vec<f64> = (0..n)
        .map(|i| {
            m.row(i)
                .iter()
                .map(|v| (v - means[i]) * (v - means[i]))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let degenerate = norms.iter().filter(|&&s| s == 0.0).count();
    let mut corr = Array2::zeros((n, n));
    for i in 0..n {
        corr[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let c = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                let num: f64 = m
                    .row(i)
                    .iter()
                    .zip(m.row(j).iter())
                    .map(|(a, b)| (a - means[i]) * (b - means[j]))
                    .sum();
                num / (norms[i] * norms[j])
            };
            corr[[i, j]] = c;
            corr[[j, i]] = c;
        }
    }
    (corr, degenerate)
}

/// Log absolute determinant via LU decomposition with partial pivoting.
///
/// Returns `(sign, log|det|)`; a zero sign flags an exactly singular matrix.
pub fn log_abs_determinant(m: &Array2<f64>) -> (i8, f64) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant needs a square matrix");
    let mut a = m.clone();
    let mut sign: i8 = 1;
    let mut log_det = 0.0;
    for col in 0..n {
        // Partial pivot: largest magnitude in the column at or below the diagonal.
        let mut pivot_row = col;
        let mut pivot_val = a[[col, col]].abs();
        for r in (col + 1)..n {
            let v = a[[r, col]].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val == 0.0 {
            return (0, f64::NEG_INFINITY);
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = a[[col, c]];
                a[[col, c]] = a[[pivot_row, c]];
                a[[pivot_row, c]] = tmp;
            }
            sign = -sign;
        }
        let pivot = a[[col, col]];
        if pivot < 0.0 {
            sign = -sign;
        }
        log_det += pivot.abs().ln();
        for r in (col + 1)..n {
            let factor = a[[r, col]] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in (col + 1)..n {
                a[[r, c]] -= factor * a[[col, c]];
            }
            a[[r, col]] = 0.0;
        }
    }
    (sign, log_det)
}

/// Jacobian-diversity score of a network on a data batch.
pub fn jacob_cov_from_net(spec: &NetSpec, params: &ParamSet, batch: &Batch) -> Result<f64> {
    let rows = tinynet::grad_inputs_per_example(spec, params, &batch.inputs)?;
    jacob_cov_from_rows(&rows)
}

/// Connection-sensitivity proxy (`snip`).
pub struct Snip {
    ctx: ProxyContext,
}

impl Snip {
    pub fn new(ctx: ProxyContext) -> Self {
        Self { ctx }
    }
}

impl ProxyScorer for Snip {
    fn name(&self) -> &str {
        "snip"
    }

    fn score(&self, x: &ArchEncoding) -> Result<f64> {
        let r = self
            .ctx
            .instantiate(x)
            .and_then(|(spec, params)| snip_from_net(&spec, &params, &self.ctx.data));
        sentinel_on_non_finite(self.name(), x, r)
    }
}

/// Which parameter transform the synaptic-flow proxy applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynflowVariant {
    /// Score `|θ|` (the standard, cancellation-free form).
    #[default]
    AbsParams,
    /// Score the raw signed parameters.
    RawParams,
}

/// Data-free synaptic-flow proxy (`synflow`).
pub struct Synflow {
    ctx: ProxyContext,
    variant: SynflowVariant,
}

impl Synflow {
    pub fn new(ctx: ProxyContext) -> Self {
        Self {
            ctx,
            variant: SynflowVariant::default(),
        }
    }

    /// Selects the signed-parameter variant instead of the default.
    pub fn with_variant(ctx: ProxyContext, variant: SynflowVariant) -> Self {
        Self { ctx, variant }
    }
}

impl ProxyScorer for Synflow {
    fn name(&self) -> &str {
        "synflow"
    }

    fn score(&self, x: &ArchEncoding) -> Result<f64> {
        let r = self.ctx.instantiate(x).and_then(|(spec, params)| match self.variant {
            SynflowVariant::AbsParams => synflow_from_net(&spec, &params),
            SynflowVariant::RawParams => synflow_raw_from_net(&spec, &params),
        });
        sentinel_on_non_finite(self.name(), x, r)
    }
}

/// Jacobian-diversity proxy (`jacob_cov`).
pub struct JacobCov {
    ctx: ProxyContext,
}

impl JacobCov {
    pub fn new(ctx: ProxyContext) -> Self {
        Self { ctx }
    }
}

impl ProxyScorer for JacobCov {
    fn name(&self) -> &str {
        "jacob_cov"
    }

    fn score(&self, x: &ArchEncoding) -> Result<f64> {
        let r = self
            .ctx
            .instantiate(x)
            .and_then(|(spec, params)| jacob_cov_from_net(&spec, &params, &self.ctx.data));
        sentinel_on_non_finite(self.name(), x, r)
    }
}

/// Proxy that replays a precomputed score column from a benchmark table.
pub struct TabularProxy {
    name: String,
    scores: HashMap<ArchEncoding, f64>,
}

impl TabularProxy {
    /// Extracts column `name`, requiring every table row to carry it.
    pub fn from_table(table: &BenchmarkTable, name: &str) -> Result<Self> {
        let scores = table.proxy_column(name)?;
        Ok(Self {
            name: name.to_string(),
            scores,
        })
    }
}

impl ProxyScorer for TabularProxy {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, x: &ArchEncoding) -> Result<f64> {
        self.scores
            .get(x)
            .copied()
            .ok_or_else(|| Error::MissingEntry(x.to_string()))
    }
}

/// A proxy choice as written on the command line or in a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProxySelect {
    Snip,
    Synflow,
    JacobCov,
    /// A named score column carried by the benchmark table.
    Tabular(String),
}

impl std::fmt::Display for ProxySelect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProxySelect::Snip => f.write_str("snip"),
            ProxySelect::Synflow => f.write_str("synflow"),
            ProxySelect::JacobCov => f.write_str("jacob_cov"),
            ProxySelect::Tabular(name) => write!(f, "tabular:{name}"),
        }
    }
}

impl std::str::FromStr for ProxySelect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "snip" => Ok(ProxySelect::Snip),
            "synflow" => Ok(ProxySelect::Synflow),
            "jacob_cov" => Ok(ProxySelect::JacobCov),
            other => {
                if let Some(name) = other.strip_prefix("tabular:") {
                    if name.is_empty() {
                        return Err(Error::InvalidValue(
                            "tabular proxy needs a column name, e.g. tabular:good".into(),
                        ));
                    }
                    Ok(ProxySelect::Tabular(name.to_string()))
                } else {
                    Err(Error::InvalidValue(format!(
                        "unknown proxy `{other}` (expected snip, synflow, jacob_cov, or tabular:<name>)"
                    )))
                }
            }
        }
    }
}

/// Parses a comma-separated proxy list; the literal `none` (alone) means no proxies.
pub fn parse_proxy_list(s: &str) -> Result<Vec<ProxySelect>> {
    let trimmed = s.trim();
    if trimmed.is_empty() || trimmed == "none" {
        return Ok(Vec::new());
    }
    trimmed.split(',').map(str::parse).collect()
}

/// Instantiates scorers for the given selections.
///
/// Gradient-based proxies score networks seeded by `(space, seed)`; tabular
/// selections require `table` to carry the named column on every row.
pub fn build_scorers(
    selects: &[ProxySelect],
    space: &SearchSpaceSpec,
    seed: u64,
    table: Option<&BenchmarkTable>,
) -> Result<Vec<Box<dyn ProxyScorer>>> {
    let mut scorers: Vec<Box<dyn ProxyScorer>> = Vec::with_capacity(selects.len());
    for sel in selects {
        match sel {
            ProxySelect::Snip => {
                scorers.push(Box::new(Snip::new(ProxyContext::new(space.clone(), seed))))
            }
            ProxySelect::Synflow => {
                scorers.push(Box::new(Synflow::new(ProxyContext::new(space.clone(), seed))))
            }
            ProxySelect::JacobCov => {
                scorers.push(Box::new(JacobCov::new(ProxyContext::new(space.clone(), seed))))
            }
            ProxySelect::Tabular(name) => {
                let table = table.ok_or_else(|| {
                    Error::InvalidValue(format!(
                        "tabular proxy `{name}` requires a benchmark table"
                    ))
                })?;
                scorers.push(Box::new(TabularProxy::from_table(table, name)?));
            }
        }
    }
    Ok(scorers)
}
