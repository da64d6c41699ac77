//! Generalization measurement, influence weighting, and guided sampling.
//!
//! Each iteration of a guided search asks: *who currently deserves a say in
//! picking the next architecture?* The candidates are the surrogate model
//! and the proxy scorers. Every component's past advice is replayed against
//! the evaluation history: the fraction of observation pairs whose order it
//! predicted correctly (the surrogate through cross-validated predictions,
//! each proxy through its recorded scores) becomes its *generalization
//! ability* `G ∈ [0, 1]`. A softmax over `G` with a slowly cooling
//! temperature turns those abilities into *influence* weights that sum to
//! one; early on the temperature keeps the mixture soft, and as evidence
//! accumulates the best component dominates.
//!
//! The next architecture is then chosen from a candidate pool by the lowest
//! influence-weighted average of per-component ranks: the surrogate ranks
//! candidates by expected improvement (descending), each proxy by its score
//! (ascending).

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::expected_improvement;
use crate::bench::stats::average_ranks;
use crate::error::{Error, Result};
use crate::proxies::ProxyScorer;
use crate::rng;
use crate::space::{ArchEncoding, SearchSpaceSpec};
use crate::surrogate::{cv_predict, ForestModel, ObservationSet};

/// Observations required before guided sampling activates; below this the
/// engine explores uniformly at random.
pub const COLD_START_MIN: usize = 5;

const TAG_COLD: u64 = 0x63_6f_6c_64; // "cold"
const TAG_CANDIDATES: u64 = 0x63_61_6e_64; // "cand"
const TAG_CV: u64 = 0x67_63_76; // "gcv"

/// Attempts at rejection-sampling an unevaluated mutation before falling
/// back to a uniform unevaluated draw.
const MUTATION_ATTEMPTS: usize = 256;

/// Logarithm used by the influence temperature schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    /// Natural logarithm (the default schedule).
    #[default]
    Natural,
    /// Base-10 logarithm: a faster-cooling alternative.
    Base10,
}

impl LogBase {
    fn log(self, v: f64) -> f64 {
        match self {
            LogBase::Natural => v.ln(),
            LogBase::Base10 => v.log10(),
        }
    }
}

/// Tunables of the guided sampling procedure.
#[derive(Debug, Clone)]
pub struct GuidanceConfig {
    /// Candidate pool size per iteration.
    pub q: usize,
    /// Initial softmax temperature.
    pub tau0: f64,
    /// Folds for the surrogate's cross-validated self-assessment.
    pub cv_folds: usize,
    /// How many incumbents seed the local half of the candidate pool.
    pub local_parents: usize,
    /// Logarithm of the temperature schedule.
    pub log_base: LogBase,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            q: 500,
            tau0: 0.05,
            cv_folds: 5,
            local_parents: 3,
            log_base: LogBase::Natural,
        }
    }
}

impl GuidanceConfig {
    /// Checks the numeric preconditions of the procedure.
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidValue("candidate pool size q must be positive".into()));
        }
        if !(self.tau0.is_finite() && self.tau0 > 0.0) {
            return Err(Error::InvalidValue(format!(
                "initial temperature must be positive and finite, got {}",
                self.tau0
            )));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidValue("cv_folds must be at least 2".into()));
        }
        if self.local_parents == 0 {
            return Err(Error::InvalidValue("local_parents must be at least 1".into()));
        }
        Ok(())
    }
}

/// Counts observation pairs whose relative order a score vector preserves.
///
/// For every unordered pair `j < k` the pair counts iff
/// `(scores[j] < scores[k])` and `(ys[j] < ys[k])` agree — both true or both
/// false. Ties participate through the strict comparisons: a score tie
/// paired with a strict objective order (or vice versa) counts as a miss,
/// while a tie on both sides counts as agreement.
pub fn order_preserving_pairs(scores: &[f64], ys: &[f64]) -> Result<u64> {
    if scores.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: ys.len(),
        });
    }
    if scores.len() < 2 {
        return Err(Error::InvalidValue(
            "pair counting needs at least two observations".into(),
        ));
    }
    if scores.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::InvalidValue("pair counting inputs must not be NaN".into()));
    }
    let n = scores.len();
    let mut count = 0u64;
    for j in 0..n {
        for k in (j + 1)..n {
            if (scores[j] < scores[k]) == (ys[j] < ys[k]) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Normalizes a preserved-pair count into `[0, 1]`: `2F / (n(n−1))`.
pub fn generalization_ratio(pairs: u64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidValue(
            "generalization ratio needs at least two observations".into(),
        ));
    }
    let total = (n as u64) * (n as u64 - 1) / 2;
    if pairs > total {
        return Err(Error::InvalidValue(format!(
            "{pairs} preserved pairs exceeds the {total} possible"
        )));
    }
    Ok(pairs as f64 / total as f64)
}

/// Generalization ability of a score vector against the observed objectives.
pub fn generalization_from_scores(scores: &[f64], ys: &[f64]) -> Result<f64> {
    let pairs = order_preserving_pairs(scores, ys)?;
    generalization_ratio(pairs, ys.len())
}

/// Influence weights with the temperature and abilities that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceVector {
    /// Generalization abilities, component order preserved.
    pub g: Vec<f64>,
    /// Softmax weights; non-negative, summing to one.
    pub influence: Vec<f64>,
    /// The cooled temperature used.
    pub tau: f64,
    /// The 1-based iteration the weights were computed for.
    pub iteration: usize,
}

/// Softmax influence over generalization abilities with a cooling
/// temperature `τ = τ₀ / (1 + log T)`.
///
/// As `T` grows the temperature falls, sharpening the softmax so the most
/// reliable component takes over; at `T = 1` the schedule starts at `τ₀`.
pub fn influence(
    g: &[f64],
    iteration: usize,
    tau0: f64,
    base: LogBase,
) -> Result<InfluenceVector> {
    if g.is_empty() {
        return Err(Error::InvalidValue("influence needs at least one component".into()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue(
            "generalization abilities must be finite".into(),
        ));
    }
    if iteration == 0 {
        return Err(Error::InvalidValue("iteration numbering is 1-based".into()));
    }
    if !(tau0.is_finite() && tau0 > 0.0) {
        return Err(Error::InvalidValue(format!(
            "initial temperature must be positive and finite, got {tau0}"
        )));
    }
    let tau = tau0 / (1.0 + base.log(iteration as f64));
    let max = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = g.iter().map(|v| ((v - max) / tau).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(InfluenceVector {
        g: g.to_vec(),
        influence: weights.iter().map(|w| w / total).collect(),
        tau,
        iteration,
    })
}

/// Whether small or large raw scores should receive rank 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankDirection {
    LowerIsBetter,
    HigherIsBetter,
}

/// Fractional ranks with rank 1 for the best value under `direction`; ties
/// share their average rank.
pub fn rank_with_ties(values: &[f64], direction: RankDirection) -> Vec<f64> {
    match direction {
        RankDirection::LowerIsBetter => average_ranks(values),
        RankDirection::HigherIsBetter => {
            let negated: Vec<f64> = values.iter().map(|v| -v).collect();
            average_ranks(&negated)
        }
    }
}

/// Per-component candidate ranks, one row per scoring component.
#[derive(Debug, Clone, Default)]
pub struct ComponentScoreTable {
    ranks: Vec<Vec<f64>>,
    n_candidates: usize,
}

impl ComponentScoreTable {
    /// An empty table over `n_candidates` candidates.
    pub fn new(n_candidates: usize) -> Result<Self> {
        if n_candidates == 0 {
            return Err(Error::InvalidValue("a score table needs candidates".into()));
        }
        Ok(Self {
            ranks: Vec::new(),
            n_candidates,
        })
    }

    /// Ranks one component's raw candidate scores and appends the row.
    pub fn push_component(&mut self, scores: &[f64], direction: RankDirection) -> Result<()> {
        if scores.len() != self.n_candidates {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: self.n_candidates,
            });
        }
        if scores.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidValue("candidate scores must not be NaN".into()));
        }
        self.ranks.push(rank_with_ties(scores, direction));
        Ok(())
    }

    /// Number of component rows pushed so far.
    pub fn component_count(&self) -> usize {
        self.ranks.len()
    }

    /// The rank row of component `c`.
    pub fn ranks(&self, c: usize) -> Option<&[f64]> {
        self.ranks.get(c).map(Vec::as_slice)
    }
}

/// Influence-weighted average rank per candidate (lower is better).
pub fn combined_ranking(table: &ComponentScoreTable, influence: &[f64]) -> Result<Vec<f64>> {
    if influence.len() != table.component_count() {
        return Err(Error::LengthMismatch {
            left: influence.len(),
            right: table.component_count(),
        });
    }
    if table.component_count() == 0 {
        return Err(Error::InvalidValue("combined ranking needs components".into()));
    }
    let mut combined = vec![0.0; table.n_candidates];
    for (c, weight) in influence.iter().enumerate() {
        for (j, rank) in table.ranks[c].iter().enumerate() {
            combined[j] += weight * rank;
        }
    }
    Ok(combined)
}

/// Index of the lowest combined rank; ties go to the lowest index.
pub fn select_lowest(combined: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, v) in combined.iter().enumerate() {
        match best {
            None => best = Some(j),
            Some(b) if *v < combined[b] => best = Some(j),
            _ => {}
        }
    }
    best
}

/// Generalization abilities of the surrogate and every proxy, surrogate
/// first.
///
/// The surrogate is judged on cross-validated predictions (each observation
/// predicted by a model that never saw it); each proxy on its recorded
/// scores for the evaluated architectures.
pub fn measure_components(
    observations: &ObservationSet,
    space: &SearchSpaceSpec,
    observed_proxy_scores: &[Vec<f64>],
    cv_folds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let ys = observations.ys();
    let preds = cv_predict(observations, space, cv_folds, seed)?;
    let mut g = Vec::with_capacity(1 + observed_proxy_scores.len());
    g.push(generalization_from_scores(&preds, &ys)?);
    for scores in observed_proxy_scores {
        if scores.len() != ys.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: ys.len(),
            });
        }
        g.push(generalization_from_scores(scores, &ys)?);
    }
    Ok(g)
}

/// The per-iteration guidance bookkeeping kept in run traces.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceSnapshot {
    /// Generalization abilities, surrogate first.
    pub g: Vec<f64>,
    /// Influence weights, aligned with `g`.
    pub influence: Vec<f64>,
    /// The softmax temperature used this iteration.
    pub tau: f64,
}

/// Everything the sampling procedure reads at one iteration.
pub struct SampleInputs<'a> {
    pub space: &'a SearchSpaceSpec,
    pub observations: &'a ObservationSet,
    /// Fitted surrogate; required once the cold start is over.
    pub model: Option<&'a ForestModel>,
    pub scorers: &'a [Box<dyn ProxyScorer>],
    /// Per scorer, the recorded scores of each evaluated architecture, in
    /// observation order.
    pub observed_proxy_scores: &'a [Vec<f64>],
    /// Current 1-based iteration.
    pub iteration: usize,
    /// The run's root seed; per-iteration streams derive from it.
    pub run_seed: u64,
}

/// The candidate-generation stream for an iteration. Exposed so tests can
/// reproduce the exact pool a sampling step saw.
pub fn candidate_stream(run_seed: u64, iteration: usize) -> ChaCha8Rng {
    rng::substream(run_seed, TAG_CANDIDATES, iteration as u64)
}

/// Draws the candidate pool: about half uniform over the unevaluated space,
/// half single-edit mutations of the current best observations (cycling
/// through up to `local_parents` incumbents). Candidates never repeat an
/// evaluated architecture but may repeat each other.
pub fn generate_candidates<R: Rng>(
    space: &SearchSpaceSpec,
    observations: &ObservationSet,
    q: usize,
    local_parents: usize,
    evaluated: &HashSet<ArchEncoding>,
    rng: &mut R,
) -> Result<Vec<ArchEncoding>> {
    let mut parents: Vec<&crate::surrogate::Observation> = observations.iter().collect();
    parents.sort_by(|a, b| {
        (a.y, a.iteration)
            .partial_cmp(&(b.y, b.iteration))
            .expect("finite objectives")
    });
    parents.truncate(local_parents);

    let n_uniform = q - q / 2; // ⌈q/2⌉
    let n_local = q / 2;
    let mut pool = Vec::with_capacity(q);
    for _ in 0..n_uniform {
        pool.push(space.sample_unevaluated(evaluated, rng)?);
    }
    if parents.is_empty() {
        for _ in 0..n_local {
            pool.push(space.sample_unevaluated(evaluated, rng)?);
        }
        return Ok(pool);
    }
    for m in 0..n_local {
        let parent = &parents[m % parents.len()].encoding;
        let mut chosen = None;
        for _ in 0..MUTATION_ATTEMPTS {
            let c = parent.mutate_one_edge(space, rng)?;
            if !evaluated.contains(&c) {
                chosen = Some(c);
                break;
            }
        }
        pool.push(match chosen {
            Some(c) => c,
            // The whole neighborhood is evaluated; fall back to exploration.
            None => space.sample_unevaluated(evaluated, rng)?,
        });
    }
    Ok(pool)
}

/// Picks the next architecture to evaluate.
///
/// Below [`COLD_START_MIN`] observations this is a uniform unevaluated draw
/// and the snapshot is `None`. Afterwards the full guided procedure runs:
/// measure abilities, cool the softmax, pool candidates, rank them per
/// component, and return the candidate with the lowest influence-weighted
/// rank along with the iteration's [`GuidanceSnapshot`].
pub fn sample_next(
    inputs: &SampleInputs<'_>,
    config: &GuidanceConfig,
) -> Result<(ArchEncoding, Option<GuidanceSnapshot>)> {
    config.validate()?;
    if inputs.iteration == 0 {
        return Err(Error::InvalidValue("iteration numbering is 1-based".into()));
    }
    if inputs.observed_proxy_scores.len() != inputs.scorers.len() {
        return Err(Error::LengthMismatch {
            left: inputs.observed_proxy_scores.len(),
            right: inputs.scorers.len(),
        });
    }
    let evaluated = inputs.observations.encoding_set();

    if inputs.observations.len() < COLD_START_MIN {
        let mut cold = rng::substream(inputs.run_seed, TAG_COLD, inputs.iteration as u64);
        let x = inputs.space.sample_unevaluated(&evaluated, &mut cold)?;
        return Ok((x, None));
    }

    let model = inputs.model.ok_or_else(|| {
        Error::InvalidValue("guided sampling needs a fitted surrogate model".into())
    })?;

    // 1. How well has each component ordered what we've seen so far?
    let g = measure_components(
        inputs.observations,
        inputs.space,
        inputs.observed_proxy_scores,
        config.cv_folds,
        rng::substream_seed(inputs.run_seed, TAG_CV, inputs.iteration as u64),
    )?;
    let weights = influence(&g, inputs.iteration, config.tau0, config.log_base)?;

    // 2. Pool candidates.
    let mut cand_rng = candidate_stream(inputs.run_seed, inputs.iteration);
    let candidates = generate_candidates(
        inputs.space,
        inputs.observations,
        config.q,
        config.local_parents,
        &evaluated,
        &mut cand_rng,
    )?;

    // 3. Rank per component: surrogate by EI (descending), proxies ascending.
    let y_best = inputs
        .observations
        .best()
        .expect("past the cold start the history is non-empty")
        .y;
    let mut table = ComponentScoreTable::new(candidates.len())?;
    let mut ei = Vec::with_capacity(candidates.len());
    for x in &candidates {
        let (mean, variance) = model.predict(x)?;
        ei.push(expected_improvement(mean, variance, y_best)?);
    }
    table.push_component(&ei, RankDirection::HigherIsBetter)?;
    for scorer in inputs.scorers {
        let scores = candidates
            .iter()
            .map(|x| scorer.score(x))
            .collect::<Result<Vec<f64>>>()?;
        table.push_component(&scores, RankDirection::LowerIsBetter)?;
    }

    // 4. Influence-weighted rank combination.
    let combined = combined_ranking(&table, &weights.influence)?;
    let idx = select_lowest(&combined).expect("candidate pool is non-empty");
    Ok((
        candidates[idx].clone(),
        Some(GuidanceSnapshot {
            g: weights.g,
            influence: weights.influence,
            tau: weights.tau,
        }),
    ))
}
