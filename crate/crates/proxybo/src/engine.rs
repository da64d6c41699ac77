//! Search strategies and the run loop that drives them.
//!
//! Four strategies share one trace format:
//!
//! * `proxybo` — the guided loop: cold-start random draws, then a random
//!   forest surrogate plus proxy scorers combined by influence-weighted
//!   ranks ([`crate::guidance`]).
//! * `bo` — the same loop with no proxies: pure surrogate + expected
//!   improvement.
//! * `random` — uniform sampling without replacement.
//! * `rea` — regularized evolution: tournament selection over a sliding
//!   population with aging-based eviction.
//!
//! Every run is a pure function of its configuration: all randomness comes
//! from per-purpose substreams of the run seed, so reruns reproduce traces
//! bit for bit, and a longer budget extends a shorter one without altering
//! its prefix.

use std::collections::{HashSet, VecDeque};
use std::str::FromStr;

use crate::bench::BenchmarkTable;
use crate::error::{Error, Result};
use crate::guidance::{
    sample_next, GuidanceConfig, GuidanceSnapshot, SampleInputs, COLD_START_MIN,
};
use crate::proxies::{build_scorers, ProxySelect};
use crate::rng;
use crate::space::ArchEncoding;
use crate::surrogate::{ForestModel, Observation, ObservationSet};

const TAG_FOREST: u64 = 0x66_6f_72_65; // "fore"
const TAG_RANDOM: u64 = 0x72_61_6e_64; // "rand"
const TAG_REA: u64 = 0x72_65_61; // "rea"

/// Regularized-evolution population size.
pub const REA_POPULATION: usize = 20;
/// Fraction of the population sampled into each tournament (at least two).
pub const REA_TOURNAMENT_FRACTION: f64 = 0.10;
/// Attempts at mutating an unevaluated child before falling back to a
/// uniform unevaluated draw.
const REA_MUTATION_ATTEMPTS: usize = 256;

/// A search strategy name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Guided search: surrogate + proxies under influence weighting.
    ProxyBo,
    /// Surrogate-only guided search.
    Bo,
    /// Uniform sampling without replacement.
    Random,
    /// Regularized evolution.
    Rea,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Strategy::ProxyBo => "proxybo",
            Strategy::Bo => "bo",
            Strategy::Random => "random",
            Strategy::Rea => "rea",
        };
        f.write_str(s)
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "proxybo" => Ok(Strategy::ProxyBo),
            "bo" => Ok(Strategy::Bo),
            "random" => Ok(Strategy::Random),
            "rea" => Ok(Strategy::Rea),
            other => Err(Error::InvalidValue(format!(
                "unknown strategy `{other}` (expected proxybo, bo, random, or rea)"
            ))),
        }
    }
}

/// Full specification of one search run.
#[derive(Debug, Clone)]
pub struct SearchRunConfig {
    pub strategy: Strategy,
    /// Number of architecture evaluations allowed.
    pub budget: usize,
    /// Root seed of the run; all of the run's randomness derives from it.
    pub seed: u64,
    /// Seed of the gradient-based proxy scorers. Kept separate from the run
    /// seed so every repetition of an experiment scores architectures
    /// identically.
    pub proxy_seed: u64,
    /// Proxy selections; only consulted by the `proxybo` strategy.
    pub proxies: Vec<ProxySelect>,
    pub guidance: GuidanceConfig,
}

impl SearchRunConfig {
    /// A configuration with default guidance settings and no proxies.
    pub fn new(strategy: Strategy, budget: usize, seed: u64) -> Self {
        Self {
            strategy,
            budget,
            seed,
            proxy_seed: 0,
            proxies: Vec::new(),
            guidance: GuidanceConfig::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidValue("budget must be at least 1".into()));
        }
        self.guidance.validate()
    }
}

/// One evaluated architecture in a run trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 1-based evaluation index.
    pub iteration: usize,
    pub encoding: ArchEncoding,
    /// Validation objective (oriented so lower is better).
    pub val: f64,
    /// Test objective (oriented so lower is better).
    pub test: f64,
    /// Best validation objective seen up to and including this iteration.
    pub best_val: f64,
    /// Test objective of the best-validation architecture so far.
    pub best_test: f64,
    /// Evaluation cost charged by the benchmark.
    pub cost: f64,
    /// Guidance bookkeeping; `None` during cold start and for unguided
    /// strategies.
    pub guidance: Option<GuidanceSnapshot>,
}

/// The best architecture a run found, by validation objective.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResult {
    pub encoding: ArchEncoding,
    pub val: f64,
    pub test: f64,
    /// Iteration at which the best architecture was evaluated.
    pub iteration: usize,
}

/// The complete record of one search run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub strategy: Strategy,
    pub seed: u64,
    /// Names of the guidance components ("M" for the surrogate, then proxy
    /// names); empty for unguided strategies.
    pub component_names: Vec<String>,
    pub records: Vec<TraceRecord>,
    pub best: BestResult,
    /// Sum of evaluation costs over the run.
    pub total_cost: f64,
}

impl RunTrace {
    /// The best-validation-objective curve, one entry per evaluation.
    pub fn best_val_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_val).collect()
    }

    /// The test objective of the incumbent, one entry per evaluation.
    pub fn best_test_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best_test).collect()
    }
}

/// Runs one search against a benchmark table and returns its trace.
pub fn run_search(config: &SearchRunConfig, table: &BenchmarkTable) -> Result<RunTrace> {
    config.validate()?;
    match config.strategy {
        Strategy::ProxyBo => run_guided(config, table, &config.proxies),
        Strategy::Bo => {
            if !config.proxies.is_empty() {
                log::debug!("strategy `bo` ignores the configured proxies");
            }
            run_guided(config, table, &[])
        }
        Strategy::Random => run_random(config, table),
        Strategy::Rea => run_rea(config, table),
    }
}

/// Shared bookkeeping: evaluates `x`, appends the trace record, and updates
/// the incumbent.
struct Ledger {
    records: Vec<TraceRecord>,
    evaluated: HashSet<ArchEncoding>,
    best_val: f64,
    best_test: f64,
    best: Option<BestResult>,
    total_cost: f64,
}

impl Ledger {
    fn new() -> Self {
        Self {
            records: Vec::new(),
            evaluated: HashSet::new(),
            best_val: f64::INFINITY,
            best_test: f64::INFINITY,
            best: None,
            total_cost: 0.0,
        }
    }

    fn evaluate(
        &mut self,
        table: &BenchmarkTable,
        x: ArchEncoding,
        iteration: usize,
        guidance: Option<GuidanceSnapshot>,
    ) -> Result<(f64, f64)> {
        let val = table.objective(&x)?;
        let test = table.test_objective(&x)?;
        let cost = table.cost(&x)?;
        if val < self.best_val {
            self.best_val = val;
            self.best_test = test;
            self.best = Some(BestResult {
                encoding: x.clone(),
                val,
                test,
                iteration,
            });
        }
        self.total_cost += cost;
        self.evaluated.insert(x.clone());
        self.records.push(TraceRecord {
            iteration,
            encoding: x,
            val,
            test,
            best_val: self.best_val,
            best_test: self.best_test,
            cost,
            guidance,
        });
        Ok((val, test))
    }

    fn exhausted(&self, table: &BenchmarkTable) -> bool {
        self.evaluated.len() as u128 >= table.space().size()
    }

    fn into_trace(
        self,
        strategy: Strategy,
        seed: u64,
        component_names: Vec<String>,
    ) -> Result<RunTrace> {
        let best = self
            .best
            .ok_or_else(|| Error::InvalidValue("a run must evaluate at least once".into()))?;
        Ok(RunTrace {
            strategy,
            seed,
            component_names,
            records: self.records,
            best,
            total_cost: self.total_cost,
        })
    }
}

fn run_guided(
    config: &SearchRunConfig,
    table: &BenchmarkTable,
    proxies: &[ProxySelect],
) -> Result<RunTrace> {
    let space = table.space();
    let scorers = build_scorers(proxies, space, config.proxy_seed, Some(table))?;
    let component_names: Vec<String> = std::iter::once("M".to_string())
        .chain(scorers.iter().map(|s| s.name().to_string()))
        .collect();

    let mut observations = ObservationSet::new();
    let mut observed_scores: Vec<Vec<f64>> = vec![Vec::new(); scorers.len()];
    let mut ledger = Ledger::new();

    for t in 1..=config.budget {
        if ledger.exhausted(table) {
            log::info!("space exhausted after {} evaluations", t - 1);
            break;
        }
        // The surrogate refits on the full history once the cold start ends.
        let model = if observations.len() >= COLD_START_MIN {
            Some(ForestModel::fit(
                &observations,
                space,
                rng::substream_seed(config.seed, TAG_FOREST, t as u64),
            )?)
        } else {
            None
        };
        let inputs = SampleInputs {
            space,
            observations: &observations,
            model: model.as_ref(),
            scorers: &scorers,
            observed_proxy_scores: &observed_scores,
            iteration: t,
            run_seed: config.seed,
        };
        let (x, snapshot) = sample_next(&inputs, &config.guidance)?;

        let (val, _) = ledger.evaluate(table, x.clone(), t, snapshot)?;
        // Record each proxy's opinion of the new architecture so future
        // iterations can judge the proxy against ground truth.
        for (k, scorer) in scorers.iter().enumerate() {
            observed_scores[k].push(scorer.score(&x)?);
        }
        observations.push(Observation {
            encoding: x,
            y: val,
            iteration: t,
        })?;
    }

    ledger.into_trace(config.strategy, config.seed, component_names)
}

fn run_random(config: &SearchRunConfig, table: &BenchmarkTable) -> Result<RunTrace> {
    let space = table.space();
    let mut ledger = Ledger::new();
    for t in 1..=config.budget {
        if ledger.exhausted(table) {
            break;
        }
        let mut r = rng::substream(config.seed, TAG_RANDOM, t as u64);
        let x = space.sample_unevaluated(&ledger.evaluated, &mut r)?;
        ledger.evaluate(table, x, t, None)?;
    }
    ledger.into_trace(config.strategy, config.seed, Vec::new())
}

fn run_rea(config: &SearchRunConfig, table: &BenchmarkTable) -> Result<RunTrace> {
    let space = table.space();
    let mut ledger = Ledger::new();
    // Population entries age left to right; evictions remove the oldest.
    let mut population: VecDeque<(ArchEncoding, f64)> = VecDeque::new();

    for t in 1..=config.budget {
        if ledger.exhausted(table) {
            break;
        }
        let mut r = rng::substream(config.seed, TAG_REA, t as u64);
        let x = if population.len() < REA_POPULATION {
            space.sample_unevaluated(&ledger.evaluated, &mut r)?
        } else {
            let k = ((REA_TOURNAMENT_FRACTION * population.len() as f64).ceil() as usize).max(2);
            let entrants = rand::seq::index::sample(&mut r, population.len(), k);
            let mut winner = None::<usize>;
            for i in entrants {
                winner = match winner {
                    None => Some(i),
                    Some(w) if population[i].1 < population[w].1 => Some(i),
                    Some(w) => Some(w),
                };
            }
            let parent = population[winner.expect("tournament is non-empty")].0.clone();
            let mut child = None;
            for _ in 0..REA_MUTATION_ATTEMPTS {
                let c = parent.mutate_one_edge(space, &mut r)?;
                if !ledger.evaluated.contains(&c) {
                    child = Some(c);
                    break;
                }
            }
            match child {
                Some(c) => c,
                // Every neighbor of the winner is already evaluated; keep
                // the budget useful with a fresh unevaluated draw.
                None => space.sample_unevaluated(&ledger.evaluated, &mut r)?,
            }
        };
        let (val, _) = ledger.evaluate(table, x.clone(), t, None)?;
        population.push_back((x, val));
        if population.len() > REA_POPULATION {
            population.pop_front();
        }
    }

    ledger.into_trace(config.strategy, config.seed, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{generate, SyntheticSpec};
    use crate::bench::{BenchmarkMeta, BenchmarkRecord};
    use crate::space::SearchSpaceSpec;
    use std::collections::BTreeMap;

    fn tiny_table(edges: usize, ops: usize, seed: u64) -> BenchmarkTable {
        generate(&SyntheticSpec::new("tiny", edges, ops), seed).unwrap()
    }

    fn proxied_table(seed: u64) -> BenchmarkTable {
        let spec = SyntheticSpec::new("proxied", 4, 4).with_proxy("good", 0.7);
        generate(&spec, seed).unwrap()
    }

    fn records_equal(a: &RunTrace, b: &RunTrace) -> bool {
        a.records.len() == b.records.len()
            && a.records.iter().zip(&b.records).all(|(x, y)| x == y)
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [Strategy::ProxyBo, Strategy::Bo, Strategy::Random, Strategy::Rea] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("annealing".parse::<Strategy>().is_err());
    }

    #[test]
    fn cold_start_covers_the_first_five_evaluations() {
        let table = tiny_table(4, 4, 1);
        let mut config = SearchRunConfig::new(Strategy::ProxyBo, 5, 42);
        config.guidance.q = 50;
        let trace = run_search(&config, &table).unwrap();
        assert_eq!(trace.records.len(), 5);
        assert!(trace.records.iter().all(|r| r.guidance.is_none()));
    }

    #[test]
    fn guidance_kicks_in_at_the_sixth_evaluation() {
        let table = tiny_table(4, 4, 1);
        let mut config = SearchRunConfig::new(Strategy::ProxyBo, 7, 42);
        config.guidance.q = 50;
        let trace = run_search(&config, &table).unwrap();
        assert_eq!(trace.records.len(), 7);
        assert!(trace.records[4].guidance.is_none());
        let snap = trace.records[5].guidance.as_ref().expect("guided by now");
        assert_eq!(snap.g.len(), 1, "surrogate only");
        let sum: f64 = snap.influence.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(trace.component_names, vec!["M".to_string()]);
    }

    #[test]
    fn proxied_runs_track_proxy_components() {
        let table = proxied_table(3);
        let mut config = SearchRunConfig::new(Strategy::ProxyBo, 8, 7);
        config.proxies = vec![ProxySelect::Tabular("good".into())];
        config.guidance.q = 50;
        let trace = run_search(&config, &table).unwrap();
        assert_eq!(
            trace.component_names,
            vec!["M".to_string(), "good".to_string()]
        );
        let snap = trace.records[7].guidance.as_ref().unwrap();
        assert_eq!(snap.g.len(), 2);
        assert_eq!(snap.influence.len(), 2);
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let table = proxied_table(5);
        for strategy in [Strategy::ProxyBo, Strategy::Bo, Strategy::Random, Strategy::Rea] {
            let mut config = SearchRunConfig::new(strategy, 30, 99);
            config.guidance.q = 40;
            if strategy == Strategy::ProxyBo {
                config.proxies = vec![ProxySelect::Tabular("good".into())];
            }
            let a = run_search(&config, &table).unwrap();
            let b = run_search(&config, &table).unwrap();
            assert!(records_equal(&a, &b), "{strategy} diverged between reruns");
        }
    }

    #[test]
    fn longer_budgets_extend_shorter_ones() {
        let table = proxied_table(11);
        for strategy in [Strategy::ProxyBo, Strategy::Random, Strategy::Rea] {
            let mut short = SearchRunConfig::new(strategy, 10, 5);
            short.guidance.q = 40;
            if strategy == Strategy::ProxyBo {
                short.proxies = vec![ProxySelect::Tabular("good".into())];
            }
            let mut long = short.clone();
            long.budget = 25;
            let a = run_search(&short, &table).unwrap();
            let b = run_search(&long, &table).unwrap();
            assert_eq!(a.records.len(), 10);
            assert_eq!(b.records.len(), 25);
            for (x, y) in a.records.iter().zip(&b.records) {
                assert_eq!(x, y, "{strategy} prefix diverged");
            }
        }
    }

    #[test]
    fn plain_bo_equals_proxybo_with_no_proxies() {
        let table = tiny_table(4, 4, 13);
        let mut bo = SearchRunConfig::new(Strategy::Bo, 25, 21);
        bo.guidance.q = 40;
        let mut zero_proxy = SearchRunConfig::new(Strategy::ProxyBo, 25, 21);
        zero_proxy.guidance.q = 40;
        let a = run_search(&bo, &table).unwrap();
        let b = run_search(&zero_proxy, &table).unwrap();
        assert!(records_equal(&a, &b));
    }

    #[test]
    fn random_never_repeats_and_exhausts_small_spaces() {
        let table = tiny_table(3, 3, 17);
        let config = SearchRunConfig::new(Strategy::Random, 100, 3);
        let trace = run_search(&config, &table).unwrap();
        // Budget exceeds the 27-architecture space: the run stops early.
        assert_eq!(trace.records.len(), 27);
        let distinct: HashSet<_> = trace.records.iter().map(|r| r.encoding.clone()).collect();
        assert_eq!(distinct.len(), 27);
    }

    #[test]
    fn rea_explores_without_repeats() {
        let table = tiny_table(3, 3, 19);
        let config = SearchRunConfig::new(Strategy::Rea, 27, 7);
        let trace = run_search(&config, &table).unwrap();
        assert_eq!(trace.records.len(), 27);
        let distinct: HashSet<_> = trace.records.iter().map(|r| r.encoding.clone()).collect();
        assert_eq!(distinct.len(), 27, "child dedup must prevent re-evaluations");
    }

    #[test]
    fn incumbent_curves_never_worsen() {
        let table = proxied_table(23);
        for strategy in [Strategy::ProxyBo, Strategy::Bo, Strategy::Random, Strategy::Rea] {
            let mut config = SearchRunConfig::new(strategy, 40, 31);
            config.guidance.q = 40;
            let trace = run_search(&config, &table).unwrap();
            let curve = trace.best_val_curve();
            for w in curve.windows(2) {
                assert!(w[1] <= w[0], "{strategy} incumbent worsened");
            }
            // The reported best matches the curve's end.
            assert_eq!(trace.best.val, *curve.last().unwrap());
            // best_test tracks the incumbent, not the per-iteration test.
            let last = trace.records.last().unwrap();
            assert_eq!(last.best_test, trace.best.test);
        }
    }

    #[test]
    fn rejects_degenerate_configurations() {
        let table = tiny_table(3, 3, 1);
        let mut config = SearchRunConfig::new(Strategy::Random, 0, 1);
        assert!(run_search(&config, &table).is_err());
        config.budget = 5;
        config.guidance.q = 0;
        assert!(run_search(&config, &table).is_err());
    }

    #[test]
    fn missing_table_rows_abort_the_run() {
        // A one-edge, two-op space whose table only knows one of the two
        // architectures: any strategy must hit the hole and error out.
        let space = SearchSpaceSpec::new("holey", 1, 2).unwrap();
        let meta = BenchmarkMeta {
            name: "holey".into(),
            minimize: true,
            optimum_test: None,
        };
        let mut table = BenchmarkTable::new(space, meta).unwrap();
        let known = table.space().parse_encoding("0").unwrap();
        table
            .insert(
                known,
                BenchmarkRecord {
                    val: 0.5,
                    test: 0.5,
                    cost: 1.0,
                    proxies: BTreeMap::new(),
                },
            )
            .unwrap();
        let config = SearchRunConfig::new(Strategy::Random, 2, 1);
        assert!(matches!(
            run_search(&config, &table),
            Err(Error::MissingEntry(_))
        ));
    }
}
