//! Probabilistic random-forest surrogate over one-hot encodings.
//!
//! The search engine models the objective with a small ensemble of variance-
//! reduction regression trees fit on bootstrap resamples. The spread of the
//! per-tree predictions doubles as a (crude but serviceable) predictive
//! variance, which is what the expected-improvement acquisition consumes.
//! Cross-validated in-sample predictions — each observation predicted by a
//! forest that never saw it — feed the generalization measurement that
//! decides how much the surrogate's opinion is trusted.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::space::{ArchEncoding, SearchSpaceSpec};

/// Lower bound applied to predictive variances.
pub const VARIANCE_FLOOR: f64 = 1e-10;

/// Derivation tags for bootstrap and cross-validation streams.
const TAG_TREE: u64 = 0x74_72_65_65; // "tree"
const TAG_CV_FOLD: u64 = 0x66_6f_6c_64; // "fold"

/// One evaluated architecture: its encoding, objective value, and the
/// 1-based search iteration at which it was evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub encoding: ArchEncoding,
    pub y: f64,
    pub iteration: usize,
}

/// Evaluation history in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ObservationSet {
    obs: Vec<Observation>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an observation.
    ///
    /// The objective must be finite and iterations must be strictly
    /// increasing, so the set always reflects a valid search history.
    pub fn push(&mut self, observation: Observation) -> Result<()> {
        if !observation.y.is_finite() {
            return Err(Error::InvalidValue(format!(
                "objective for {} is not finite",
                observation.encoding
            )));
        }
        if let Some(last) = self.obs.last() {
            if observation.iteration <= last.iteration {
                return Err(Error::InvalidValue(format!(
                    "iteration {} does not follow {}",
                    observation.iteration, last.iteration
                )));
            }
        }
        self.obs.push(observation);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.obs.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Observation> {
        self.obs.get(i)
    }

    /// Objective values in insertion order.
    pub fn ys(&self) -> Vec<f64> {
        self.obs.iter().map(|o| o.y).collect()
    }

    /// The incumbent: lowest objective, earliest iteration on ties.
    pub fn best(&self) -> Option<&Observation> {
        self.obs
            .iter()
            .min_by(|a, b| (a.y, a.iteration).partial_cmp(&(b.y, b.iteration)).expect("finite"))
    }

    /// The evaluated encodings as a lookup set.
    pub fn encoding_set(&self) -> HashSet<ArchEncoding> {
        self.obs.iter().map(|o| o.encoding.clone()).collect()
    }
}

/// One-hot feature vector of an encoding: block `e` has a 1 at the chosen
/// operation index.
pub fn one_hot(x: &ArchEncoding, space: &SearchSpaceSpec) -> Result<Vec<f64>> {
    if !space.contains(x) {
        return Err(Error::EncodingMismatch {
            encoding: x.to_string(),
            space: space.name().to_string(),
        });
    }
    let ops = space.ops_per_edge();
    let mut v = vec![0.0; space.edge_count() * ops];
    for (e, &op) in x.values().iter().enumerate() {
        v[e * ops + op as usize] = 1.0;
    }
    Ok(v)
}

/// Forest shape parameters.
#[derive(Debug, Clone, Copy)]
pub struct ForestConfig {
    /// Number of bootstrap trees.
    pub n_trees: usize,
    /// Minimum observations on each side of a split.
    pub min_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 10,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, features: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if features[*feature] <= *threshold {
                    left.predict(features)
                } else {
                    right.predict(features)
                }
            }
        }
    }
}

/// A fitted probabilistic random forest.
#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<Node>,
    space: SearchSpaceSpec,
    config: ForestConfig,
}

impl ForestModel {
    /// Fits a default-shaped forest. Needs at least two observations.
    pub fn fit(data: &ObservationSet, space: &SearchSpaceSpec, seed: u64) -> Result<Self> {
        Self::fit_with(ForestConfig::default(), data, space, seed)
    }

    /// Fits with an explicit configuration. Needs at least two observations.
    pub fn fit_with(
        config: ForestConfig,
        data: &ObservationSet,
        space: &SearchSpaceSpec,
        seed: u64,
    ) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::ModelUnfit {
                needed: 2,
                got: data.len(),
            });
        }
        Self::fit_unchecked(config, data, space, seed)
    }

    /// Internal fit that tolerates a single observation (used by the
    /// cross-validation folds, whose complements can be that small).
    fn fit_unchecked(
        config: ForestConfig,
        data: &ObservationSet,
        space: &SearchSpaceSpec,
        seed: u64,
    ) -> Result<Self> {
        if config.n_trees == 0 {
            return Err(Error::InvalidValue("forest needs at least one tree".into()));
        }
        if config.min_leaf == 0 {
            return Err(Error::InvalidValue("min_leaf must be at least 1".into()));
        }
        if data.is_empty() {
            return Err(Error::ModelUnfit { needed: 1, got: 0 });
        }
        // Canonicalize the training order so the fitted model depends only on
        // the multiset of observations, not on insertion order.
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| {
            let oa = data.get(a).expect("index in range");
            let ob = data.get(b).expect("index in range");
            (&oa.encoding, oa.y.to_bits())
                .cmp(&(&ob.encoding, ob.y.to_bits()))
        });
        let features: Vec<Vec<f64>> = order
            .iter()
            .map(|&i| one_hot(&data.get(i).expect("index in range").encoding, space))
            .collect::<Result<_>>()?;
        let targets: Vec<f64> = order
            .iter()
            .map(|&i| data.get(i).expect("index in range").y)
            .collect();

        let n = targets.len();
        let trees = (0..config.n_trees)
            .map(|t| {
                let mut stream = rng::substream(seed, TAG_TREE, t as u64);
                let rows: Vec<usize> = (0..n).map(|_| stream.gen_range(0..n)).collect();
                build_tree(&features, &targets, rows, config.min_leaf)
            })
            .collect();
        Ok(Self {
            trees,
            space: space.clone(),
            config,
        })
    }

    /// Predictive mean and (floored) variance for one encoding.
    ///
    /// The mean is the average of the per-tree predictions and the variance
    /// is their population variance, never below [`VARIANCE_FLOOR`].
    pub fn predict(&self, x: &ArchEncoding) -> Result<(f64, f64)> {
        let preds = self.tree_predictions(x)?;
        let n = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / n;
        let var = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
        Ok((mean, var.max(VARIANCE_FLOOR)))
    }

    /// The individual tree predictions behind [`predict`](Self::predict).
    pub fn tree_predictions(&self, x: &ArchEncoding) -> Result<Vec<f64>> {
        let f = one_hot(x, &self.space)?;
        Ok(self.trees.iter().map(|t| t.predict(&f)).collect())
    }

    /// The configuration the forest was fitted with.
    pub fn config(&self) -> ForestConfig {
        self.config
    }
}

fn build_tree(features: &[Vec<f64>], targets: &[f64], rows: Vec<usize>, min_leaf: usize) -> Node {
    debug_assert!(!rows.is_empty());
    let mean = rows.iter().map(|&r| targets[r]).sum::<f64>() / rows.len() as f64;
    if rows.len() < 2 * min_leaf {
        return Node::Leaf(mean);
    }
    if rows.iter().all(|&r| targets[r] == targets[rows[0]]) {
        return Node::Leaf(mean);
    }
    let d = features[0].len();
    let mut best: Option<(f64, usize, f64)> = None; // (sse, feature, threshold)
    let mut scratch: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
    for feature in 0..d {
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (features[r][feature], targets[r])));
        scratch.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        // Prefix sums over the sorted rows let each candidate threshold be
        // scored in O(1): SSE = Σy² − (Σy)²/n on each side.
        let total_sum: f64 = scratch.iter().map(|p| p.1).sum();
        let total_sq: f64 = scratch.iter().map(|p| p.1 * p.1).sum();
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for i in 0..scratch.len() - 1 {
            left_sum += scratch[i].1;
            left_sq += scratch[i].1 * scratch[i].1;
            if scratch[i].0 == scratch[i + 1].0 {
                continue; // not a boundary between distinct values
            }
            let n_left = i + 1;
            let n_right = scratch.len() - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / n_left as f64)
                + (right_sq - right_sum * right_sum / n_right as f64);
            let threshold = 0.5 * (scratch[i].0 + scratch[i + 1].0);
            let better = match best {
                None => true,
                Some((best_sse, _, _)) => sse < best_sse,
            };
            if better {
                best = Some((sse, feature, threshold));
            }
        }
    }
    match best {
        None => Node::Leaf(mean),
        Some((_, feature, threshold)) => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .into_iter()
                .partition(|&r| features[r][feature] <= threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(build_tree(features, targets, left_rows, min_leaf)),
                right: Box::new(build_tree(features, targets, right_rows, min_leaf)),
            }
        }
    }
}

/// Round-robin fold assignment: observation `i` belongs to fold `i % k`.
pub fn fold_assignment(n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|i| i % k).collect()
}

/// For each fold, the indices of the observations *outside* it.
pub fn fold_complement_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    let assignment = fold_assignment(n, k);
    (0..k)
        .map(|fold| {
            (0..n)
                .filter(|&i| assignment[i] != fold)
                .collect::<Vec<usize>>()
        })
        .collect()
}

/// Cross-validated in-sample predictions with a default-shaped forest.
///
/// Observation `i` is predicted by a forest trained on every observation
/// outside fold `i % k`, so no prediction has seen its own target. Requires
/// at least two observations and `k ≥ 2`; when there are fewer than `k`
/// observations the fold count drops to the observation count.
pub fn cv_predict(
    data: &ObservationSet,
    space: &SearchSpaceSpec,
    k: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    cv_predict_with(ForestConfig::default(), data, space, k, seed)
}

/// [`cv_predict`] with an explicit forest configuration.
pub fn cv_predict_with(
    config: ForestConfig,
    data: &ObservationSet,
    space: &SearchSpaceSpec,
    k: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidValue("cross-validation needs k >= 2".into()));
    }
    let n = data.len();
    if n < 2 {
        return Err(Error::ModelUnfit { needed: 2, got: n });
    }
    let k_eff = k.min(n);
    let complements = fold_complement_indices(n, k_eff);
    let mut fold_models = Vec::with_capacity(k_eff);
    for (fold, complement) in complements.iter().enumerate() {
        let mut subset = ObservationSet::new();
        for &i in complement {
            subset
                .push(data.get(i).expect("index in range").clone())
                .expect("ordered subset of a valid set");
        }
        let model = ForestModel::fit_unchecked(
            config,
            &subset,
            space,
            rng::substream_seed(seed, TAG_CV_FOLD, fold as u64),
        )?;
        fold_models.push(model);
    }
    let assignment = fold_assignment(n, k_eff);
    let mut preds = Vec::with_capacity(n);
    for (i, obs) in data.iter().enumerate() {
        let (mean, _) = fold_models[assignment[i]].predict(&obs.encoding)?;
        preds.push(mean);
    }
    Ok(preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn space(edges: usize, ops: usize) -> SearchSpaceSpec {
        SearchSpaceSpec::new("t", edges, ops).unwrap()
    }

    fn obs(space: &SearchSpaceSpec, text: &str, y: f64, iteration: usize) -> Observation {
        Observation {
            encoding: space.parse_encoding(text).unwrap(),
            y,
            iteration,
        }
    }

    /// All 16 encodings of a 4-edge binary space, labelled by ones count.
    fn ones_count_data(space: &SearchSpaceSpec) -> ObservationSet {
        let mut data = ObservationSet::new();
        for (i, x) in space.enumerate().unwrap().enumerate() {
            let y = x.values().iter().filter(|&&v| v == 1).count() as f64;
            data.push(Observation {
                encoding: x,
                y,
                iteration: i + 1,
            })
            .unwrap();
        }
        data
    }

    #[test]
    fn one_hot_layout() {
        let s = space(2, 3);
        let x = s.parse_encoding("2,0").unwrap();
        assert_eq!(one_hot(&x, &s).unwrap(), vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let foreign = ArchEncoding::new(vec![9, 9]);
        assert!(one_hot(&foreign, &s).is_err());
    }

    #[test]
    fn observation_set_validates_history() {
        let s = space(2, 2);
        let mut set = ObservationSet::new();
        set.push(obs(&s, "0,0", 1.0, 1)).unwrap();
        assert!(set.push(obs(&s, "0,1", 2.0, 1)).is_err(), "repeated iteration");
        assert!(set.push(obs(&s, "0,1", f64::NAN, 2)).is_err(), "non-finite y");
        set.push(obs(&s, "0,1", 2.0, 2)).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.best().unwrap().encoding.to_string(), "0,0");
    }

    #[test]
    fn best_breaks_ties_by_earliest_iteration() {
        let s = space(2, 2);
        let mut set = ObservationSet::new();
        set.push(obs(&s, "0,1", 3.0, 1)).unwrap();
        set.push(obs(&s, "1,0", 3.0, 2)).unwrap();
        assert_eq!(set.best().unwrap().iteration, 1);
    }

    #[test]
    fn fit_requires_two_observations() {
        let s = space(2, 2);
        let mut set = ObservationSet::new();
        assert!(matches!(
            ForestModel::fit(&set, &s, 0),
            Err(Error::ModelUnfit { needed: 2, got: 0 })
        ));
        set.push(obs(&s, "0,0", 1.0, 1)).unwrap();
        assert!(matches!(
            ForestModel::fit(&set, &s, 0),
            Err(Error::ModelUnfit { needed: 2, got: 1 })
        ));
        set.push(obs(&s, "1,1", 2.0, 2)).unwrap();
        assert!(ForestModel::fit(&set, &s, 0).is_ok());
    }

    #[test]
    fn forest_learns_a_simple_additive_signal() {
        let s = space(4, 2);
        let data = ones_count_data(&s);
        let model = ForestModel::fit(&data, &s, 7).unwrap();
        // In-sample error should be far below the target variance (~1.25).
        let mse: f64 = data
            .iter()
            .map(|o| {
                let (m, _) = model.predict(&o.encoding).unwrap();
                (m - o.y) * (m - o.y)
            })
            .sum::<f64>()
            / data.len() as f64;
        assert!(mse < 0.5, "in-sample mse {mse}");
    }

    #[test]
    fn predictions_are_seed_deterministic_and_order_invariant() {
        let s = space(4, 2);
        let data = ones_count_data(&s);

        // Same seed, same predictions.
        let m1 = ForestModel::fit(&data, &s, 3).unwrap();
        let m2 = ForestModel::fit(&data, &s, 3).unwrap();
        // Different seed, different bootstrap.
        let m3 = ForestModel::fit(&data, &s, 4).unwrap();

        // Reversed insertion order must not change the fitted model.
        let mut reversed = ObservationSet::new();
        let all: Vec<Observation> = data.iter().cloned().collect();
        for (j, mut o) in all.into_iter().rev().enumerate() {
            o.iteration = j + 1;
            reversed.push(o).unwrap();
        }
        let m4 = ForestModel::fit(&reversed, &s, 3).unwrap();

        let mut saw_seed_difference = false;
        for x in s.enumerate().unwrap() {
            let p1 = m1.predict(&x).unwrap();
            assert_eq!(p1, m2.predict(&x).unwrap(), "same seed must agree");
            assert_eq!(p1, m4.predict(&x).unwrap(), "insertion order must not matter");
            if p1 != m3.predict(&x).unwrap() {
                saw_seed_difference = true;
            }
        }
        assert!(saw_seed_difference, "different seeds should differ somewhere");
    }

    #[test]
    fn predict_is_mean_and_floored_population_variance_of_trees() {
        let s = space(4, 2);
        let data = ones_count_data(&s);
        let model = ForestModel::fit(&data, &s, 11).unwrap();
        for x in s.enumerate().unwrap() {
            let preds = model.tree_predictions(&x).unwrap();
            assert_eq!(preds.len(), 10);
            let mean = preds.iter().sum::<f64>() / preds.len() as f64;
            let var = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>()
                / preds.len() as f64;
            let (m, v) = model.predict(&x).unwrap();
            assert!((m - mean).abs() < 1e-15);
            assert!((v - var.max(VARIANCE_FLOOR)).abs() < 1e-15);
            assert!(v >= VARIANCE_FLOOR);
        }
    }

    #[test]
    fn constant_targets_hit_the_variance_floor() {
        let s = space(3, 2);
        let mut data = ObservationSet::new();
        for (i, x) in s.enumerate().unwrap().enumerate() {
            data.push(Observation {
                encoding: x,
                y: 4.25,
                iteration: i + 1,
            })
            .unwrap();
        }
        let model = ForestModel::fit(&data, &s, 0).unwrap();
        let (m, v) = model.predict(&s.parse_encoding("1,0,1").unwrap()).unwrap();
        assert_eq!(m, 4.25);
        assert_eq!(v, VARIANCE_FLOOR);
    }

    #[test]
    fn fold_bookkeeping_is_round_robin() {
        assert_eq!(fold_assignment(5, 5), vec![0, 1, 2, 3, 4]);
        assert_eq!(fold_assignment(7, 5), vec![0, 1, 2, 3, 4, 0, 1]);
        let complements = fold_complement_indices(7, 5);
        assert_eq!(complements.len(), 5);
        assert_eq!(complements[0], vec![1, 2, 3, 4, 6]);
        assert_eq!(complements[2], vec![0, 1, 3, 4, 5, 6]);
        // No fold's complement contains its own members.
        for (fold, complement) in complements.iter().enumerate() {
            for &i in complement {
                assert_ne!(i % 5, fold);
            }
        }
    }

    #[test]
    fn cv_predictions_never_see_their_own_target() {
        // A memorizing model gives away leakage: with distinct targets, the
        // in-sample forest fits far better than the held-out predictions.
        let s = space(4, 2);
        let mut data = ObservationSet::new();
        let mut r = rng::stream(5, 0);
        for (i, x) in s.enumerate().unwrap().enumerate() {
            data.push(Observation {
                encoding: x,
                y: rng::standard_normal(&mut r),
                iteration: i + 1,
            })
            .unwrap();
        }
        let ys = data.ys();
        let model = ForestModel::fit(&data, &s, 9).unwrap();
        let in_sample_mse: f64 = data
            .iter()
            .zip(&ys)
            .map(|(o, y)| {
                let (m, _) = model.predict(&o.encoding).unwrap();
                (m - y) * (m - y)
            })
            .sum::<f64>()
            / ys.len() as f64;
        let cv = cv_predict(&data, &s, 5, 9).unwrap();
        assert_eq!(cv.len(), ys.len());
        let cv_mse: f64 = cv
            .iter()
            .zip(&ys)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>()
            / ys.len() as f64;
        assert!(
            cv_mse > in_sample_mse,
            "held-out error ({cv_mse}) should exceed in-sample error ({in_sample_mse}) on noise"
        );
    }

    #[test]
    fn cv_predict_is_deterministic_and_validates_inputs() {
        let s = space(3, 3);
        let mut data = ObservationSet::new();
        let mut r = rng::stream(8, 0);
        for i in 1..=9 {
            let x = s.sample_uniform(&mut r);
            data.push(Observation {
                encoding: x,
                y: i as f64 * 0.1,
                iteration: i,
            })
            .unwrap();
        }
        let a = cv_predict(&data, &s, 5, 2).unwrap();
        let b = cv_predict(&data, &s, 5, 2).unwrap();
        assert_eq!(a, b);
        assert!(cv_predict(&data, &s, 1, 2).is_err(), "k must be >= 2");

        let mut tiny = ObservationSet::new();
        tiny.push(obs(&s, "0,0,0", 1.0, 1)).unwrap();
        assert!(matches!(
            cv_predict(&tiny, &s, 5, 2),
            Err(Error::ModelUnfit { .. })
        ));
    }

    #[test]
    fn cv_handles_fewer_observations_than_folds() {
        let s = space(2, 2);
        let mut data = ObservationSet::new();
        data.push(obs(&s, "0,0", 0.0, 1)).unwrap();
        data.push(obs(&s, "0,1", 1.0, 2)).unwrap();
        data.push(obs(&s, "1,0", 2.0, 3)).unwrap();
        // k collapses to 3; every fold complement has two observations.
        let preds = cv_predict(&data, &s, 5, 1).unwrap();
        assert_eq!(preds.len(), 3);
        assert!(preds.iter().all(|p| p.is_finite()));
    }
}
