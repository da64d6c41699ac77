//! Rank statistics and search-curve accounting.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Ascending fractional ranks, 1-based, with ties sharing their average rank.
///
/// `[10, 5, 5, 7]` ranks as `[4, 1.5, 1.5, 3]`.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("comparable values"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share ranks i+1..=j+1.
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation between two paired samples.
///
/// Ties receive average ranks; an input that is entirely constant has no
/// defined ranking and is rejected.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InvalidValue(
            "rank correlation needs at least two pairs".into(),
        ));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidValue(
            "rank correlation inputs must not contain NaN".into(),
        ));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    pearson(&ra, &rb)
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

/// Spearman correlation restricted to the best (lowest-objective) fraction.
///
/// `keep` in `(0, 1]` selects `⌈keep · n⌉` pairs with the lowest `objective`
/// (ties broken by index), then correlates `scores` with `objective` on that
/// subset. Proxies often look good globally yet scramble the top of the
/// table, which is the region a search actually exploits.
pub fn spearman_top_fraction(scores: &[f64], objective: &[f64], keep: f64) -> Result<f64> {
    if scores.len() != objective.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: objective.len(),
        });
    }
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(Error::InvalidValue(format!(
            "keep fraction must lie in (0, 1], got {keep}"
        )));
    }
    let n = scores.len();
    let n_keep = ((keep * n as f64).ceil() as usize).max(1);
    if n_keep < 2 {
        return Err(Error::InvalidValue(format!(
            "top fraction keeps only {n_keep} pair(s); need at least 2"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        objective[i]
            .partial_cmp(&objective[j])
            .expect("comparable objective")
            .then(i.cmp(&j))
    });
    let kept = &order[..n_keep];
    let sub_scores: Vec<f64> = kept.iter().map(|&i| scores[i]).collect();
    let sub_obj: Vec<f64> = kept.iter().map(|&i| objective[i]).collect();
    spearman(&sub_scores, &sub_obj)
}

/// Pointwise mean of best-so-far curves, truncated to the shortest curve and
/// to `budget` entries.
pub fn mean_best_curve(curves: &[Vec<f64>], budget: usize) -> Result<Vec<f64>> {
    if curves.is_empty() {
        return Err(Error::InvalidValue("no curves to average".into()));
    }
    let len = curves
        .iter()
        .map(Vec::len)
        .min()
        .expect("nonempty")
        .min(budget);
    if len == 0 {
        return Err(Error::InvalidValue("curves are empty".into()));
    }
    let mut mean = Vec::with_capacity(len);
    for i in 0..len {
        mean.push(curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64);
    }
    Ok(mean)
}

/// First evaluation count (1-based) at which `curve` reaches `target` or
/// better (lower), if it ever does.
pub fn evaluations_to_reach(curve: &[f64], target: f64) -> Option<usize> {
    curve.iter().position(|&v| v <= target).map(|i| i + 1)
}

/// One row of a speedup comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupEntry {
    pub strategy: String,
    /// Evaluations needed to match the reference's final mean value, if reached.
    pub evaluations: Option<usize>,
    /// `reference_budget / evaluations`, when reached.
    pub speedup: Option<f64>,
}

/// Evaluations-to-match table against a reference strategy.
///
/// The reference's mean best-so-far curve at `budget` evaluations sets the
/// bar; each strategy is charged the first evaluation count at which its own
/// mean curve does at least as well.
pub fn speedup_table(
    curves_by_strategy: &BTreeMap<String, Vec<Vec<f64>>>,
    reference: &str,
    budget: usize,
) -> Result<Vec<SpeedupEntry>> {
    let ref_curves = curves_by_strategy.get(reference).ok_or_else(|| {
        Error::InvalidValue(format!("reference strategy `{reference}` has no runs"))
    })?;
    let ref_mean = mean_best_curve(ref_curves, budget)?;
    let bar = *ref_mean.last().expect("nonempty mean curve");
    let ref_budget = ref_mean.len();
    let mut out = Vec::with_capacity(curves_by_strategy.len());
    for (strategy, curves) in curves_by_strategy {
        let mean = mean_best_curve(curves, budget)?;
        let evaluations = evaluations_to_reach(&mean, bar);
        out.push(SpeedupEntry {
            strategy: strategy.clone(),
            evaluations,
            speedup: evaluations.map(|e| ref_budget as f64 / e as f64),
        });
    }
    Ok(out)
}
