//! Discrete architecture search spaces and their encodings.
//!
//! A space is a fixed number of decision slots ("edges"), each holding one of
//! a fixed number of operation choices. An architecture is therefore a vector
//! of operation indices, written in text form as comma-separated integers,
//! e.g. `3,0,4,1,1,2`. This shape covers cell-style tabular benchmarks, where
//! the full cartesian product has been (or can be) evaluated ahead of time.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Default ceiling for exhaustive enumeration (one million encodings).
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// A cell-style search space: `edge_count` slots with `ops_per_edge` choices each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpaceSpec {
    name: String,
    edge_count: usize,
    ops_per_edge: usize,
}

impl SearchSpaceSpec {
    /// Builds a space description.
    ///
    /// Requires at least one edge and at least two operations per edge; a
    /// single-operation space would contain exactly one architecture and
    /// admit no mutation.
    pub fn new(name: impl Into<String>, edge_count: usize, ops_per_edge: usize) -> Result<Self> {
        let name = name.into();
        if edge_count == 0 {
            return Err(Error::InvalidSpace("edge_count must be at least 1".into()));
        }
        if ops_per_edge < 2 {
            return Err(Error::InvalidSpace(
                "ops_per_edge must be at least 2".into(),
            ));
        }
        if ops_per_edge > u16::MAX as usize + 1 {
            return Err(Error::InvalidSpace(format!(
                "ops_per_edge {ops_per_edge} exceeds the supported maximum of {}",
                u16::MAX as usize + 1
            )));
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidSpace(
                "name must be non-empty and contain no whitespace".into(),
            ));
        }
        Ok(Self {
            name,
            edge_count,
            ops_per_edge,
        })
    }

    /// The space's display name.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of decision slots per architecture.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Number of operation choices per slot.
    pub fn ops_per_edge(&self) -> usize {
        self.ops_per_edge
    }

    /// Total number of encodings, saturating at `u128::MAX` for absurd sizes.
    pub fn size(&self) -> u128 {
        let mut total: u128 = 1;
        for _ in 0..self.edge_count {
            total = match total.checked_mul(self.ops_per_edge as u128) {
                Some(t) => t,
                None => return u128::MAX,
            };
        }
        total
    }

    /// Whether `x` is a member of this space.
    pub fn contains(&self, x: &ArchEncoding) -> bool {
        x.values.len() == self.edge_count
            && x.values.iter().all(|&v| (v as usize) < self.ops_per_edge)
    }

    /// Parses the canonical text form and validates membership.
    pub fn parse_encoding(&self, s: &str) -> Result<ArchEncoding> {
        let x: ArchEncoding = s.parse()?;
        self.check_member(&x)?;
        Ok(x)
    }

    /// One architecture drawn uniformly from the full space.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> ArchEncoding {
        let values = (0..self.edge_count)
            .map(|_| rng.gen_range(0..self.ops_per_edge) as u16)
            .collect();
        ArchEncoding { values }
    }

    /// Iterates every encoding in lexicographic order.
    ///
    /// Fails with [`Error::SpaceTooLarge`] if the space holds more than
    /// [`DEFAULT_ENUMERATION_CAP`] encodings.
    pub fn enumerate(&self) -> Result<Enumerate> {
        self.enumerate_capped(DEFAULT_ENUMERATION_CAP)
    }

    /// Like [`enumerate`](Self::enumerate) with a caller-chosen cap.
    pub fn enumerate_capped(&self, cap: u128) -> Result<Enumerate> {
        let size = self.size();
        if size > cap {
            return Err(Error::SpaceTooLarge { size, cap });
        }
        Ok(Enumerate {
            spec: self.clone(),
            next: Some(vec![0; self.edge_count]),
        })
    }

    /// Uniform draw restricted to encodings outside `evaluated`.
    ///
    /// Resamples rejected draws; once the space is small enough to list, it
    /// falls back to enumerating the complement so near-exhausted spaces stay
    /// exact. Fails with [`Error::SearchComplete`] when nothing is left.
    pub fn sample_unevaluated<R: Rng + ?Sized>(
        &self,
        evaluated: &HashSet<ArchEncoding>,
        rng: &mut R,
    ) -> Result<ArchEncoding> {
        let size = self.size();
        if evaluated.len() as u128 >= size {
            return Err(Error::SearchComplete);
        }
        const ATTEMPTS: usize = 256;
        for _ in 0..ATTEMPTS {
            let x = self.sample_uniform(rng);
            if !evaluated.contains(&x) {
                return Ok(x);
            }
        }
        // Rejection sampling is struggling, so the evaluated set must cover
        // most of the space; list what is left and pick uniformly.
        if size <= DEFAULT_ENUMERATION_CAP {
            let remaining: Vec<ArchEncoding> = self
                .enumerate()?
                .filter(|x| !evaluated.contains(x))
                .collect();
            if remaining.is_empty() {
                return Err(Error::SearchComplete);
            }
            let idx = rng.gen_range(0..remaining.len());
            return Ok(remaining[idx].clone());
        }
        Err(Error::InvalidValue(
            "could not draw an unevaluated encoding from a space too large to enumerate".into(),
        ))
    }

    fn check_member(&self, x: &ArchEncoding) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::EncodingMismatch {
                encoding: x.to_string(),
                space: self.name.clone(),
            })
        }
    }
}

/// One architecture: an operation index per edge.
///
/// Ordering and equality are lexicographic on the index vector, which gives
/// every collection of encodings a canonical order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArchEncoding {
    values: Vec<u16>,
}

impl ArchEncoding {
    /// Wraps a raw index vector.
    pub fn new(values: Vec<u16>) -> Self {
        Self { values }
    }

    /// The operation index per edge.
    pub fn values(&self) -> &[u16] {
        &self.values
    }

    /// Number of edges in this encoding.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Whether the encoding has no edges (never true for space members).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// A copy with exactly one edge switched to a different operation.
    ///
    /// The edge is chosen uniformly, then the replacement operation is chosen
    /// uniformly among the `ops_per_edge - 1` alternatives, so the result is
    /// uniform over the single-edit neighborhood and never equals `self`.
    pub fn mutate_one_edge<R: Rng + ?Sized>(
        &self,
        spec: &SearchSpaceSpec,
        rng: &mut R,
    ) -> Result<ArchEncoding> {
        spec.check_member(self)?;
        let edge = rng.gen_range(0..spec.edge_count());
        let current = self.values[edge] as usize;
        // Draw from the alternatives directly: indices >= current shift by one.
        let mut replacement = rng.gen_range(0..spec.ops_per_edge() - 1);
        if replacement >= current {
            replacement += 1;
        }
        let mut values = self.values.clone();
        values[edge] = replacement as u16;
        Ok(ArchEncoding { values })
    }
}

impl fmt::Display for ArchEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ArchEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Parses the canonical comma-separated text form.
///
/// This checks the format only; use [`SearchSpaceSpec::parse_encoding`] to
/// also validate membership in a particular space.
impl FromStr for ArchEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Err(Error::InvalidValue("empty encoding text".into()));
        }
        let values = s
            .split(',')
            .map(|tok| {
                tok.trim().parse::<u16>().map_err(|_| {
                    Error::InvalidValue(format!("bad operation index `{}` in encoding", tok.trim()))
                })
            })
            .collect::<Result<Vec<u16>>>()?;
        Ok(ArchEncoding { values })
    }
}

/// Lexicographic iterator over a whole space.
#[derive(Debug, Clone)]
pub struct Enumerate {
    spec: SearchSpaceSpec,
    next: Option<Vec<u16>>,
}

impl Iterator for Enumerate {
    type Item = ArchEncoding;

    fn next(&mut self) -> Option<ArchEncoding> {
        let current = self.next.take()?;
        let item = ArchEncoding {
            values: current.clone(),
        };
        // Odometer increment from the last edge.
        let mut values = current;
        let top = (self.spec.ops_per_edge() - 1) as u16;
        for i in (0..values.len()).rev() {
            if values[i] < top {
                values[i] += 1;
                self.next = Some(values);
                return Some(item);
            }
            values[i] = 0;
        }
        self.next = None;
        Some(item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn spec(edges: usize, ops: usize) -> SearchSpaceSpec {
        SearchSpaceSpec::new("test", edges, ops).unwrap()
    }

    #[test]
    fn constructor_rejects_degenerate_shapes() {
        assert!(SearchSpaceSpec::new("s", 0, 5).is_err());
        assert!(SearchSpaceSpec::new("s", 3, 0).is_err());
        assert!(SearchSpaceSpec::new("s", 3, 1).is_err());
        assert!(SearchSpaceSpec::new("", 3, 3).is_err());
        assert!(SearchSpaceSpec::new("two words", 3, 3).is_err());
        assert!(SearchSpaceSpec::new("s", 3, 2).is_ok());
    }

    #[test]
    fn size_of_six_edge_five_op_space() {
        assert_eq!(spec(6, 5).size(), 15_625);
        assert_eq!(spec(1, 2).size(), 2);
        assert_eq!(spec(3, 3).size(), 27);
    }

    #[test]
    fn membership_checks_length_and_range() {
        let s = spec(2, 5);
        assert!(s.contains(&ArchEncoding::new(vec![0, 4])));
        assert!(!s.contains(&ArchEncoding::new(vec![0, 5])));
        assert!(!s.contains(&ArchEncoding::new(vec![0])));
        assert!(!s.contains(&ArchEncoding::new(vec![0, 0, 0])));
    }

    #[test]
    fn text_form_round_trips() {
        let x = ArchEncoding::new(vec![3, 0, 4, 1, 1, 2]);
        assert_eq!(x.to_string(), "3,0,4,1,1,2");
        let back: ArchEncoding = "3,0,4,1,1,2".parse().unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn parse_rejects_garbage_and_out_of_range() {
        assert!("".parse::<ArchEncoding>().is_err());
        assert!("1,,2".parse::<ArchEncoding>().is_err());
        assert!("1,a".parse::<ArchEncoding>().is_err());
        assert!("-1,2".parse::<ArchEncoding>().is_err());
        let s = spec(2, 5);
        assert!(s.parse_encoding("1,4").is_ok());
        assert!(matches!(
            s.parse_encoding("1,5"),
            Err(Error::EncodingMismatch { .. })
        ));
        assert!(matches!(
            s.parse_encoding("1,2,3"),
            Err(Error::EncodingMismatch { .. })
        ));
    }

    #[test]
    fn uniform_sampling_frequency_on_two_point_space() {
        // Single binary edge: each value should appear with frequency 1/2.
        let s = spec(1, 2);
        let mut rng = rng::stream(11, 0);
        let n = 10_000;
        let mut ones = 0usize;
        for _ in 0..n {
            if s.sample_uniform(&mut rng).values()[0] == 1 {
                ones += 1;
            }
        }
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "frequency {freq}");
    }

    #[test]
    fn uniform_sampling_covers_small_space() {
        let s = spec(2, 2);
        let mut rng = rng::stream(5, 0);
        let mut seen = HashSet::new();
        for _ in 0..200 {
            seen.insert(s.sample_uniform(&mut rng));
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn enumerate_is_lexicographic_and_complete() {
        let s = spec(2, 2);
        let all: Vec<String> = s.enumerate().unwrap().map(|x| x.to_string()).collect();
        assert_eq!(all, vec!["0,0", "0,1", "1,0", "1,1"]);

        let s = spec(6, 5);
        let all: Vec<ArchEncoding> = s.enumerate().unwrap().collect();
        assert_eq!(all.len(), 15_625);
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, all, "enumeration must be sorted and duplicate-free");
    }

    #[test]
    fn enumerate_refuses_oversized_spaces() {
        let s = spec(10, 10); // 10^10 encodings
        assert!(matches!(s.enumerate(), Err(Error::SpaceTooLarge { .. })));
        assert!(s.enumerate_capped(20_000_000_000).is_ok());
    }

    #[test]
    fn mutation_lands_on_every_single_edit_neighbor() {
        let s = spec(6, 5);
        let x = s.parse_encoding("3,0,4,1,1,2").unwrap();
        // Oracle: the exact neighbor set, built by brute force.
        let mut expected = HashSet::new();
        for edge in 0..6 {
            for op in 0..5u16 {
                if op != x.values()[edge] {
                    let mut v = x.values().to_vec();
                    v[edge] = op;
                    expected.insert(ArchEncoding::new(v));
                }
            }
        }
        assert_eq!(expected.len(), 24);

        let mut rng = rng::stream(17, 0);
        let mut counts: HashMap<ArchEncoding, usize> = HashMap::new();
        let draws = 24_000;
        for _ in 0..draws {
            let y = x.mutate_one_edge(&s, &mut rng).unwrap();
            assert_ne!(y, x, "mutation must change the encoding");
            assert!(expected.contains(&y), "unexpected neighbor {y}");
            *counts.entry(y).or_default() += 1;
        }
        assert_eq!(counts.len(), 24, "every neighbor should be reachable");
        // Uniformity: each neighbor expects draws/24 = 1000 hits.
        for (y, c) in counts {
            assert!((800..1200).contains(&c), "neighbor {y} hit {c} times");
        }
    }

    #[test]
    fn mutation_validates_membership() {
        let s = spec(3, 3);
        let foreign = ArchEncoding::new(vec![0, 1]);
        let mut rng = rng::stream(0, 0);
        assert!(matches!(
            foreign.mutate_one_edge(&s, &mut rng),
            Err(Error::EncodingMismatch { .. })
        ));
    }

    #[test]
    fn unevaluated_sampling_avoids_the_evaluated_set() {
        let s = spec(2, 2);
        let mut evaluated = HashSet::new();
        evaluated.insert(s.parse_encoding("0,0").unwrap());
        evaluated.insert(s.parse_encoding("0,1").unwrap());
        evaluated.insert(s.parse_encoding("1,0").unwrap());
        let mut rng = rng::stream(2, 0);
        for _ in 0..50 {
            let x = s.sample_unevaluated(&evaluated, &mut rng).unwrap();
            assert_eq!(x.to_string(), "1,1");
        }
        evaluated.insert(s.parse_encoding("1,1").unwrap());
        assert!(matches!(
            s.sample_unevaluated(&evaluated, &mut rng),
            Err(Error::SearchComplete)
        ));
    }

    proptest! {
        #[test]
        fn text_round_trip_for_arbitrary_encodings(values in proptest::collection::vec(0u16..500, 1..40)) {
            let x = ArchEncoding::new(values);
            let back: ArchEncoding = x.to_string().parse().unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn sampled_encodings_are_members(edges in 1usize..8, ops in 2usize..9, seed in 0u64..1000) {
            let s = SearchSpaceSpec::new("prop", edges, ops).unwrap();
            let mut rng = rng::stream(seed, 1);
            let x = s.sample_uniform(&mut rng);
            prop_assert!(s.contains(&x));
            let y = x.mutate_one_edge(&s, &mut rng).unwrap();
            prop_assert!(s.contains(&y));
            prop_assert_ne!(&y, &x);
            // Exactly one edge differs.
            let diffs = x.values().iter().zip(y.values()).filter(|(a, b)| a != b).count();
            prop_assert_eq!(diffs, 1);
        }
    }
}
