//! Fuzzy label distributions: raw accumulators gathered during training and
//! the normalized per-class probabilities presented on output.
//!
//! The two representations are distinct types on purpose: the hash table
//! stores cheap unnormalized [`LabelWeights`] and normalization happens once
//! per query, producing an immutable [`LabelDistribution`].

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance for the sum-to-one invariant of a distribution.
pub const DISTRIBUTION_SUM_TOLERANCE: f64 = 1e-9;

/// Dense class index, `0 <= id < k` with `k >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelId(pub u16);

impl LabelId {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl fmt::Display for LabelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn check_class_count(k: usize) -> Result<()> {
    if !(2..=usize::from(u16::MAX)).contains(&k) {
        return Err(Error::BadClassCount(k));
    }
    Ok(())
}

/// Raw per-class accumulators (unnormalized zeta sums).
///
/// Merging is elementwise addition, which is commutative and associative, so
/// partial accumulators built in parallel can be combined in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelWeights {
    weights: Vec<f64>,
}

impl LabelWeights {
    pub fn zeros(class_count: usize) -> Result<Self> {
        check_class_count(class_count)?;
        Ok(Self {
            weights: vec![0.0; class_count],
        })
    }

    pub fn from_vec(weights: Vec<f64>) -> Result<Self> {
        check_class_count(weights.len())?;
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::BadDistribution(format!(
                "weight {w} is negative or not finite"
            )));
        }
        Ok(Self { weights })
    }

    pub fn class_count(&self) -> usize {
        self.weights.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Add `factor * dist[i]` to every class accumulator.
    pub fn add_scaled(&mut self, dist: &LabelDistribution, factor: f64) -> Result<()> {
        if dist.class_count() != self.class_count() {
            return Err(Error::ClassMismatch {
                expected: self.class_count(),
                got: dist.class_count(),
            });
        }
        for (w, p) in self.weights.iter_mut().zip(dist.probs()) {
            *w += factor * p;
        }
        Ok(())
    }

    /// Elementwise sum with another accumulator.
    pub fn merge(&mut self, other: &LabelWeights) -> Result<()> {
        if other.class_count() != self.class_count() {
            return Err(Error::ClassMismatch {
                expected: self.class_count(),
                got: other.class_count(),
            });
        }
        self.merge_slice(&other.weights);
        Ok(())
    }

    /// Elementwise sum with a raw weight slice of matching length.
    pub(crate) fn merge_slice(&mut self, other: &[f64]) {
        debug_assert_eq!(other.len(), self.weights.len());
        for (w, o) in self.weights.iter_mut().zip(other) {
            *w += o;
        }
    }

    /// Scale the accumulators down to a probability distribution.
    ///
    /// Fails on an all-zero accumulator; entries that exist always carry
    /// positive mass, so this only rejects hand-built empty weights.
    pub fn normalize(&self) -> Result<LabelDistribution> {
        LabelDistribution::from_weights(&self.weights)
    }
}

/// A normalized per-class probability vector: every entry in `[0, 1]` and the
/// sum within [`DISTRIBUTION_SUM_TOLERANCE`] of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_class_count(probs.len())?;
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
            return Err(Error::BadDistribution(format!("probability {p} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_SUM_TOLERANCE {
            return Err(Error::BadDistribution(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalize accumulator weights that are already known to be finite and
    /// non-negative (table entries maintain that invariant), skipping the
    /// per-element validation on the query hot path.
    pub(crate) fn from_accumulator(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / sum).collect(),
        })
    }

    /// Normalize arbitrary non-negative weights; rejects an all-zero vector.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        check_class_count(weights.len())?;
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::BadDistribution(format!(
                "weight {w} is negative or not finite"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::EmptyDistribution);
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / sum).collect(),
        })
    }

    /// One-hot distribution for a single class.
    pub fn crisp(label: LabelId, class_count: usize) -> Result<Self> {
        check_class_count(class_count)?;
        if label.index() >= class_count {
            return Err(Error::ClassMismatch {
                expected: class_count,
                got: label.index() + 1,
            });
        }
        let mut probs = vec![0.0; class_count];
        probs[label.index()] = 1.0;
        Ok(Self { probs })
    }

    pub fn class_count(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// How far the distribution is from a crisp one-hot assignment:
    /// `(1 - max_i p_i) * k / (k - 1)`, 0 for one-hot, 1 for uniform.
    pub fn fuzziness(&self) -> f64 {
        let max = self.probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let k = self.probs.len() as f64;
        ((1.0 - max) * k / (k - 1.0)).clamp(0.0, 1.0)
    }

    /// Class with the largest probability; ties go to the lowest id.
    pub fn argmax_label(&self) -> LabelId {
        let mut best = 0usize;
        for (i, p) in self.probs.iter().enumerate().skip(1) {
            if *p > self.probs[best] {
                best = i;
            }
        }
        LabelId(best as u16)
    }

    /// Half the L1 distance between two distributions, in `[0, 1]`.
    pub fn total_variation(&self, other: &LabelDistribution) -> Result<f64> {
        if other.class_count() != self.class_count() {
            return Err(Error::ClassMismatch {
                expected: self.class_count(),
                got: other.class_count(),
            });
        }
        let l1: f64 = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(l1 / 2.0)
    }
}

/// Renders as `label:prob` pairs sorted by label id, 4 decimal places:
/// `0:0.2000,1:0.8000`.
impl fmt::Display for LabelDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.probs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}:{p:.4}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_fig_weights() {
        let raw = LabelWeights::from_vec(vec![1.0, 4.0]).unwrap();
        let d = raw.normalize().unwrap();
        assert_eq!(d.probs(), &[0.2, 0.8]);
        assert_eq!(d.to_string(), "0:0.2000,1:0.8000");
    }

    #[test]
    fn normalize_single_class_mass() {
        for c in [0.5, 1.0, 17.0] {
            let d = LabelWeights::from_vec(vec![c, 0.0, 0.0]).unwrap().normalize().unwrap();
            assert_eq!(d.probs(), &[1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn normalize_symmetric() {
        let d = LabelWeights::from_vec(vec![3.0, 3.0, 3.0]).unwrap().normalize().unwrap();
        for p in d.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_all_zero_is_an_error() {
        let raw = LabelWeights::zeros(2).unwrap();
        assert!(matches!(raw.normalize(), Err(Error::EmptyDistribution)));
    }

    #[test]
    fn fuzziness_examples() {
        let crisp = LabelDistribution::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(crisp.fuzziness(), 0.0);
        let uniform = LabelDistribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(uniform.fuzziness(), 1.0);
        // (1 - 0.8) * 2 / (2 - 1) = 0.4
        let mixed = LabelDistribution::new(vec![0.2, 0.8]).unwrap();
        assert!((mixed.fuzziness() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn argmax_examples() {
        let d = LabelDistribution::new(vec![0.2, 0.8]).unwrap();
        assert_eq!(d.argmax_label(), LabelId(1));
        let tie = LabelDistribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(tie.argmax_label(), LabelId(0));
        let three = LabelDistribution::new(vec![0.1, 0.3, 0.6]).unwrap();
        assert_eq!(three.argmax_label(), LabelId(2));
    }

    #[test]
    fn distribution_validation() {
        assert!(LabelDistribution::new(vec![1.0]).is_err());
        assert!(LabelDistribution::new(vec![0.6, 0.6]).is_err());
        assert!(LabelDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(LabelWeights::from_vec(vec![1.0, -1.0]).is_err());
        assert!(LabelWeights::from_vec(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn crisp_builds_one_hot() {
        let d = LabelDistribution::crisp(LabelId(2), 4).unwrap();
        assert_eq!(d.probs(), &[0.0, 0.0, 1.0, 0.0]);
        assert!(LabelDistribution::crisp(LabelId(4), 4).is_err());
    }

    #[test]
    fn merge_accumulates_elementwise() {
        let mut a = LabelWeights::from_vec(vec![1.0, 2.0]).unwrap();
        let b = LabelWeights::from_vec(vec![0.5, 1.0]).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.as_slice(), &[1.5, 3.0]);
        let wrong = LabelWeights::zeros(3).unwrap();
        assert!(a.merge(&wrong).is_err());
    }

    #[test]
    fn total_variation_basics() {
        let a = LabelDistribution::new(vec![1.0, 0.0]).unwrap();
        let b = LabelDistribution::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(a.total_variation(&b).unwrap(), 1.0);
        assert_eq!(a.total_variation(&a).unwrap(), 0.0);
    }

    fn raw_weights() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..100.0, 2..6)
            .prop_filter("needs positive mass", |w| w.iter().sum::<f64>() > 1e-6)
    }

    proptest! {
        #[test]
        fn normalize_is_scale_invariant(w in raw_weights(), c in 1e-3f64..1e3) {
            let base = LabelDistribution::from_weights(&w).unwrap();
            let scaled_vec: Vec<f64> = w.iter().map(|x| x * c).collect();
            let scaled = LabelDistribution::from_weights(&scaled_vec).unwrap();
            for (a, b) in base.probs().iter().zip(scaled.probs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn argmax_invariant_under_normalization(w in raw_weights()) {
            let d = LabelDistribution::from_weights(&w).unwrap();
            let raw_argmax = w
                .iter()
                .enumerate()
                .fold(0usize, |best, (i, x)| if *x > w[best] { i } else { best });
            prop_assert_eq!(d.argmax_label(), LabelId(raw_argmax as u16));
        }

        #[test]
        fn fuzziness_is_permutation_invariant(w in raw_weights(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let d = LabelDistribution::from_weights(&w).unwrap();
            let mut shuffled = w.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let s = LabelDistribution::from_weights(&shuffled).unwrap();
            prop_assert!((d.fuzziness() - s.fuzziness()).abs() < 1e-12);
        }

        #[test]
        fn fuzziness_bounds(w in raw_weights()) {
            let f = LabelDistribution::from_weights(&w).unwrap().fuzziness();
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
