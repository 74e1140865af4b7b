use std::fmt;

use crate::error::{Error, Result};
use crate::partition::{legal_splits, CuGeometry, SplitSet, SplitType};

/// Tolerance on the legal-class sum of a distribution.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Probabilities over the six splits in canonical order, with the set of
/// splits legal at the node it was produced for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitDistribution {
    pub probs: [f64; 6],
    pub legal: SplitSet,
}

impl SplitDistribution {
    pub fn uniform(legal: SplitSet) -> Self {
        let mut probs = [0.0; 6];
        let p = 1.0 / legal.len().max(1) as f64;
        for s in legal.iter() {
            probs[s.index()] = p;
        }
        SplitDistribution { probs, legal }
    }

    /// All mass on `split`; falls back to uniform if `split` is not legal.
    pub fn one_hot(legal: SplitSet, split: SplitType) -> Self {
        if !legal.contains(split) {
            return Self::uniform(legal);
        }
        let mut probs = [0.0; 6];
        probs[split.index()] = 1.0;
        SplitDistribution { probs, legal }
    }

    /// Softmax over the legal entries of `logits`; illegal entries get 0.
    pub fn from_logits(logits: &[f64; 6], legal: SplitSet) -> Self {
        let max = legal
            .iter()
            .map(|s| logits[s.index()])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs = [0.0; 6];
        let mut sum = 0.0;
        for s in legal.iter() {
            let e = (logits[s.index()] - max).exp();
            probs[s.index()] = e;
            sum += e;
        }
        for s in legal.iter() {
            probs[s.index()] /= sum;
        }
        SplitDistribution { probs, legal }
    }

    pub fn prob(&self, split: SplitType) -> f64 {
        self.probs[split.index()]
    }

    /// Nonnegative, finite, zero off the legal set, legal mass 1 +- 1e-6.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut sum = 0.0;
        for s in SplitType::ALL {
            let p = self.probs[s.index()];
            if !p.is_finite() || p < 0.0 {
                return Err(format!("{s} has probability {p}"));
            }
            if self.legal.contains(s) {
                sum += p;
            } else if p != 0.0 {
                return Err(format!("illegal split {s} has probability {p}"));
            }
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(format!("legal probabilities sum to {sum}"));
        }
        Ok(())
    }

    /// Validates against the legality of `geometry`.
    pub fn check_for(&self, geometry: &CuGeometry) -> Result<()> {
        let malformed = |reason: String| Error::MalformedDistribution {
            geometry: *geometry,
            reason,
        };
        if self.legal != legal_splits(geometry) {
            return Err(malformed("legal set does not match the node".into()));
        }
        self.validate().map_err(malformed)
    }

    /// The `n` most probable legal splits, descending; ties go to the lower
    /// canonical index.
    pub fn top_n(&self, n: usize) -> Result<Vec<SplitType>> {
        let k = self.legal.len();
        if n == 0 || n > k {
            return Err(Error::InvalidTopN(format!("N = {n} with {k} legal splits")));
        }
        let mut order: Vec<SplitType> = self.legal.iter().collect();
        order.sort_by(|a, b| self.prob(*b).total_cmp(&self.prob(*a)).then(a.index().cmp(&b.index())));
        order.truncate(n);
        Ok(order)
    }
}

impl fmt::Display for SplitDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for s in self.legal.iter() {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{}:{:.3}", s, self.prob(s))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use SplitType::*;

    fn all() -> SplitSet {
        SplitType::ALL.into_iter().collect()
    }

    #[test]
    fn top_n_orders_by_probability() {
        let d = SplitDistribution {
            probs: [0.1, 0.5, 0.2, 0.1, 0.05, 0.05],
            legal: all(),
        };
        assert_eq!(d.top_n(2).unwrap(), vec![Qt, Bth]);
        assert_eq!(d.top_n(6).unwrap().len(), 6);
        assert!(d.top_n(0).is_err());
        assert!(d.top_n(7).is_err());
    }

    #[test]
    fn ties_go_to_canonical_order() {
        let d = SplitDistribution {
            probs: [0.4, 0.0, 0.4, 0.2, 0.0, 0.0],
            legal: [Ns, Bth, Btv].into_iter().collect(),
        };
        assert_eq!(d.top_n(1).unwrap(), vec![Ns]);
        assert_eq!(d.top_n(3).unwrap(), vec![Ns, Bth, Btv]);
    }

    #[test]
    fn softmax_masks_illegal() {
        let legal: SplitSet = [Ns, Qt].into_iter().collect();
        let d = SplitDistribution::from_logits(&[1.0, 2.0, 50.0, 0.0, 0.0, 0.0], legal);
        d.validate().unwrap();
        assert_eq!(d.prob(Bth), 0.0);
        assert!(d.prob(Qt) > d.prob(Ns));
        let u = SplitDistribution::from_logits(&[0.0; 6], legal);
        assert_eq!(u, SplitDistribution::uniform(legal));
    }

    #[test]
    fn validation_rejects_bad_mass() {
        let legal: SplitSet = [Ns, Qt].into_iter().collect();
        let mut d = SplitDistribution::uniform(legal);
        d.probs[2] = 0.1;
        assert!(d.validate().is_err());
        let mut d = SplitDistribution::uniform(legal);
        d.probs[0] = 0.6;
        assert!(d.validate().is_err());
        let mut d = SplitDistribution::uniform(legal);
        d.probs[0] = f64::NAN;
        assert!(d.validate().is_err());
        assert!(SplitDistribution::one_hot(legal, Qt).validate().is_ok());
    }
}
