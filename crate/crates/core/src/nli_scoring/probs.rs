use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on `e + n + c = 1`.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Entailment / neutral / contradiction probabilities for one
/// premise-hypothesis pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliProbs {
    pub e: f64,
    pub n: f64,
    pub c: f64,
}

impl NliProbs {
    pub fn new(e: f64, n: f64, c: f64) -> Result<Self> {
        let p = NliProbs { e, n, c };
        p.validate()?;
        Ok(p)
    }

    /// Softmax over `[entailment, neutral, contradiction]` logits.
    pub fn from_logits(logits: [f64; 3]) -> Result<Self> {
        if logits.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::validation(format!("invalid logits {logits:?}")));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::validation("all logits are -inf"));
        }
        let exps = logits.map(|l| (l - max).exp());
        let z: f64 = exps.iter().sum();
        NliProbs::new(exps[0] / z, exps[1] / z, exps[2] / z)
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        match v {
            [e, n, c] => NliProbs::new(*e, *n, *c),
            _ => Err(Error::validation(format!(
                "probability vector must have 3 components, got {}",
                v.len()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("e", self.e), ("n", self.n), ("c", self.c)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!("component {name}={v} outside [0, 1]")));
            }
        }
        let sum = self.e + self.n + self.c;
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::validation(format!("probabilities sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.e, self.n, self.c]
    }
}

/// Entailment minus contradiction, in `[-1, 1]`.
pub fn e_minus_c(p: &NliProbs) -> f64 {
    p.e - p.c
}

/// Componentwise mean of Monte-Carlo dropout samples.
///
/// Uses an incremental mean, which returns a constant input unchanged
/// bit for bit.
pub fn mc_aggregate(samples: &[NliProbs]) -> Result<NliProbs> {
    if samples.is_empty() {
        return Err(Error::usage("mc_aggregate needs at least one sample"));
    }
    let mut mean = [0.0f64; 3];
    for (i, s) in samples.iter().enumerate() {
        s.validate()?;
        let w = (i + 1) as f64;
        for (m, v) in mean.iter_mut().zip(s.as_array()) {
            *m += (v - *m) / w;
        }
    }
    let p = NliProbs {
        e: mean[0],
        n: mean[1],
        c: mean[2],
    };
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(e: f64, n: f64, c: f64) -> NliProbs {
        NliProbs::new(e, n, c).unwrap()
    }

    #[test]
    fn e_minus_c_extremes() {
        assert_eq!(e_minus_c(&p(1.0, 0.0, 0.0)), 1.0);
        assert_eq!(e_minus_c(&p(0.0, 0.0, 1.0)), -1.0);
        let third = 1.0 / 3.0;
        assert_eq!(e_minus_c(&p(third, third, third)), 0.0);
    }

    #[test]
    fn aggregate_two_points() {
        let m = mc_aggregate(&[p(1.0, 0.0, 0.0), p(0.0, 0.0, 1.0)]).unwrap();
        assert_eq!(m, p(0.5, 0.0, 0.5));
    }

    #[test]
    fn aggregate_singleton_and_constants() {
        let x = p(0.2, 0.5, 0.3);
        assert_eq!(mc_aggregate(&[x]).unwrap(), x);
        assert_eq!(mc_aggregate(&vec![x; 15]).unwrap(), x);
    }

    #[test]
    fn aggregate_empty_is_usage_error() {
        assert!(matches!(mc_aggregate(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(NliProbs::new(0.5, 0.5, 0.5).is_err());
        assert!(NliProbs::new(-0.1, 0.6, 0.5).is_err());
        assert!(NliProbs::from_slice(&[0.5, 0.5]).is_err());
        assert!(NliProbs::new(f64::NAN, 0.5, 0.5).is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        let q = NliProbs::from_logits([2.0, -1.0, 0.5]).unwrap();
        assert!((q.e + q.n + q.c - 1.0).abs() < 1e-12);
        assert!(q.e > q.c && q.c > q.n);
    }
}
