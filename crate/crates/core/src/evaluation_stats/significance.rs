use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auc::{doubled_u, split_classes};
use crate::rng::stream_rng;
use crate::{Error, Result};

pub const DEFAULT_PERMUTATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub metric_a: String,
    pub metric_b: String,
    pub corpus_id: String,
    /// AUC(a) - AUC(b).
    pub observed_diff: f64,
    /// One-sided p-value for AUC(a) > AUC(b).
    pub p_value: f64,
    pub permutations: usize,
}

impl SignificanceResult {
    pub fn significant(&self, level: f64) -> bool {
        self.p_value <= level
    }
}

/// Paired approximate randomization test of AUC(a) > AUC(b).
///
/// Each permutation swaps the two metrics' scores on every instance with
/// probability 1/2 and recomputes the AUC difference;
/// `p = (#{permuted >= observed} + 1) / (R + 1)`. Differences are compared
/// as exact integer pair counts. Permutation `i` uses stream `i` of
/// `seed`.
#[allow(clippy::too_many_arguments)]
pub fn paired_randomization_test(
    metric_a: &str,
    metric_b: &str,
    corpus_id: &str,
    scores_a: &[f64],
    scores_b: &[f64],
    labels: &[u8],
    permutations: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    if scores_a.len() != scores_b.len() || scores_a.len() != labels.len() {
        return Err(Error::usage(format!(
            "misaligned inputs: {} / {} scores, {} labels",
            scores_a.len(),
            scores_b.len(),
            labels.len()
        )));
    }
    if permutations == 0 {
        return Err(Error::usage("need at least one permutation"));
    }
    let (ap, an) = split_classes(scores_a, labels)?;
    let (bp, bn) = split_classes(scores_b, labels)?;
    let stat = |ap: &[f64], an: &[f64], bp: &[f64], bn: &[f64]| doubled_u(ap, an) as i64 - doubled_u(bp, bn) as i64;
    let observed = stat(&ap, &an, &bp, &bn);

    // Visit instances in input order so a flip lands on the same instance
    // whichever metric is passed first.
    let order: Vec<(bool, usize)> = {
        let (mut pi, mut ni) = (0, 0);
        labels
            .iter()
            .map(|&l| {
                if l == 1 {
                    pi += 1;
                    (true, pi - 1)
                } else {
                    ni += 1;
                    (false, ni - 1)
                }
            })
            .collect()
    };

    let exceed: usize = (0..permutations)
        .into_par_iter()
        .map_init(
            || (ap.clone(), an.clone(), bp.clone(), bn.clone()),
            |(xp, xn, yp, yn), i| {
                xp.copy_from_slice(&ap);
                xn.copy_from_slice(&an);
                yp.copy_from_slice(&bp);
                yn.copy_from_slice(&bn);
                let mut rng = stream_rng(seed, i as u64);
                for &(is_pos, j) in &order {
                    if rng.random_bool(0.5) {
                        if is_pos {
                            std::mem::swap(&mut xp[j], &mut yp[j]);
                        } else {
                            std::mem::swap(&mut xn[j], &mut yn[j]);
                        }
                    }
                }
                usize::from(stat(xp, xn, yp, yn) >= observed)
            },
        )
        .sum();

    let pairs = 2.0 * ap.len() as f64 * an.len() as f64;
    Ok(SignificanceResult {
        metric_a: metric_a.to_owned(),
        metric_b: metric_b.to_owned(),
        corpus_id: corpus_id.to_owned(),
        observed_diff: observed as f64 / pairs,
        p_value: (exceed + 1) as f64 / (permutations + 1) as f64,
        permutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut r = stream_rng(seed, 0);
        (0..n).map(|_| r.random::<f64>()).collect()
    }

    #[test]
    fn identical_metrics_give_p_one() {
        let s = noise(50, 1);
        let l: Vec<u8> = (0..50).map(|i| (i % 2) as u8).collect();
        let r = paired_randomization_test("a", "a", "c", &s, &s, &l, 500, 0).unwrap();
        assert_eq!(r.observed_diff, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn perfect_versus_reversed_is_significant() {
        let l: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let a: Vec<f64> = l.iter().map(|&x| x as f64).collect();
        let b: Vec<f64> = l.iter().map(|&x| 1.0 - x as f64).collect();
        let r = paired_randomization_test("a", "b", "c", &a, &b, &l, 10_000, 5).unwrap();
        assert_eq!(r.observed_diff, 1.0);
        assert!(r.p_value <= 0.001, "p = {}", r.p_value);
        assert!(r.p_value >= 1.0 / 10_001.0);
    }

    #[test]
    fn swapping_metrics_complements_p() {
        let n = 60;
        let l: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        let a: Vec<f64> = noise(n, 2).iter().zip(&l).map(|(x, &y)| x + 0.3 * y as f64).collect();
        let b = noise(n, 3);
        let rperm = 999;
        let ab = paired_randomization_test("a", "b", "c", &a, &b, &l, rperm, 9).unwrap();
        let ba = paired_randomization_test("b", "a", "c", &b, &a, &l, rperm, 9).unwrap();
        assert_eq!(ab.observed_diff, -ba.observed_diff);
        // Counts of >= obs and <= obs cover every permutation, the ties
        // with the observed value twice.
        let total = (ab.p_value + ba.p_value) * (rperm + 1) as f64;
        assert!(total >= (rperm + 2) as f64 - 1e-9);
    }

    #[test]
    fn misaligned_inputs() {
        assert!(matches!(
            paired_randomization_test("a", "b", "c", &[0.1, 0.2], &[0.1], &[1, 0], 10, 0),
            Err(Error::Usage(_))
        ));
    }
}
