use crate::{Error, Result};

/// Check scores/labels and split them into (positive, negative) scores.
pub(crate) fn split_classes(scores: &[f64], labels: &[u8]) -> Result<(Vec<f64>, Vec<f64>)> {
    if scores.len() != labels.len() {
        return Err(Error::usage(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, (&s, &l)) in scores.iter().zip(labels).enumerate() {
        if !s.is_finite() {
            return Err(Error::validation(format!("score {i} is {s}")));
        }
        match l {
            1 => pos.push(s),
            0 => neg.push(s),
            other => return Err(Error::validation(format!("label {i} is {other}, expected 0 or 1"))),
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Degenerate(format!(
            "AUC needs both classes ({} positive, {} negative)",
            pos.len(),
            neg.len()
        )));
    }
    Ok((pos, neg))
}

/// Twice the Mann-Whitney U statistic of `pos` over `neg`: two points per
/// (positive, negative) pair with the positive ranked higher, one per tie.
pub(crate) fn doubled_u(pos: &[f64], neg: &[f64]) -> u64 {
    let mut all: Vec<(f64, bool)> = Vec::with_capacity(pos.len() + neg.len());
    all.extend(pos.iter().map(|&s| (s, true)));
    all.extend(neg.iter().map(|&s| (s, false)));
    all.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));

    let mut u2 = 0u64;
    let mut neg_below = 0u64;
    let mut i = 0;
    while i < all.len() {
        let v = all[i].0;
        let (mut p, mut q) = (0u64, 0u64);
        while i < all.len() && all[i].0 == v {
            if all[i].1 {
                p += 1;
            } else {
                q += 1;
            }
            i += 1;
        }
        u2 += p * (2 * neg_below + q);
        neg_below += q;
    }
    u2
}

pub(crate) fn auc_from_split(pos: &[f64], neg: &[f64]) -> f64 {
    doubled_u(pos, neg) as f64 / (2 * pos.len() as u64 * neg.len() as u64) as f64
}

/// Area under the ROC curve with label 1 as the positive (faithful) class.
///
/// Computed as the Mann-Whitney probability that a random positive
/// outscores a random negative, counting ties as one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = split_classes(scores, labels)?;
    Ok(auc_from_split(&pos, &neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        // 0.9 beats both negatives; 0.4 beats 0.1 only.
        assert_eq!(roc_auc(&[0.9, 0.4, 0.6, 0.1], &[1, 1, 0, 0]).unwrap(), 0.75);
        // 0.5 ties 0.5 and beats 0.2.
        assert_eq!(roc_auc(&[0.5, 0.5, 0.2], &[1, 0, 0]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[3.0, 2.0, 1.0, 0.0], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.0, 1.0], &[1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn single_class_is_degenerate() {
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::Degenerate(_))));
        assert!(matches!(roc_auc(&[0.1, 0.2], &[0, 0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(roc_auc(&[0.1], &[1, 0]), Err(Error::Usage(_))));
        assert!(roc_auc(&[f64::NAN, 0.2], &[1, 0]).is_err());
        assert!(roc_auc(&[0.1, 0.2], &[2, 0]).is_err());
    }

    #[test]
    fn signed_zero_ties() {
        assert_eq!(roc_auc(&[-0.0, 0.0], &[1, 0]).unwrap(), 0.5);
    }

    fn labelled() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..60)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec((0u8..8).prop_map(|v| v as f64 / 4.0), n),
                    prop::collection::vec(0u8..2, n),
                )
            })
            .prop_filter("both classes", |(_, l)| l.contains(&0) && l.contains(&1))
    }

    proptest! {
        #[test]
        fn monotone_transforms_preserve_auc((s, l) in labelled()) {
            let a = roc_auc(&s, &l).unwrap();
            let affine: Vec<f64> = s.iter().map(|x| 3.0 * x - 7.0).collect();
            let exp: Vec<f64> = s.iter().map(|x| x.exp()).collect();
            prop_assert_eq!(a, roc_auc(&affine, &l).unwrap());
            prop_assert_eq!(a, roc_auc(&exp, &l).unwrap());
        }

        #[test]
        fn flipping_labels_complements((s, l) in labelled()) {
            let flipped: Vec<u8> = l.iter().map(|x| 1 - x).collect();
            let a = roc_auc(&s, &l).unwrap();
            let b = roc_auc(&s, &flipped).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
