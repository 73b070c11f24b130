use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auc::{auc_from_split, split_classes};
use crate::rng::stream_rng;
use crate::{Error, Result};

pub const DEFAULT_BOOTSTRAP: usize = 1000;
pub const DEFAULT_ALPHA: f64 = 0.05;

fn check(b: usize, alpha: f64) -> Result<()> {
    if b < 1 {
        return Err(Error::usage("bootstrap needs at least one resample"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::usage(format!("alpha {alpha} outside (0, 1)")));
    }
    Ok(())
}

fn resample<R: Rng>(rng: &mut R, xs: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]));
}

/// AUCs of `b` stratified resamples: each class is resampled with
/// replacement at its own size. Resample `i` draws from stream `i` of
/// `seed`, so the output does not depend on the thread count.
pub fn bootstrap_aucs(scores: &[f64], labels: &[u8], b: usize, seed: u64) -> Result<Vec<f64>> {
    check(b, DEFAULT_ALPHA)?;
    let (pos, neg) = split_classes(scores, labels)?;
    Ok((0..b)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(pos.len()), Vec::with_capacity(neg.len())),
            |(p, n), i| {
                let mut rng = stream_rng(seed, i as u64);
                resample(&mut rng, &pos, p);
                resample(&mut rng, &neg, n);
                auc_from_split(p, n)
            },
        )
        .collect())
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `[alpha/2, 1 - alpha/2]` percentile interval of `samples`.
pub fn percentile_interval(samples: &[f64], alpha: f64) -> Result<(f64, f64)> {
    check(samples.len(), alpha)?;
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok((
        quantile_sorted(&sorted, alpha / 2.0),
        quantile_sorted(&sorted, 1.0 - alpha / 2.0),
    ))
}

/// Stratified percentile bootstrap interval for the AUC.
pub fn bootstrap_ci(scores: &[f64], labels: &[u8], b: usize, alpha: f64, seed: u64) -> Result<(f64, f64)> {
    check(b, alpha)?;
    percentile_interval(&bootstrap_aucs(scores, labels, b, seed)?, alpha)
}

/// Widen `(low, high)` so it contains `point`.
pub(crate) fn cover(point: f64, (low, high): (f64, f64)) -> (f64, f64) {
    (low.min(point), high.max(point))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationDiff {
    pub corpus_id: String,
    pub delta_auc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// AUC(variant) - AUC(base) with a paired stratified bootstrap interval:
/// instances are resampled within their class and both metrics are
/// rescored on the same resample. The interval is widened to contain the
/// point estimate when the percentile interval alone misses it.
pub fn ablation_diff(
    corpus_id: &str,
    variant: &[f64],
    base: &[f64],
    labels: &[u8],
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<AblationDiff> {
    check(b, alpha)?;
    if variant.len() != base.len() {
        return Err(Error::usage(format!(
            "variant has {} scores, base has {}",
            variant.len(),
            base.len()
        )));
    }
    let (vp, vn) = split_classes(variant, labels)?;
    let (bp, bn) = split_classes(base, labels)?;
    let delta = auc_from_split(&vp, &vn) - auc_from_split(&bp, &bn);

    let deltas: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let pi: Vec<usize> = (0..vp.len()).map(|_| rng.random_range(0..vp.len())).collect();
            let ni: Vec<usize> = (0..vn.len()).map(|_| rng.random_range(0..vn.len())).collect();
            let pick = |xs: &[f64], idx: &[usize]| idx.iter().map(|&j| xs[j]).collect::<Vec<_>>();
            auc_from_split(&pick(&vp, &pi), &pick(&vn, &ni)) - auc_from_split(&pick(&bp, &pi), &pick(&bn, &ni))
        })
        .collect();
    let (ci_low, ci_high) = cover(delta, percentile_interval(&deltas, alpha)?);
    Ok(AblationDiff {
        corpus_id: corpus_id.to_owned(),
        delta_auc: delta,
        ci_low,
        ci_high,
    })
}
