use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub var_x: String,
    pub var_y: String,
    pub tau: f64,
    pub n: usize,
    /// Two-sided p-value from the tie-corrected normal approximation.
    pub p_value: Option<f64>,
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite values")
}

/// Tie sizes of a sorted sequence.
fn tie_groups(sorted: impl Iterator<Item = f64>) -> Vec<u64> {
    let mut groups = Vec::new();
    let mut prev: Option<f64> = None;
    let mut run = 0u64;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            if run > 1 {
                groups.push(run);
            }
            run = 1;
            prev = Some(v);
        }
    }
    if run > 1 {
        groups.push(run);
    }
    groups
}

fn pairs(groups: &[u64]) -> u64 {
    groups.iter().map(|t| t * (t - 1) / 2).sum()
}

/// Sort `v` ascending and return the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], &mut buf[..mid]) + merge_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if cmp(v[j], v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b with tie correction, in O(n log n).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    kendall_tau_b_named("x", "y", x, y)
}

pub fn kendall_tau_b_named(var_x: &str, var_y: &str, x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::usage(format!("{} x values but {} y values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::usage("tau-b needs at least two observations"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::validation("tau-b inputs must be finite"));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| cmp(x[a], x[b]).then(cmp(y[a], y[b])));

    let x_groups = tie_groups(idx.iter().map(|&i| x[i]));
    let mut joint = 0u64;
    let mut run = 1u64;
    for w in idx.windows(2) {
        if x[w[0]] == x[w[1]] && y[w[0]] == y[w[1]] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_count(&mut ys, &mut buf);
    let y_groups = tie_groups(ys.iter().copied());

    let n0 = n as u64 * (n as u64 - 1) / 2;
    let (tx, ty) = (pairs(&x_groups), pairs(&y_groups));
    if tx == n0 || ty == n0 {
        let which = if tx == n0 { var_x } else { var_y };
        return Err(Error::UndefinedCorrelation(format!("`{which}` is constant")));
    }
    let s = n0 as i64 - tx as i64 - ty as i64 + joint as i64 - 2 * discordant as i64;
    let tau = s as f64 / ((n0 - tx) as f64 * (n0 - ty) as f64).sqrt();
    Ok(CorrelationResult {
        var_x: var_x.to_owned(),
        var_y: var_y.to_owned(),
        tau,
        n,
        p_value: normal_p_value(s, n, &x_groups, &y_groups),
    })
}

fn normal_p_value(s: i64, n: usize, xg: &[u64], yg: &[u64]) -> Option<f64> {
    let n = n as f64;
    let sum = |g: &[u64], f: &dyn Fn(f64) -> f64| g.iter().map(|&t| f(t as f64)).sum::<f64>();
    let v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    let vt = sum(xg, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(yg, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(xg, &|t| t * (t - 1.0)) * sum(yg, &|u| u * (u - 1.0)) / (2.0 * n * (n - 1.0));
    let v2 = if n > 2.0 {
        sum(xg, &|t| t * (t - 1.0) * (t - 2.0)) * sum(yg, &|u| u * (u - 1.0) * (u - 2.0))
            / (9.0 * n * (n - 1.0) * (n - 2.0))
    } else {
        0.0
    };
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;
    if var <= 0.0 {
        return None;
    }
    let z = s as f64 / var.sqrt();
    Some(erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0))
}
