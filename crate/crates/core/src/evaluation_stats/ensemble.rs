use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data_io::ScoreRow;
use crate::{Error, Result};

/// How aligned member scores of one corpus are merged into one column.
pub trait CombinationRule: Send + Sync {
    fn name(&self) -> &str;

    /// `columns[m][i]` is member `m`'s score for instance `i`.
    fn combine(&self, columns: &[Vec<f64>]) -> Vec<f64>;
}

/// Min-max normalise each member to `[0, 1]`, then take the arithmetic
/// mean. A constant member maps to 0.5.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinMaxMean;

impl CombinationRule for MinMaxMean {
    fn name(&self) -> &str {
        "minmax_mean"
    }

    fn combine(&self, columns: &[Vec<f64>]) -> Vec<f64> {
        let normalized: Vec<Vec<f64>> = columns
            .iter()
            .map(|col| {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                col.iter()
                    .map(|&x| if hi > lo { (x - lo) / (hi - lo) } else { 0.5 })
                    .collect()
            })
            .collect();
        mean_columns(&normalized)
    }
}

/// Unnormalised arithmetic mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawMean;

impl CombinationRule for RawMean {
    fn name(&self) -> &str {
        "mean"
    }

    fn combine(&self, columns: &[Vec<f64>]) -> Vec<f64> {
        mean_columns(columns)
    }
}

fn mean_columns(columns: &[Vec<f64>]) -> Vec<f64> {
    let m = columns.len() as f64;
    (0..columns[0].len())
        .map(|i| columns.iter().map(|c| c[i]).sum::<f64>() / m)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub name: String,
    pub rule: String,
    pub members: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

/// Combine per-instance score columns of several metrics, corpus by
/// corpus. Every column must cover exactly the same uids.
pub fn ensemble_scores(name: &str, columns: &[Vec<ScoreRow>], rule: &dyn CombinationRule) -> Result<Ensemble> {
    if columns.len() < 2 {
        return Err(Error::usage("an ensemble needs at least two metrics"));
    }
    let mut members = Vec::with_capacity(columns.len());
    let mut maps: Vec<HashMap<&str, &ScoreRow>> = Vec::with_capacity(columns.len());
    for col in columns {
        let metric = col
            .first()
            .map(|r| r.metric.clone())
            .ok_or_else(|| Error::usage("empty score column"))?;
        let mut map = HashMap::with_capacity(col.len());
        for r in col {
            if map.insert(r.uid.as_str(), r).is_some() {
                return Err(Error::validation(format!("duplicate uid {} in metric {metric}", r.uid)));
            }
        }
        members.push(metric);
        maps.push(map);
    }

    let reference = &columns[0];
    let ref_uids: HashSet<&str> = reference.iter().map(|r| r.uid.as_str()).collect();
    let mut missing: Vec<String> = Vec::new();
    for map in &maps[1..] {
        missing.extend(ref_uids.iter().filter(|u| !map.contains_key(*u)).map(|u| u.to_string()));
        missing.extend(map.keys().filter(|u| !ref_uids.contains(*u)).map(|u| u.to_string()));
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::Alignment { missing });
    }

    let mut by_corpus: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in reference {
        by_corpus.entry(r.corpus.as_str()).or_default().push(r.uid.as_str());
    }
    let mut combined: HashMap<&str, f64> = HashMap::with_capacity(reference.len());
    for uids in by_corpus.values() {
        let cols: Vec<Vec<f64>> = maps.iter().map(|m| uids.iter().map(|u| m[u].score).collect()).collect();
        for (u, s) in uids.iter().zip(rule.combine(&cols)) {
            combined.insert(u, s);
        }
    }
    Ok(Ensemble {
        name: name.to_owned(),
        rule: rule.name().to_owned(),
        members,
        rows: reference
            .iter()
            .map(|r| ScoreRow {
                uid: r.uid.clone(),
                corpus: r.corpus.clone(),
                metric: name.to_owned(),
                score: combined[r.uid.as_str()],
            })
            .collect(),
    })
}
