//! Phrase-subset robustness protocol: rebuild the augmented corpus several
//! times from random phrase subsets and summarise the downstream scores.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{build_augmented_corpus, NliInstance, PhraseEntry, PhraseSet};
use crate::data_io::write_nli_jsonl_to;
use crate::rng::sha256_hex;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRun {
    pub repeat: usize,
    /// Seeds both the phrase subset and the per-instance phrase draws.
    pub seed: u64,
    pub phrases: Vec<PhraseEntry>,
    pub output_path: PathBuf,
    /// SHA-256 of the corpus file.
    pub content_hash: String,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessManifest {
    pub repeats: usize,
    pub subset_size: usize,
    pub runs: Vec<RobustnessRun>,
}

fn render(corpus: &[NliInstance], phrases: &PhraseSet, seed: u64) -> Result<(Vec<u8>, usize)> {
    let built = build_augmented_corpus(corpus, phrases, seed)?;
    let mut buf = Vec::new();
    write_nli_jsonl_to(&mut buf, &built)?;
    Ok((buf, built.len()))
}

/// Build `repeats` augmented corpora under `out_dir`, each from an
/// `m`-phrase subset. `seeds[r]` drives repeat `r`.
pub fn run_robustness_protocol(
    corpus: &[NliInstance],
    phrases: &PhraseSet,
    repeats: usize,
    m: usize,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<RobustnessManifest> {
    if repeats == 0 {
        return Err(Error::usage("repeats must be at least 1"));
    }
    if seeds.len() != repeats {
        return Err(Error::usage(format!("{} seeds for {repeats} repeats", seeds.len())));
    }
    let mut runs = Vec::with_capacity(repeats);
    for (repeat, &seed) in seeds.iter().enumerate() {
        let wrap = |e: Error| Error::Repeat {
            repeat,
            source: Box::new(e),
        };
        let subset = phrases.sample_subset(m, seed).map_err(wrap)?;
        let (bytes, instances) = render(corpus, &subset, seed).map_err(wrap)?;
        let dir = out_dir.join(format!("repeat_{repeat:02}"));
        fs::create_dir_all(&dir).map_err(|e| wrap(Error::io(&dir, e)))?;
        let output_path = dir.join("train.jsonl");
        fs::write(&output_path, &bytes).map_err(|e| wrap(Error::io(&output_path, e)))?;
        fs::write(dir.join("phrases.txt"), subset.to_string()).map_err(|e| wrap(Error::io(&dir, e)))?;
        let run = RobustnessRun {
            repeat,
            seed,
            phrases: subset.entries().to_vec(),
            output_path,
            content_hash: sha256_hex(&bytes),
            instances,
        };
        let manifest_path = dir.join("manifest.json");
        fs::write(&manifest_path, serde_json::to_vec_pretty(&run)?).map_err(|e| wrap(Error::io(&manifest_path, e)))?;
        runs.push(run);
    }
    let manifest = RobustnessManifest {
        repeats,
        subset_size: m,
        runs,
    };
    let path = out_dir.join("robustness_manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Rebuild one repeat from its manifest entry and return the content hash
/// of the regenerated corpus.
pub fn replay_robustness_run(corpus: &[NliInstance], run: &RobustnessRun) -> Result<String> {
    let phrases = PhraseSet::new(run.phrases.clone())?;
    let (bytes, _) = render(corpus, &phrases, run.seed)?;
    Ok(sha256_hex(&bytes))
}

/// Spread of one corpus' score across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub corpus: String,
    pub avg: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
}

/// Per-corpus avg/std/min/max over repeats, plus an `Avg` row computed
/// over each repeat's unweighted macro average.
pub fn summarize_repeats(per_repeat: &[Vec<(String, f64)>]) -> Result<Vec<RepeatSummary>> {
    let first = per_repeat
        .first()
        .ok_or_else(|| Error::usage("no repeats to summarise"))?;
    if first.is_empty() {
        return Err(Error::usage("repeat has no corpora"));
    }
    for (r, rep) in per_repeat.iter().enumerate() {
        let same = rep.len() == first.len() && rep.iter().zip(first).all(|(a, b)| a.0 == b.0);
        if !same {
            return Err(Error::validation(format!(
                "repeat {r} covers different corpora than repeat 0"
            )));
        }
    }
    let mut rows: Vec<RepeatSummary> = (0..first.len())
        .map(|j| {
            let vals: Vec<f64> = per_repeat.iter().map(|r| r[j].1).collect();
            summary(&first[j].0, &vals)
        })
        .collect();
    let macros: Vec<f64> = per_repeat
        .iter()
        .map(|r| r.iter().map(|(_, v)| v).sum::<f64>() / r.len() as f64)
        .collect();
    rows.push(summary("Avg", &macros));
    Ok(rows)
}

fn summary(corpus: &str, vals: &[f64]) -> RepeatSummary {
    let n = vals.len() as f64;
    let avg = vals.iter().sum::<f64>() / n;
    let std = if vals.len() > 1 {
        (vals.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    RepeatSummary {
        corpus: corpus.to_owned(),
        avg,
        std,
        min: vals.iter().copied().fold(f64::INFINITY, f64::min),
        max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        runs: vals.len(),
    }
}
