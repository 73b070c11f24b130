use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{BackendHandle, ClassifyRequest};
use super::probs::{e_minus_c, mc_aggregate, NliProbs};
use crate::data_io::FaithfulnessInstance;
use crate::rng::sha256_hex;
use crate::{Error, Result};

pub const DEFAULT_MC_SAMPLES: u32 = 15;
pub const DEFAULT_BATCH_SIZE: usize = 16;
/// Whitespace tokens kept from the grounding text before tail truncation.
pub const DEFAULT_MAX_PREMISE_TOKENS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreMode {
    #[serde(rename = "e")]
    EntailmentOnly,
    #[serde(rename = "e-c")]
    EMinusC,
}

impl ScoreMode {
    pub fn score(self, p: &NliProbs) -> f64 {
        match self {
            ScoreMode::EntailmentOnly => p.e,
            ScoreMode::EMinusC => e_minus_c(p),
        }
    }

    /// Interval every score of this mode lies in.
    pub fn range(self) -> (f64, f64) {
        match self {
            ScoreMode::EntailmentOnly => (0.0, 1.0),
            ScoreMode::EMinusC => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreMode::EntailmentOnly => "e",
            ScoreMode::EMinusC => "e-c",
        })
    }
}

impl FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" | "entailment" => Ok(ScoreMode::EntailmentOnly),
            "e-c" | "e_minus_c" => Ok(ScoreMode::EMinusC),
            other => Err(Error::usage(format!(
                "unknown score mode `{other}` (expected e or e-c)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub mode: ScoreMode,
    pub mc_enabled: bool,
    /// Dropout samples per instance; ignored when `mc_enabled` is false.
    pub k: u32,
    pub base_seed: u64,
    pub batch_size: usize,
    pub max_premise_tokens: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            mode: ScoreMode::EMinusC,
            mc_enabled: true,
            k: DEFAULT_MC_SAMPLES,
            base_seed: 0,
            batch_size: DEFAULT_BATCH_SIZE,
            max_premise_tokens: DEFAULT_MAX_PREMISE_TOKENS,
        }
    }
}

impl MetricConfig {
    /// Entailment-only scoring without dropout.
    pub fn base() -> Self {
        MetricConfig {
            mode: ScoreMode::EntailmentOnly,
            mc_enabled: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::usage("k must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::usage("batch_size must be at least 1"));
        }
        if self.max_premise_tokens == 0 {
            return Err(Error::usage("max_premise_tokens must be at least 1"));
        }
        Ok(())
    }

    /// Forward passes per instance.
    pub fn samples(&self) -> u32 {
        if self.mc_enabled {
            self.k
        } else {
            1
        }
    }

    pub fn metric_id(&self) -> String {
        if self.mc_enabled {
            format!("{}+mc{}", self.mode, self.k)
        } else {
            self.mode.to_string()
        }
    }

    /// Hash of every field that can change a score. Batch size is
    /// excluded, as are seed and k when dropout is off.
    pub fn digest(&self) -> String {
        let canon = serde_json::json!({
            "mode": self.mode,
            "mc_enabled": self.mc_enabled,
            "k": self.samples(),
            "base_seed": if self.mc_enabled { self.base_seed } else { 0 },
            "max_premise_tokens": self.max_premise_tokens,
        });
        sha256_hex(canon.to_string().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub instance_uid: String,
    pub metric_id: String,
    pub score: f64,
    /// One vector per forward pass, in seed order.
    pub prob_samples: Option<Vec<NliProbs>>,
    pub truncated: bool,
}

/// Keep at most `max_tokens` whitespace-delimited tokens from the start of
/// `text`. Returns the kept slice and whether anything was dropped.
pub fn truncate_premise(text: &str, max_tokens: usize) -> (&str, bool) {
    let mut seen = 0;
    let mut in_token = false;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if in_token {
                in_token = false;
                if seen == max_tokens {
                    let rest = &text[i..];
                    let dropped = rest.split_whitespace().next().is_some();
                    return (&text[..i], dropped);
                }
            }
        } else if !in_token {
            in_token = true;
            seen += 1;
            if seen > max_tokens {
                return (text[..i].trim_end(), true);
            }
        }
    }
    (text, false)
}

fn finish_record(uid: &str, cfg: &MetricConfig, samples: Vec<NliProbs>, truncated: bool) -> Result<ScoreRecord> {
    let mean = mc_aggregate(&samples)?;
    Ok(ScoreRecord {
        instance_uid: uid.to_owned(),
        metric_id: cfg.metric_id(),
        score: cfg.mode.score(&mean),
        prob_samples: Some(samples),
        truncated,
    })
}

/// Score one grounding/generation pair.
///
/// With dropout enabled this issues `k` forward passes with seeds
/// `base_seed, base_seed + 1, ...`, averages the probability vectors and
/// then applies the score function.
pub fn score_pair(
    uid: &str,
    grounding: &str,
    generation: &str,
    cfg: &MetricConfig,
    handle: &BackendHandle,
) -> Result<ScoreRecord> {
    cfg.validate()?;
    if generation.trim().is_empty() {
        return Err(Error::validation("empty generation").for_instance(uid));
    }
    let (premise, truncated) = truncate_premise(grounding, cfg.max_premise_tokens);
    let requests: Vec<_> = (0..cfg.samples())
        .map(|i| ClassifyRequest {
            premise,
            hypothesis: generation,
            seed: cfg.base_seed.wrapping_add(i as u64),
        })
        .collect();
    let samples = handle
        .classify_requests(&requests, cfg.mc_enabled)
        .map_err(|e| e.for_instance(uid))?;
    finish_record(uid, cfg, samples, truncated)
}

/// Score every instance, batching `cfg.batch_size` instances per backend
/// call. A failing batch is retried instance by instance so one bad
/// instance yields one error entry and the rest still get scores.
pub fn score_dataset(
    instances: &[FaithfulnessInstance],
    cfg: &MetricConfig,
    handle: &BackendHandle,
) -> Result<Vec<Result<ScoreRecord>>> {
    cfg.validate()?;
    if instances.is_empty() {
        return Err(Error::usage("score_dataset needs at least one instance"));
    }
    let out = instances
        .par_chunks(cfg.batch_size)
        .map(|chunk| score_chunk(chunk, cfg, handle))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(out)
}

fn score_chunk(chunk: &[FaithfulnessInstance], cfg: &MetricConfig, handle: &BackendHandle) -> Vec<Result<ScoreRecord>> {
    let prepared: Vec<_> = chunk
        .iter()
        .map(|inst| {
            let (premise, truncated) = truncate_premise(&inst.grounding, cfg.max_premise_tokens);
            (inst, premise, truncated)
        })
        .collect();
    let valid: Vec<usize> = prepared
        .iter()
        .enumerate()
        .filter(|(_, (inst, _, _))| !inst.generation.trim().is_empty())
        .map(|(i, _)| i)
        .collect();

    let mut samples: Vec<Vec<NliProbs>> = vec![Vec::with_capacity(cfg.samples() as usize); prepared.len()];
    let mut batch_ok = !valid.is_empty();
    for s in 0..cfg.samples() {
        if !batch_ok {
            break;
        }
        let seed = cfg.base_seed.wrapping_add(s as u64);
        let requests: Vec<_> = valid
            .iter()
            .map(|&i| ClassifyRequest {
                premise: prepared[i].1,
                hypothesis: &prepared[i].0.generation,
                seed,
            })
            .collect();
        match handle.classify_requests(&requests, cfg.mc_enabled) {
            Ok(probs) => {
                for (&i, p) in valid.iter().zip(probs) {
                    samples[i].push(p);
                }
            }
            Err(e) => {
                log::warn!("batch of {} failed ({e}); retrying per instance", valid.len());
                batch_ok = false;
            }
        }
    }

    prepared
        .iter()
        .zip(samples)
        .map(|((inst, _, truncated), s)| {
            if batch_ok && !s.is_empty() {
                finish_record(&inst.uid, cfg, s, *truncated)
            } else {
                score_pair(&inst.uid, &inst.grounding, &inst.generation, cfg, handle)
            }
        })
        .collect()
}
