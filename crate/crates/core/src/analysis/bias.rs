use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kendall::{kendall_tau_b_named, CorrelationResult};
use super::pronoun::{pronoun_indicator_with, PronounDetector, RuleBasedDetector};
use crate::data_io::{FaithfulnessInstance, ScoreRow};
use crate::{Error, Result};

/// Substrings (matched against the lower-cased generator id with
/// punctuation removed) that identify each generator family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorPatterns {
    pub gpt2: Vec<String>,
    pub t5: Vec<String>,
    pub ctrl: Vec<String>,
}

impl Default for GeneratorPatterns {
    fn default() -> Self {
        GeneratorPatterns {
            gpt2: vec!["gpt2".into()],
            t5: vec!["t5".into()],
            ctrl: vec!["ctrl".into()],
        }
    }
}

fn normalize_model(id: &str) -> String {
    id.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

impl GeneratorPatterns {
    fn matches(patterns: &[String], id: &str) -> bool {
        let id = normalize_model(id);
        patterns.iter().any(|p| id.contains(&normalize_model(p)))
    }

    pub fn is_gpt2(&self, id: &str) -> bool {
        Self::matches(&self.gpt2, id)
    }

    pub fn is_t5(&self, id: &str) -> bool {
        Self::matches(&self.t5, id)
    }

    pub fn is_ctrl(&self, id: &str) -> bool {
        Self::matches(&self.ctrl, id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCorrelation {
    pub var_x: String,
    pub var_y: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub rows: Vec<CorrelationResult>,
    pub skipped: Vec<SkippedCorrelation>,
}

impl BiasReport {
    pub fn get(&self, var_x: &str, var_y: &str) -> Option<&CorrelationResult> {
        self.rows.iter().find(|r| r.var_x == var_x && r.var_y == var_y)
    }

    fn push(&mut self, var_x: &str, var_y: &str, x: &[f64], y: &[f64]) {
        let outcome = if x.len() < 2 {
            Err(format!("{} instance(s)", x.len()))
        } else {
            kendall_tau_b_named(var_x, var_y, x, y).map_err(|e| e.to_string())
        };
        match outcome {
            Ok(r) => self.rows.push(r),
            Err(reason) => self.skipped.push(SkippedCorrelation {
                var_x: var_x.to_owned(),
                var_y: var_y.to_owned(),
                reason,
            }),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["var_x", "var_y", "tau", "n", "p_value"])?;
        for r in &self.rows {
            w.write_record([
                r.var_x.clone(),
                r.var_y.clone(),
                format!("{:.4}", r.tau),
                r.n.to_string(),
                r.p_value.map_or("NA".into(), |p| format!("{p:.3e}")),
            ])?;
        }
        for s in &self.skipped {
            w.write_record([s.var_x.as_str(), s.var_y.as_str(), "NA", "0", "NA"])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub const GPT2_INDICATOR: &str = "gpt2_vs_t5";
pub const CTRL_INDICATOR: &str = "ctrl_dialog";
pub const PRONOUN: &str = "pronoun_I";
pub const FAITHFUL: &str = "faithful";
pub const FAITHFUL_NO_PRONOUN: &str = "faithful_no_pronoun";

/// Generator-bias correlations on a corpus carrying generator ids.
///
/// On the GPT-2/T5 subset (GPT-2 = 1, T5 = 0) the model indicator is
/// correlated with pronoun occurrence, with faithfulness, and with
/// faithfulness among instances without a first-person pronoun. Over the
/// whole corpus the ctrl-system indicator is correlated with faithfulness
/// and with pronoun occurrence. Correlations that are undefined on the
/// given data are reported as skipped.
pub fn begin_bias_report(instances: &[FaithfulnessInstance]) -> Result<BiasReport> {
    begin_bias_report_with(instances, &GeneratorPatterns::default(), &RuleBasedDetector)
}

pub fn begin_bias_report_with(
    instances: &[FaithfulnessInstance],
    patterns: &GeneratorPatterns,
    detector: &dyn PronounDetector,
) -> Result<BiasReport> {
    if instances.is_empty() {
        return Err(Error::usage("bias report over no instances"));
    }
    let models = instances
        .iter()
        .map(|i| i.generator_model.as_deref().filter(|m| !m.trim().is_empty()))
        .collect::<Option<Vec<&str>>>()
        .ok_or_else(|| Error::UnsupportedCorpus("instances lack generator model ids".into()))?;
    let pronoun: Vec<f64> = instances
        .iter()
        .map(|i| pronoun_indicator_with(detector, &i.generation) as f64)
        .collect();
    let faithful: Vec<f64> = instances.iter().map(|i| i.gold_label as f64).collect();

    let mut report = BiasReport {
        rows: Vec::new(),
        skipped: Vec::new(),
    };

    let pair: Vec<(usize, f64)> = models
        .iter()
        .enumerate()
        .filter_map(|(i, m)| {
            if patterns.is_gpt2(m) {
                Some((i, 1.0))
            } else if patterns.is_t5(m) {
                Some((i, 0.0))
            } else {
                None
            }
        })
        .collect();
    let ind: Vec<f64> = pair.iter().map(|p| p.1).collect();
    let pick = |v: &[f64], rows: &[(usize, f64)]| rows.iter().map(|&(i, _)| v[i]).collect::<Vec<f64>>();
    report.push(GPT2_INDICATOR, PRONOUN, &ind, &pick(&pronoun, &pair));
    report.push(GPT2_INDICATOR, FAITHFUL, &ind, &pick(&faithful, &pair));
    let quiet: Vec<(usize, f64)> = pair.iter().copied().filter(|&(i, _)| pronoun[i] == 0.0).collect();
    let quiet_ind: Vec<f64> = quiet.iter().map(|p| p.1).collect();
    report.push(
        GPT2_INDICATOR,
        FAITHFUL_NO_PRONOUN,
        &quiet_ind,
        &pick(&faithful, &quiet),
    );

    let ctrl: Vec<f64> = models
        .iter()
        .map(|m| f64::from(u8::from(patterns.is_ctrl(m))))
        .collect();
    report.push(CTRL_INDICATOR, FAITHFUL, &ctrl, &faithful);
    report.push(CTRL_INDICATOR, PRONOUN, &ctrl, &pronoun);
    Ok(report)
}

pub const GOLD_LABEL_ROW: &str = "Gold Label";

/// Pronoun-proxy correlations laid out with one row per method, one column
/// per corpus, and a final gold-label row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyTable {
    pub corpora: Vec<String>,
    pub rows: Vec<ProxyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyRow {
    pub method: String,
    pub cells: Vec<ProxyCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ProxyCell {
    Tau(CorrelationResult),
    Undefined(String),
}

impl ProxyCell {
    pub fn tau(&self) -> Option<f64> {
        match self {
            ProxyCell::Tau(r) => Some(r.tau),
            ProxyCell::Undefined(_) => None,
        }
    }
}

/// Kendall tau-b of the pronoun indicator against gold labels and against
/// each named score set, per corpus. A cell whose correlation is undefined
/// (for example, a corpus where no generation contains the pronoun)
/// carries the reason instead of a value.
pub fn proxy_correlation_report(
    instances: &[FaithfulnessInstance],
    score_sets: &[(String, Vec<ScoreRow>)],
) -> Result<ProxyTable> {
    if instances.is_empty() {
        return Err(Error::usage("proxy correlations over no instances"));
    }
    let mut corpora: Vec<String> = Vec::new();
    for inst in instances {
        if !corpora.contains(&inst.corpus_id) {
            corpora.push(inst.corpus_id.clone());
        }
    }
    let by_corpus: Vec<Vec<&FaithfulnessInstance>> = corpora
        .iter()
        .map(|c| instances.iter().filter(|i| &i.corpus_id == c).collect())
        .collect();
    let indicators: Vec<Vec<f64>> = by_corpus
        .iter()
        .map(|insts| {
            insts
                .iter()
                .map(|i| super::pronoun_indicator(&i.generation) as f64)
                .collect()
        })
        .collect();

    let cell = |y_name: &str, x: &[f64], y: &[f64]| match kendall_tau_b_named(PRONOUN, y_name, x, y) {
        Ok(r) => Ok(ProxyCell::Tau(r)),
        Err(Error::UndefinedCorrelation(m)) => Ok(ProxyCell::Undefined(m)),
        Err(Error::Usage(m)) => Ok(ProxyCell::Undefined(m)),
        Err(e) => Err(e),
    };

    let mut rows = Vec::new();
    for (method, scores) in score_sets {
        let lookup: HashMap<&str, f64> = scores.iter().map(|r| (r.uid.as_str(), r.score)).collect();
        let mut missing = Vec::new();
        let mut cells = Vec::new();
        for (insts, x) in by_corpus.iter().zip(&indicators) {
            let y: Vec<f64> = insts
                .iter()
                .map(|i| {
                    lookup.get(i.uid.as_str()).copied().unwrap_or_else(|| {
                        missing.push(i.uid.clone());
                        f64::NAN
                    })
                })
                .collect();
            if missing.is_empty() {
                cells.push(cell(method, x, &y)?);
            }
        }
        if !missing.is_empty() {
            return Err(Error::Alignment { missing });
        }
        rows.push(ProxyRow {
            method: method.clone(),
            cells,
        });
    }
    let mut gold = Vec::new();
    for (insts, x) in by_corpus.iter().zip(&indicators) {
        let y: Vec<f64> = insts.iter().map(|i| i.gold_label as f64).collect();
        gold.push(cell(GOLD_LABEL_ROW, x, &y)?);
    }
    rows.push(ProxyRow {
        method: GOLD_LABEL_ROW.into(),
        cells: gold,
    });
    Ok(ProxyTable { corpora, rows })
}

impl ProxyTable {
    pub fn cell(&self, method: &str, corpus: &str) -> Option<&ProxyCell> {
        let c = self.corpora.iter().position(|x| x == corpus)?;
        self.rows.iter().find(|r| r.method == method).map(|r| &r.cells[c])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["Method".to_owned()];
        header.extend(self.corpora.iter().cloned());
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.method.clone()];
            rec.extend(
                row.cells
                    .iter()
                    .map(|c| c.tau().map_or("NA".into(), |t| format!("{t:.2}"))),
            );
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
