use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_aucs, cover, percentile_interval, AblationDiff};
use super::roc_auc;
use super::significance::SignificanceResult;
use crate::data_io::{FaithfulnessInstance, ScoreRow};
use crate::rng::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub corpus_id: String,
    pub auc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroRow {
    pub auc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub per_corpus: Vec<CorpusRow>,
    pub macro_avg: MacroRow,
}

/// A corpus row together with the bootstrap AUCs behind its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEvaluation {
    pub row: CorpusRow,
    pub bootstrap: Vec<f64>,
}

/// Aligned scores and gold labels of one corpus for one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScores {
    pub corpus_id: String,
    pub uids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Bootstrap seed of a corpus. Keyed by corpus id so that every metric
/// and every report resamples a corpus the same way.
pub fn corpus_seed(seed: u64, corpus_id: &str) -> u64 {
    derive_seed(seed, corpus_id)
}

pub fn evaluate_corpus(
    corpus_id: &str,
    scores: &[f64],
    labels: &[u8],
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<CorpusEvaluation> {
    let auc = roc_auc(scores, labels)?;
    let bootstrap = bootstrap_aucs(scores, labels, b, corpus_seed(seed, corpus_id))?;
    let (ci_low, ci_high) = cover(auc, percentile_interval(&bootstrap, alpha)?);
    Ok(CorpusEvaluation {
        row: CorpusRow {
            corpus_id: corpus_id.to_owned(),
            auc,
            ci_low,
            ci_high,
            n: scores.len(),
        },
        bootstrap,
    })
}

/// Unweighted mean AUC over corpora. The interval comes from averaging
/// the corpora's bootstrap AUCs resample by resample (each corpus was
/// resampled independently) and taking percentiles.
pub fn macro_average(corpora: &[CorpusEvaluation], alpha: f64) -> Result<MacroRow> {
    let first = corpora
        .first()
        .ok_or_else(|| Error::usage("macro average needs at least one corpus"))?;
    let b = first.bootstrap.len();
    if corpora.iter().any(|c| c.bootstrap.len() != b) {
        return Err(Error::usage("corpora carry different numbers of bootstrap resamples"));
    }
    let k = corpora.len() as f64;
    let auc = corpora.iter().map(|c| c.row.auc).sum::<f64>() / k;
    let means: Vec<f64> = (0..b)
        .map(|i| corpora.iter().map(|c| c.bootstrap[i]).sum::<f64>() / k)
        .collect();
    let (ci_low, ci_high) = cover(auc, percentile_interval(&means, alpha)?);
    Ok(MacroRow { auc, ci_low, ci_high })
}

pub fn evaluate_metric(metric: &str, corpora: &[CorpusScores], b: usize, alpha: f64, seed: u64) -> Result<EvalReport> {
    let evals = corpora
        .iter()
        .map(|c| {
            evaluate_corpus(&c.corpus_id, &c.scores, &c.labels, b, alpha, seed)
                .map_err(|e| Error::validation(format!("corpus {}: {e}", c.corpus_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let macro_avg = macro_average(&evals, alpha)?;
    Ok(EvalReport {
        metric: metric.to_owned(),
        per_corpus: evals.into_iter().map(|e| e.row).collect(),
        macro_avg,
    })
}

/// Join score rows with gold labels, grouped by corpus and sorted by uid.
/// Every scored uid needs a gold label and every gold instance a score.
pub fn align_with_gold(rows: &[ScoreRow], gold: &[FaithfulnessInstance]) -> Result<Vec<CorpusScores>> {
    let gold_map: HashMap<&str, &FaithfulnessInstance> = gold.iter().map(|g| (g.uid.as_str(), g)).collect();
    let scored: HashMap<&str, &ScoreRow> = rows.iter().map(|r| (r.uid.as_str(), r)).collect();
    let mut missing: Vec<String> = rows
        .iter()
        .filter(|r| !gold_map.contains_key(r.uid.as_str()))
        .map(|r| r.uid.clone())
        .chain(
            gold.iter()
                .filter(|g| !scored.contains_key(g.uid.as_str()))
                .map(|g| g.uid.clone()),
        )
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::Alignment { missing });
    }
    let mut by_corpus: BTreeMap<&str, Vec<&ScoreRow>> = BTreeMap::new();
    for r in rows {
        by_corpus
            .entry(gold_map[r.uid.as_str()].corpus_id.as_str())
            .or_default()
            .push(r);
    }
    Ok(by_corpus
        .into_iter()
        .map(|(corpus, mut rs)| {
            rs.sort_by(|a, b| a.uid.cmp(&b.uid));
            CorpusScores {
                corpus_id: corpus.to_owned(),
                uids: rs.iter().map(|r| r.uid.clone()).collect(),
                scores: rs.iter().map(|r| r.score).collect(),
                labels: rs.iter().map(|r| gold_map[r.uid.as_str()].gold_label).collect(),
            }
        })
        .collect())
}

pub fn write_report_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "corpus", "auc", "ci_low", "ci_high", "n"])?;
    for r in reports {
        for c in &r.per_corpus {
            w.write_record([
                r.metric.as_str(),
                &c.corpus_id,
                &c.auc.to_string(),
                &c.ci_low.to_string(),
                &c.ci_high.to_string(),
                &c.n.to_string(),
            ])?;
        }
        let n: usize = r.per_corpus.iter().map(|c| c.n).sum();
        w.write_record([
            r.metric.as_str(),
            "Avg",
            &r.macro_avg.auc.to_string(),
            &r.macro_avg.ci_low.to_string(),
            &r.macro_avg.ci_high.to_string(),
            &n.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_significance_csv(path: &Path, results: &[SignificanceResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ablation_csv(path: &Path, variant: &str, diffs: &[AblationDiff]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "corpus", "delta_auc", "ci_low", "ci_high"])?;
    for d in diffs {
        w.write_record([
            variant,
            &d.corpus_id,
            &d.delta_auc.to_string(),
            &d.ci_low.to_string(),
            &d.ci_high.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const MARKERS: [&str; 6] = ["*", "+", "x", "#", "$", "%"];

/// Plain-text grid with one row per corpus and one column per metric, each
/// cell `low auc high` in percent. A marker after the AUC means the metric
/// beats the baseline the marker stands for at `level`.
pub fn render_grid(reports: &[EvalReport], significance: &[SignificanceResult], level: f64) -> String {
    let mut baselines: Vec<&str> = Vec::new();
    for s in significance {
        if !baselines.contains(&s.metric_b.as_str()) {
            baselines.push(&s.metric_b);
        }
    }
    let marker = |metric: &str, corpus: &str| -> String {
        baselines
            .iter()
            .enumerate()
            .filter(|(_, b)| {
                significance
                    .iter()
                    .any(|s| s.metric_a == metric && s.metric_b == **b && s.corpus_id == corpus && s.significant(level))
            })
            .map(|(i, _)| MARKERS[i % MARKERS.len()])
            .collect()
    };
    let mut corpora: Vec<&str> = Vec::new();
    for r in reports {
        for c in &r.per_corpus {
            if !corpora.contains(&c.corpus_id.as_str()) {
                corpora.push(&c.corpus_id);
            }
        }
    }
    let mut out = String::new();
    let _ = write!(out, "{:<12}", "Corpus");
    for r in reports {
        let _ = write!(out, " | {:^22}", r.metric);
    }
    out.push('\n');
    let cell = |lo: f64, auc: f64, hi: f64, m: String| {
        format!("{:>5.1} {:>5.1}{:<4} {:>5.1}", lo * 100.0, auc * 100.0, m, hi * 100.0)
    };
    for corpus in &corpora {
        let _ = write!(out, "{corpus:<12}");
        for r in reports {
            match r.per_corpus.iter().find(|c| c.corpus_id == *corpus) {
                Some(c) => {
                    let _ = write!(
                        out,
                        " | {:<22}",
                        cell(c.ci_low, c.auc, c.ci_high, marker(&r.metric, corpus))
                    );
                }
                None => {
                    let _ = write!(out, " | {:^22}", "-");
                }
            }
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<12}", "Avg");
    for r in reports {
        let m = &r.macro_avg;
        let _ = write!(
            out,
            " | {:<22}",
            cell(m.ci_low, m.auc, m.ci_high, marker(&r.metric, "Avg"))
        );
    }
    out.push('\n');
    for (i, b) in baselines.iter().enumerate() {
        let _ = writeln!(
            out,
            "{}: significant improvement over {b} (p <= {level})",
            MARKERS[i % MARKERS.len()]
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_with(auc: f64) -> CorpusEvaluation {
        CorpusEvaluation {
            row: CorpusRow {
                corpus_id: "c".into(),
                auc,
                ci_low: auc,
                ci_high: auc,
                n: 1,
            },
            bootstrap: vec![auc],
        }
    }

    #[test]
    fn macro_of_published_all_column() {
        let aucs = [87.7, 74.5, 76.1, 81.1, 78.0, 79.3, 92.5, 89.4, 90.0];
        let evals: Vec<_> = aucs.iter().map(|a| eval_with(a / 100.0)).collect();
        let m = macro_average(&evals, 0.05).unwrap();
        assert_eq!(format!("{:.1}", m.auc * 100.0), "83.2");
    }

    #[test]
    fn macro_of_two() {
        let m = macro_average(&[eval_with(0.8), eval_with(0.9)], 0.05).unwrap();
        assert!((m.auc - 0.85).abs() < 1e-12);
    }

    #[test]
    fn single_corpus_macro_matches_corpus() {
        let scores: Vec<f64> = (0..40).map(|i| ((i * 7) % 13) as f64).collect();
        let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let cs = CorpusScores {
            corpus_id: "only".into(),
            uids: (0..40).map(|i| i.to_string()).collect(),
            scores,
            labels,
        };
        let r = evaluate_metric("m", &[cs], 300, 0.05, 4).unwrap();
        let c = &r.per_corpus[0];
        assert_eq!(
            (r.macro_avg.auc, r.macro_avg.ci_low, r.macro_avg.ci_high),
            (c.auc, c.ci_low, c.ci_high)
        );
        assert!(c.ci_low <= c.auc && c.auc <= c.ci_high);
    }

    #[test]
    fn alignment_reports_both_sides() {
        let gold = vec![FaithfulnessInstance {
            uid: "a".into(),
            corpus_id: "c".into(),
            grounding: "g".into(),
            generation: "h".into(),
            gold_label: 1,
            generator_model: None,
        }];
        let rows = vec![ScoreRow {
            uid: "b".into(),
            corpus: "c".into(),
            metric: "m".into(),
            score: 0.1,
        }];
        match align_with_gold(&rows, &gold) {
            Err(Error::Alignment { missing }) => assert_eq!(missing, vec!["a", "b"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_marks_significance() {
        let report = |m: &str| EvalReport {
            metric: m.into(),
            per_corpus: vec![CorpusRow {
                corpus_id: "q2".into(),
                auc: 0.9,
                ci_low: 0.88,
                ci_high: 0.92,
                n: 10,
            }],
            macro_avg: MacroRow {
                auc: 0.9,
                ci_low: 0.88,
                ci_high: 0.92,
            },
        };
        let sig = vec![SignificanceResult {
            metric_a: "all".into(),
            metric_b: "base".into(),
            corpus_id: "q2".into(),
            observed_diff: 0.1,
            p_value: 0.01,
            permutations: 99,
        }];
        let g = render_grid(&[report("base"), report("all")], &sig, 0.05);
        assert!(g.contains("90.0*"), "{g}");
        assert!(g.contains("*: significant improvement over base"));
    }
}
