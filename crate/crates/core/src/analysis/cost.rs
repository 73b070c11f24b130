use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_io::FaithfulnessInstance;
use crate::nli_scoring::MetricConfig;
use crate::{Error, Result};

/// Per-instance averages used by the formula-based rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub instances: u64,
    pub input_sentences: f64,
    pub output_sentences: f64,
    /// Questions generated per instance.
    pub questions: Option<f64>,
    /// Tokens per generated question.
    pub question_length: Option<f64>,
}

/// Counts sentences by terminal punctuation followed by whitespace or end
/// of text. Text without any terminator counts as one sentence.
pub fn count_sentences(text: &str) -> usize {
    let chars: Vec<char> = text.trim().chars().collect();
    if chars.is_empty() {
        return 0;
    }
    let mut n = 0;
    let mut i = 0;
    while i < chars.len() {
        if matches!(chars[i], '.' | '!' | '?') {
            while i + 1 < chars.len() && matches!(chars[i + 1], '.' | '!' | '?' | '"' | '\'' | ')') {
                i += 1;
            }
            if i + 1 == chars.len() || chars[i + 1].is_whitespace() {
                n += 1;
            }
        }
        i += 1;
    }
    if !matches!(chars.last(), Some('.' | '!' | '?' | '"' | '\'' | ')')) || n == 0 {
        n += 1;
    }
    n
}

impl CorpusSummary {
    pub fn from_instances(instances: &[FaithfulnessInstance]) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::usage("cost summary over no instances"));
        }
        let n = instances.len() as f64;
        let mean = |f: &dyn Fn(&FaithfulnessInstance) -> usize| instances.iter().map(|i| f(i) as f64).sum::<f64>() / n;
        Ok(CorpusSummary {
            instances: instances.len() as u64,
            input_sentences: mean(&|i| count_sentences(&i.grounding)),
            output_sentences: mean(&|i| count_sentences(&i.generation)),
            questions: None,
            question_length: None,
        })
    }

    pub fn with_questions(mut self, questions: f64, question_length: f64) -> Self {
        self.questions = Some(questions);
        self.question_length = Some(question_length);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub metric: String,
    /// Parameter count in millions, as an expression when several models
    /// are involved.
    pub parameter_count: String,
    pub calls_expression: String,
    pub estimated_calls_per_instance: Option<f64>,
    /// Backend counter delta observed for our own metrics.
    pub measured_calls: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub summary: CorpusSummary,
    pub rows: Vec<CostRow>,
    pub snt_convention: String,
}

pub const OUR_PARAMS: &str = "350";
pub const SUMMAC_PARAMS: &str = "355";
pub const T5_PARAMS: &str = "11,000";
pub const Q2_PARAMS: &str = "220 + 355 + 355";
pub const SNT_CONVENTION: &str = "#snt x #snt = input sentences x output sentences";

/// Measured counter deltas of the two runs of our metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MeasuredCalls {
    pub all: Option<u64>,
    pub no_mc: Option<u64>,
}

pub fn cost_report(cfg: &MetricConfig, summary: CorpusSummary, measured: MeasuredCalls) -> CostReport {
    let k = if cfg.mc_enabled { cfg.k } else { 1 };
    let q2 = match (summary.questions, summary.question_length) {
        (Some(q), Some(l)) => Some(q * (l + 2.0)),
        _ => None,
    };
    let rows = vec![
        CostRow {
            metric: "SummacZS".into(),
            parameter_count: SUMMAC_PARAMS.into(),
            calls_expression: "#snt x #snt".into(),
            estimated_calls_per_instance: Some(summary.input_sentences * summary.output_sentences),
            measured_calls: None,
        },
        CostRow {
            metric: "T5 ANLI".into(),
            parameter_count: T5_PARAMS.into(),
            calls_expression: "1".into(),
            estimated_calls_per_instance: Some(1.0),
            measured_calls: None,
        },
        CostRow {
            metric: "Q2".into(),
            parameter_count: Q2_PARAMS.into(),
            calls_expression: "#Q x (Ql + 2)".into(),
            estimated_calls_per_instance: q2,
            measured_calls: None,
        },
        CostRow {
            metric: "-MC".into(),
            parameter_count: OUR_PARAMS.into(),
            calls_expression: "1".into(),
            estimated_calls_per_instance: Some(1.0),
            measured_calls: measured.no_mc,
        },
        CostRow {
            metric: "All".into(),
            parameter_count: OUR_PARAMS.into(),
            calls_expression: k.to_string(),
            estimated_calls_per_instance: Some(k as f64),
            measured_calls: measured.all,
        },
    ];
    CostReport {
        summary,
        rows,
        snt_convention: SNT_CONVENTION.into(),
    }
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".into(), |v| v.to_string())
}

impl CostReport {
    pub fn row(&self, metric: &str) -> Option<&CostRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "metric",
            "params_millions",
            "calls",
            "estimated_calls_per_instance",
            "measured_calls",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.metric.clone(),
                r.parameter_count.clone(),
                r.calls_expression.clone(),
                fmt_opt(r.estimated_calls_per_instance),
                fmt_opt(r.measured_calls),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Method | Param x 10^6 | Model calls | Est. calls/instance | Measured calls |\n");
        s.push_str("|---|---|---|---|---|\n");
        for r in &self.rows {
            let est = r
                .estimated_calls_per_instance
                .map_or("NA".into(), |v| format!("{v:.2}"));
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                r.metric,
                r.parameter_count,
                r.calls_expression,
                est,
                fmt_opt(r.measured_calls)
            );
        }
        let _ = write!(
            s,
            "\n{} instances; convention: {}\n",
            self.summary.instances, self.snt_convention
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(input: f64, output: f64) -> CorpusSummary {
        CorpusSummary {
            instances: 100,
            input_sentences: input,
            output_sentences: output,
            questions: None,
            question_length: None,
        }
    }

    #[test]
    fn summac_uses_input_times_output() {
        let r = cost_report(&MetricConfig::default(), summary(10.0, 3.0), MeasuredCalls::default());
        assert_eq!(r.row("SummacZS").unwrap().estimated_calls_per_instance, Some(30.0));
        assert_eq!(r.row("All").unwrap().calls_expression, "15");
        assert_eq!(r.row("-MC").unwrap().estimated_calls_per_instance, Some(1.0));
        assert_eq!(r.row("Q2").unwrap().estimated_calls_per_instance, None);
    }

    #[test]
    fn q2_formula_and_measured_counts() {
        let s = summary(4.0, 2.0).with_questions(5.0, 8.0);
        let m = MeasuredCalls {
            all: Some(1500),
            no_mc: Some(100),
        };
        let r = cost_report(&MetricConfig::default(), s, m);
        assert_eq!(r.row("Q2").unwrap().estimated_calls_per_instance, Some(50.0));
        assert_eq!(r.row("All").unwrap().measured_calls, Some(1500));
        let md = r.to_markdown();
        assert!(md.contains("| All | 350 | 15 | 15.00 | 1500 |"));
        assert!(md.contains(SNT_CONVENTION));
    }

    #[test]
    fn sentence_counting() {
        assert_eq!(count_sentences(""), 0);
        assert_eq!(count_sentences("no terminator"), 1);
        assert_eq!(count_sentences("One. Two! Three?"), 3);
        assert_eq!(count_sentences("Pi is 3.14 roughly. Yes."), 2);
        assert_eq!(count_sentences("He said \"stop.\" Then left"), 2);
        assert_eq!(count_sentences("Wait... what?"), 2);
    }
}
