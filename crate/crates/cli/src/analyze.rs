use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use faithnli::analysis::{
    begin_bias_report, cost_report, proxy_correlation_report, score_histogram, CorpusSummary, MeasuredCalls,
    DEFAULT_BINS,
};
use faithnli::data_io::{load_begin_v2, BeginV2Config};
use faithnli::evaluation_stats::align_with_gold;
use faithnli::nli_scoring::{score_dataset, MetricConfig, ScoreMode};

use crate::common::{
    build_backend, gold_for, group_by_metric, load_corpora, manifest_path, read_scores, CorpusArg, CorpusFormat, Run,
};
use crate::config::{MetricArgs, Settings};

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Kendall tau-b of first-person "I" occurrence against gold labels and metric scores.
    PronounCorr(PronounArgs),
    /// Score histograms split by gold class.
    Histogram(HistogramArgs),
    /// Generator-bias correlations on BEGIN-v2.
    BeginBias(BiasArgs),
    /// Parameter and model-call accounting.
    Cost(CostArgs),
}

#[derive(Debug, Args)]
pub struct GoldArgs {
    #[arg(long = "gold", required = true)]
    pub gold: Vec<CorpusArg>,
    #[arg(long, value_enum, default_value = "true")]
    pub format: CorpusFormat,
    #[arg(long)]
    pub include_fever: bool,
}

#[derive(Debug, Args)]
pub struct PronounArgs {
    #[command(flatten)]
    pub gold: GoldArgs,
    #[arg(long = "scores")]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    #[command(flatten)]
    pub gold: GoldArgs,
    #[arg(long)]
    pub scores: PathBuf,
    /// Metric to plot when the file holds several.
    #[arg(long)]
    pub metric: Option<String>,
    /// Score range; inferred from the metric name when omitted.
    #[arg(long)]
    pub mode: Option<ScoreMode>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    /// BEGIN-v2 file (tab-separated).
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "begin_v2")]
    pub corpus_id: String,
    #[arg(long)]
    pub knowledge_column: Option<String>,
    #[arg(long)]
    pub response_column: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub model_column: Option<String>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[command(flatten)]
    pub gold: GoldArgs,
    /// Questions generated per instance, for the Q2 estimate.
    #[arg(long, requires = "question_length")]
    pub questions: Option<f64>,
    /// Tokens per question, for the Q2 estimate.
    #[arg(long, requires = "questions")]
    pub question_length: Option<f64>,
    /// Score the corpora with and without MC dropout and record the calls.
    #[arg(long)]
    pub measure: bool,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub markdown: Option<PathBuf>,
}

pub fn run(cmd: &AnalyzeCommand, settings: &Settings) -> Result<()> {
    match cmd {
        AnalyzeCommand::PronounCorr(a) => pronoun(a, settings),
        AnalyzeCommand::Histogram(a) => histogram(a, settings),
        AnalyzeCommand::BeginBias(a) => bias(a, settings),
        AnalyzeCommand::Cost(a) => cost(a, settings),
    }
}

fn pronoun(args: &PronounArgs, settings: &Settings) -> Result<()> {
    let mut run = Run::start("analyze pronoun-corr", settings, serde_json::json!({}))?;
    let gold = load_corpora(&args.gold.gold, args.gold.format, args.gold.include_fever)?;
    run.inputs(args.gold.gold.iter().map(|c| c.path.as_path()))?;
    run.inputs(args.scores.iter().map(PathBuf::as_path))?;
    let metrics = group_by_metric(read_scores(&args.scores)?);
    let table = proxy_correlation_report(&gold, &metrics)?;
    table.write_csv(&args.output)?;
    run.output(&args.output)?;
    run.finish(&manifest_path(&args.output))?;
    print!("{:<16}", "Method");
    for c in &table.corpora {
        print!(" {c:>10}");
    }
    println!();
    for row in &table.rows {
        print!("{:<16}", row.method);
        for cell in &row.cells {
            match cell.tau() {
                Some(t) => print!(" {t:>10.2}"),
                None => print!(" {:>10}", "NA"),
            }
        }
        println!();
    }
    Ok(())
}

fn infer_mode(metric: &str) -> Option<ScoreMode> {
    if metric.starts_with("e-c") {
        Some(ScoreMode::EMinusC)
    } else if metric == "e" || metric.starts_with("e+") {
        Some(ScoreMode::EntailmentOnly)
    } else {
        None
    }
}

fn histogram(args: &HistogramArgs, settings: &Settings) -> Result<()> {
    let mut run = Run::start(
        "analyze histogram",
        settings,
        serde_json::json!({ "bins": args.bins, "metric": args.metric, "mode": args.mode }),
    )?;
    let gold = load_corpora(&args.gold.gold, args.gold.format, args.gold.include_fever)?;
    run.inputs(args.gold.gold.iter().map(|c| c.path.as_path()))?;
    run.input(&args.scores)?;
    let metrics = group_by_metric(read_scores(std::slice::from_ref(&args.scores))?);
    let (name, rows) = match &args.metric {
        Some(m) => metrics
            .into_iter()
            .find(|(n, _)| n == m)
            .with_context(|| format!("metric `{m}` not in {}", args.scores.display()))?,
        None => {
            if metrics.len() > 1 {
                bail!(
                    "{} holds several metrics; pick one with --metric",
                    args.scores.display()
                );
            }
            metrics.into_iter().next().context("empty score file")?
        }
    };
    let mode = args
        .mode
        .or_else(|| infer_mode(&name))
        .with_context(|| format!("cannot infer the score range of `{name}`; pass --mode"))?;
    let corpora = align_with_gold(&rows, &gold_for(&rows, &gold))?;
    let scores: Vec<f64> = corpora.iter().flat_map(|c| c.scores.iter().copied()).collect();
    let labels: Vec<u8> = corpora.iter().flat_map(|c| c.labels.iter().copied()).collect();
    let h = score_histogram(&scores, &labels, mode, args.bins)?;
    h.write_csv(&args.output)?;
    run.output(&args.output)?;
    if let Some(svg) = &args.svg {
        std::fs::write(svg, h.to_svg(&format!("{name} ({mode})")))?;
        run.output(svg)?;
    }
    run.finish(&manifest_path(&args.output))?;
    for b in 0..h.bins() {
        println!(
            "[{:>5.2}, {:>5.2}) faithful {:>6} unfaithful {:>6}",
            h.bin_edges[b],
            h.bin_edges[b + 1],
            h.counts_faithful[b],
            h.counts_unfaithful[b]
        );
    }
    Ok(())
}

fn bias(args: &BiasArgs, settings: &Settings) -> Result<()> {
    let mut run = Run::start(
        "analyze begin-bias",
        settings,
        serde_json::json!({ "corpus_id": args.corpus_id }),
    )?;
    let mut cfg = BeginV2Config::default();
    let set = |slot: &mut String, v: &Option<String>| {
        if let Some(v) = v {
            slot.clone_from(v);
        }
    };
    set(&mut cfg.knowledge_column, &args.knowledge_column);
    set(&mut cfg.response_column, &args.response_column);
    set(&mut cfg.label_column, &args.label_column);
    set(&mut cfg.model_column, &args.model_column);
    let instances = load_begin_v2(&args.corpus, &args.corpus_id, &cfg)?;
    run.input(&args.corpus)?;
    let report = begin_bias_report(&instances)?;
    report.write_csv(&args.output)?;
    run.output(&args.output)?;
    run.finish(&manifest_path(&args.output))?;
    for r in &report.rows {
        let p = r.p_value.map_or("NA".into(), |p| format!("{p:.2e}"));
        println!(
            "{:<12} vs {:<20} tau {:>6.2}  n {:>6}  p {p}",
            r.var_x, r.var_y, r.tau, r.n
        );
    }
    for s in &report.skipped {
        println!("{:<12} vs {:<20} skipped: {}", s.var_x, s.var_y, s.reason);
    }
    Ok(())
}

fn cost(args: &CostArgs, settings: &Settings) -> Result<()> {
    let cfg = settings.metric_with(&args.metric);
    let mut run = Run::start(
        "analyze cost",
        settings,
        serde_json::json!({ "measure": args.measure, "metric": cfg }),
    )?;
    let gold = load_corpora(&args.gold.gold, args.gold.format, args.gold.include_fever)?;
    run.inputs(args.gold.gold.iter().map(|c| c.path.as_path()))?;
    let mut summary = CorpusSummary::from_instances(&gold)?;
    if let (Some(q), Some(l)) = (args.questions, args.question_length) {
        summary = summary.with_questions(q, l);
    }
    let mut measured = MeasuredCalls::default();
    if args.measure {
        let handle = build_backend(settings)?;
        let full = MetricConfig {
            mc_enabled: true,
            ..cfg.clone()
        };
        let single = MetricConfig {
            mc_enabled: false,
            ..cfg.clone()
        };
        let before = handle.call_count();
        score_dataset(&gold, &full, &handle)?;
        let mid = handle.call_count();
        score_dataset(&gold, &single, &handle)?;
        measured = MeasuredCalls {
            all: Some(mid - before),
            no_mc: Some(handle.call_count() - mid),
        };
        run.counter("calls_all", mid - before);
        run.counter("calls_no_mc", handle.call_count() - mid);
    }
    let report = cost_report(
        &MetricConfig {
            mc_enabled: true,
            ..cfg
        },
        summary,
        measured,
    );
    report.write_csv(&args.output)?;
    run.output(&args.output)?;
    let md = report.to_markdown();
    if let Some(path) = &args.markdown {
        std::fs::write(path, &md)?;
        run.output(path)?;
    }
    run.finish(&manifest_path(&args.output))?;
    print!("{md}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_from_metric_ids() {
        assert_eq!(infer_mode("e-c+mc15"), Some(ScoreMode::EMinusC));
        assert_eq!(infer_mode("e"), Some(ScoreMode::EntailmentOnly));
        assert_eq!(infer_mode("e+mc15"), Some(ScoreMode::EntailmentOnly));
        assert_eq!(infer_mode("q2"), None);
    }
}
