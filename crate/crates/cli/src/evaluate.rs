use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use faithnli::evaluation_stats::{
    ablation_diff, align_with_gold, corpus_seed, ensemble_scores, evaluate_metric, paired_randomization_test,
    render_grid, write_ablation_csv, write_report_csv, write_significance_csv, CombinationRule, CorpusScores,
    EvalReport, MinMaxMean, RawMean, SignificanceResult,
};
use faithnli::rng::derive_seed;

use crate::common::{ensure_dir, gold_for, group_by_metric, load_corpora, read_scores, CorpusArg, CorpusFormat, Run};
use crate::config::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleChoice {
    /// Min-max normalise each member per corpus, then average.
    Minmax,
    /// Average raw scores.
    Raw,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Score files; a file may hold several metrics.
    #[arg(long = "scores", required = true)]
    pub scores: Vec<PathBuf>,
    /// Gold corpus as ID=PATH or PATH. Repeatable.
    #[arg(long = "gold", required = true)]
    pub gold: Vec<CorpusArg>,
    #[arg(long, value_enum, default_value = "true")]
    pub format: CorpusFormat,
    #[arg(long)]
    pub include_fever: bool,
    /// Metric every other metric is tested against. Repeatable.
    #[arg(long = "baseline")]
    pub baselines: Vec<String>,
    /// Extra metric NAME=m1,m2,... combining existing metrics.
    #[arg(long = "ensemble")]
    pub ensembles: Vec<String>,
    #[arg(long, value_enum, default_value = "minmax")]
    pub ensemble_rule: RuleChoice,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Significance level of the grid markers.
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Score file of the modified metric.
    #[arg(long)]
    pub variant: PathBuf,
    /// Score file of the reference metric.
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long = "gold", required = true)]
    pub gold: Vec<CorpusArg>,
    #[arg(long, value_enum, default_value = "true")]
    pub format: CorpusFormat,
    #[arg(long)]
    pub include_fever: bool,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Label of the variant in the output; defaults to its metric name.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub output: PathBuf,
}

fn parse_ensemble(spec: &str) -> Result<(String, Vec<String>)> {
    let (name, members) = spec
        .split_once('=')
        .with_context(|| format!("expected NAME=m1,m2 in `{spec}`"))?;
    let members: Vec<String> = members
        .split(',')
        .map(|m| m.trim().to_owned())
        .filter(|m| !m.is_empty())
        .collect();
    if name.is_empty() || members.len() < 2 {
        bail!("ensemble `{spec}` needs a name and at least two members");
    }
    Ok((name.to_owned(), members))
}

pub fn run_evaluate(args: &EvaluateArgs, settings: &Settings) -> Result<()> {
    let b = args.bootstrap.unwrap_or(settings.bootstrap);
    let alpha = args.alpha.unwrap_or(settings.alpha);
    let perms = args.permutations.unwrap_or(settings.permutations);
    let mut run = Run::start(
        "evaluate",
        settings,
        serde_json::json!({
            "bootstrap": b, "alpha": alpha, "permutations": perms,
            "baselines": args.baselines, "ensembles": args.ensembles,
            "ensemble_rule": format!("{:?}", args.ensemble_rule),
        }),
    )?;
    let gold = load_corpora(&args.gold, args.format, args.include_fever)?;
    run.inputs(args.gold.iter().map(|c| c.path.as_path()))?;
    run.inputs(args.scores.iter().map(PathBuf::as_path))?;
    let mut metrics = group_by_metric(read_scores(&args.scores)?);

    let rule: Box<dyn CombinationRule> = match args.ensemble_rule {
        RuleChoice::Minmax => Box::new(MinMaxMean),
        RuleChoice::Raw => Box::new(RawMean),
    };
    for spec in &args.ensembles {
        let (name, members) = parse_ensemble(spec)?;
        let columns = members
            .iter()
            .map(|m| {
                metrics
                    .iter()
                    .find(|(n, _)| n == m)
                    .map(|(_, rows)| rows.clone())
                    .with_context(|| format!("ensemble member `{m}` not among the score files"))
            })
            .collect::<Result<Vec<_>>>()?;
        let e = ensemble_scores(&name, &columns, rule.as_ref())?;
        metrics.push((name, e.rows));
    }
    for base in &args.baselines {
        if !metrics.iter().any(|(m, _)| m == base) {
            bail!("baseline `{base}` not among the metrics");
        }
    }

    let mut aligned: Vec<(String, Vec<CorpusScores>)> = Vec::new();
    let mut reports: Vec<EvalReport> = Vec::new();
    for (name, rows) in &metrics {
        let corpora = align_with_gold(rows, &gold_for(rows, &gold)).with_context(|| format!("metric `{name}`"))?;
        reports.push(evaluate_metric(name, &corpora, b, alpha, settings.seed)?);
        aligned.push((name.clone(), corpora));
    }

    let mut significance: Vec<SignificanceResult> = Vec::new();
    for base in &args.baselines {
        let (_, base_corpora) = aligned.iter().find(|(m, _)| m == base).expect("checked above");
        for (name, corpora) in aligned.iter().filter(|(m, _)| m != base) {
            for c in corpora {
                let Some(bc) = base_corpora.iter().find(|bc| bc.corpus_id == c.corpus_id) else {
                    continue;
                };
                if bc.uids != c.uids {
                    bail!(
                        "metrics `{name}` and `{base}` cover different instances of {}",
                        c.corpus_id
                    );
                }
                let seed = derive_seed(settings.seed, &format!("randomization/{}", c.corpus_id));
                significance.push(paired_randomization_test(
                    name,
                    base,
                    &c.corpus_id,
                    &c.scores,
                    &bc.scores,
                    &c.labels,
                    perms,
                    seed,
                )?);
            }
        }
    }

    ensure_dir(&args.output_dir)?;
    let report_csv = args.output_dir.join("report.csv");
    write_report_csv(&report_csv, &reports)?;
    run.output(&report_csv)?;
    let report_json = args.output_dir.join("report.json");
    std::fs::write(&report_json, serde_json::to_string_pretty(&reports)? + "\n")?;
    run.output(&report_json)?;
    if !significance.is_empty() {
        let sig_csv = args.output_dir.join("significance.csv");
        write_significance_csv(&sig_csv, &significance)?;
        run.output(&sig_csv)?;
    }
    let grid = render_grid(&reports, &significance, args.level);
    let grid_path = args.output_dir.join("grid.txt");
    std::fs::write(&grid_path, &grid)?;
    run.output(&grid_path)?;
    run.finish(&args.output_dir.join("manifest.json"))?;
    print!("{grid}");
    Ok(())
}

pub fn run_ablate(args: &AblateArgs, settings: &Settings) -> Result<()> {
    let b = args.bootstrap.unwrap_or(settings.bootstrap);
    let alpha = args.alpha.unwrap_or(settings.alpha);
    let mut run = Run::start(
        "ablate",
        settings,
        serde_json::json!({ "bootstrap": b, "alpha": alpha }),
    )?;
    let gold = load_corpora(&args.gold, args.format, args.include_fever)?;
    run.inputs(args.gold.iter().map(|c| c.path.as_path()))?;
    run.inputs([args.variant.as_path(), args.base.as_path()])?;

    let variant = read_scores(std::slice::from_ref(&args.variant))?;
    let base = read_scores(std::slice::from_ref(&args.base))?;
    let name = args
        .name
        .clone()
        .or_else(|| variant.first().map(|r| r.metric.clone()))
        .unwrap_or_else(|| "variant".into());
    let v = align_with_gold(&variant, &gold_for(&variant, &gold)).context("variant scores")?;
    let r = align_with_gold(&base, &gold_for(&base, &gold)).context("base scores")?;
    let mut diffs = Vec::new();
    for vc in &v {
        let bc = r
            .iter()
            .find(|c| c.corpus_id == vc.corpus_id)
            .with_context(|| format!("base scores lack corpus {}", vc.corpus_id))?;
        if bc.uids != vc.uids {
            bail!("variant and base cover different instances of {}", vc.corpus_id);
        }
        let seed = corpus_seed(settings.seed, &vc.corpus_id);
        diffs.push(ablation_diff(
            &vc.corpus_id,
            &vc.scores,
            &bc.scores,
            &vc.labels,
            b,
            alpha,
            seed,
        )?);
    }
    write_ablation_csv(&args.output, &name, &diffs)?;
    run.output(&args.output)?;
    run.finish(&crate::common::manifest_path(&args.output))?;
    println!("{:<12} {:>8} {:>16}", "corpus", "delta", "CI");
    for d in &diffs {
        println!(
            "{:<12} {:>+8.1} [{:>+6.1}, {:>+6.1}]",
            d.corpus_id,
            100.0 * d.delta_auc,
            100.0 * d.ci_low,
            100.0 * d.ci_high
        );
    }
    Ok(())
}
