use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use faithnli::adaptation::{
    build_augmented_corpus, run_robustness_protocol, sample_phrase_subset, summarize_repeats, NliInstance, PhraseSet,
    RepeatSummary,
};
use faithnli::data_io::{load_anli_jsonl, read_nli_jsonl, write_nli_jsonl};
use faithnli::rng::derive_seed;

use crate::common::{ensure_dir, manifest_path, Run};
use crate::config::Settings;

#[derive(Debug, Args)]
pub struct NliInputArgs {
    /// NLI corpus in the tool's JSON-lines format. Repeatable.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    /// Raw ANLI split as ROUND=PATH (e.g. 1=train_r1.jsonl). Repeatable.
    #[arg(long = "anli")]
    pub anli: Vec<String>,
    /// `default` or a phrase file with category headers.
    #[arg(long, default_value = "default")]
    pub phrases: String,
}

impl NliInputArgs {
    fn paths(&self) -> Result<Vec<(Option<u8>, PathBuf)>> {
        let mut out: Vec<(Option<u8>, PathBuf)> = self.inputs.iter().map(|p| (None, p.clone())).collect();
        for spec in &self.anli {
            let (round, path) = spec
                .split_once('=')
                .with_context(|| format!("expected ROUND=PATH, got `{spec}`"))?;
            let round: u8 = round
                .trim_start_matches(['r', 'R'])
                .parse()
                .with_context(|| format!("bad round in `{spec}`"))?;
            out.push((Some(round), path.into()));
        }
        if out.is_empty() {
            bail!("no NLI input given (use --input or --anli)");
        }
        Ok(out)
    }

    fn load(&self, run: &mut Run) -> Result<Vec<NliInstance>> {
        let mut corpus = Vec::new();
        for (round, path) in self.paths()? {
            let part = match round {
                Some(r) => load_anli_jsonl(&path, r),
                None => read_nli_jsonl(&path),
            }
            .with_context(|| format!("loading {}", path.display()))?;
            run.input(&path)?;
            corpus.extend(part);
        }
        Ok(corpus)
    }

    fn phrase_set(&self, run: &mut Run) -> Result<PhraseSet> {
        if self.phrases == "default" {
            return Ok(PhraseSet::default());
        }
        let path = Path::new(&self.phrases);
        run.input(path)?;
        Ok(PhraseSet::load(path)?)
    }
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub input: NliInputArgs,
    /// Use a random subset of this many phrases.
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long)]
    pub output: PathBuf,
}

pub fn run_augment(args: &AugmentArgs, settings: &Settings) -> Result<()> {
    let mut run = Run::start(
        "augment",
        settings,
        serde_json::json!({ "phrases": args.input.phrases, "subset": args.subset }),
    )?;
    let corpus = args.input.load(&mut run)?;
    let mut phrases = args.input.phrase_set(&mut run)?;
    if let Some(m) = args.subset {
        let seed = derive_seed(settings.seed, "phrase-subset");
        phrases = sample_phrase_subset(&phrases, m, seed)?;
        run.seed("phrase_subset", seed);
    }
    let out = build_augmented_corpus(&corpus, &phrases, settings.seed)?;
    write_nli_jsonl(&args.output, &out)?;
    run.output(&args.output)?;
    run.counter("original", corpus.len() as u64);
    run.counter("total", out.len() as u64);
    run.finish(&manifest_path(&args.output))?;
    println!(
        "{} original + {} augmented = {} instances using {} phrases; wrote {}",
        corpus.len(),
        out.len() - corpus.len(),
        out.len(),
        phrases.len(),
        args.output.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub input: NliInputArgs,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Phrases sampled per repeat.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    /// Per-repeat evaluation reports (report.csv); when given, the command
    /// aggregates them instead of building corpora.
    #[arg(long = "reports")]
    pub reports: Vec<PathBuf>,
    /// Metric to read from the reports; defaults to the first one found.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn run_robustness(args: &RobustnessArgs, settings: &Settings) -> Result<()> {
    ensure_dir(&args.out_dir)?;
    if !args.reports.is_empty() {
        return aggregate_reports(args, settings);
    }
    let mut run = Run::start(
        "robustness",
        settings,
        serde_json::json!({ "repeats": args.repeats, "m": args.m, "phrases": args.input.phrases }),
    )?;
    let corpus = args.input.load(&mut run)?;
    let phrases = args.input.phrase_set(&mut run)?;
    let seeds: Vec<u64> = (0..args.repeats)
        .map(|i| derive_seed(settings.seed, &format!("repeat-{i}")))
        .collect();
    for (i, s) in seeds.iter().enumerate() {
        run.seed(&format!("repeat_{i:02}"), *s);
    }
    let manifest = run_robustness_protocol(&corpus, &phrases, args.repeats, args.m, &seeds, &args.out_dir)?;
    for r in &manifest.runs {
        run.output(&r.output_path)?;
        let joined: Vec<&str> = r.phrases.iter().map(|p| p.phrase.as_str()).collect();
        println!("repeat {:02}: {}", r.repeat, joined.join(" | "));
    }
    run.output(&args.out_dir.join("robustness_manifest.json"))?;
    run.finish(&args.out_dir.join("manifest.json"))?;
    println!(
        "{} corpora written under {}",
        manifest.runs.len(),
        args.out_dir.display()
    );
    Ok(())
}

/// (corpus, auc) pairs of one metric from a report CSV, macro row excluded.
fn read_report(path: &Path, metric: Option<&str>) -> Result<(String, Vec<(String, f64)>)> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut chosen: Option<String> = metric.map(str::to_owned);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let (m, corpus, auc) = (&rec[0], &rec[1], &rec[2]);
        let target = chosen.get_or_insert_with(|| m.to_owned());
        if m != target || corpus == "Avg" {
            continue;
        }
        let auc: f64 = auc
            .parse()
            .with_context(|| format!("{}: bad auc `{auc}`", path.display()))?;
        rows.push((corpus.to_owned(), auc));
    }
    let chosen = chosen.with_context(|| format!("{} is empty", path.display()))?;
    if rows.is_empty() {
        bail!("{} has no rows for metric `{chosen}`", path.display());
    }
    Ok((chosen, rows))
}

pub fn render_summary(rows: &[RepeatSummary]) -> String {
    let mut s = String::from("| Dataset | Avg. | Std. | Min | Max |\n|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {:.1} | {:.1} | {:.1} | {:.1} |",
            r.corpus,
            100.0 * r.avg,
            100.0 * r.std,
            100.0 * r.min,
            100.0 * r.max
        );
    }
    s
}

fn aggregate_reports(args: &RobustnessArgs, settings: &Settings) -> Result<()> {
    let mut run = Run::start(
        "robustness",
        settings,
        serde_json::json!({ "reports": args.reports, "metric": args.metric }),
    )?;
    let mut per_repeat = Vec::new();
    let mut metric = args.metric.clone();
    for p in &args.reports {
        let (m, rows) = read_report(p, metric.as_deref())?;
        metric.get_or_insert(m);
        run.input(p)?;
        per_repeat.push(rows);
    }
    let summary = summarize_repeats(&per_repeat)?;
    let csv_path = args.out_dir.join("robustness_summary.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for r in &summary {
        w.serialize(r)?;
    }
    w.flush()?;
    drop(w);
    run.output(&csv_path)?;
    let md = render_summary(&summary);
    let md_path = args.out_dir.join("robustness_summary.md");
    std::fs::write(&md_path, &md)?;
    run.output(&md_path)?;
    run.finish(&args.out_dir.join("manifest.json"))?;
    print!("{md}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_reader_skips_macro_row_and_other_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(
            &p,
            "metric,corpus,auc,ci_low,ci_high,n\nall,q2,0.8,0.7,0.9,10\nall,Avg,0.8,0.7,0.9,10\nbase,q2,0.5,0.4,0.6,10\n",
        )
        .unwrap();
        let (m, rows) = read_report(&p, None).unwrap();
        assert_eq!(m, "all");
        assert_eq!(rows, vec![("q2".to_owned(), 0.8)]);
        let (_, rows) = read_report(&p, Some("base")).unwrap();
        assert_eq!(rows, vec![("q2".to_owned(), 0.5)]);
    }
}
