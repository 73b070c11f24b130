use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use faithnli::data_io::{cache_get_or_score, write_score_file, FaithfulnessInstance, ScoreCache, ScoreRow};
use faithnli::nli_scoring::{score_dataset, BackendHandle, MetricConfig, ScoreRecord};

use crate::common::{build_backend, load_corpora, manifest_path, CorpusArg, CorpusFormat, Run};
use crate::config::{MetricArgs, Settings};

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Corpus to score, as ID=PATH or PATH. Repeatable.
    #[arg(long = "corpus", required = true)]
    pub corpora: Vec<CorpusArg>,
    #[arg(long, value_enum, default_value = "true")]
    pub format: CorpusFormat,
    /// Score file (uid, corpus, metric, score).
    #[arg(long)]
    pub output: PathBuf,
    /// Optional JSON-lines file with every record and its probability samples.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Metric name written to the score file; defaults to the metric id.
    #[arg(long)]
    pub metric_name: Option<String>,
    /// Allow the fact-checking corpora (FEVER, VitaminC).
    #[arg(long)]
    pub include_fever: bool,
    #[command(flatten)]
    pub metric: MetricArgs,
}

/// Scores every instance, through the cache when one is configured.
pub fn score_instances(
    instances: &[FaithfulnessInstance],
    cfg: &MetricConfig,
    handle: &BackendHandle,
    settings: &Settings,
) -> Result<Vec<faithnli::Result<ScoreRecord>>> {
    Ok(match &settings.cache {
        Some(dir) => cache_get_or_score(instances, cfg, handle, &ScoreCache::new(dir)?)?,
        None => score_dataset(instances, cfg, handle)?,
    })
}

pub fn run(args: &ScoreArgs, settings: &Settings) -> Result<()> {
    let cfg = settings.metric_with(&args.metric);
    cfg.validate()?;
    let metric = args.metric_name.clone().unwrap_or_else(|| cfg.metric_id());
    let mut run = Run::start(
        "score",
        settings,
        serde_json::json!({ "metric": cfg, "metric_name": metric }),
    )?;
    let instances = load_corpora(&args.corpora, args.format, args.include_fever)?;
    run.inputs(args.corpora.iter().map(|c| c.path.as_path()))?;

    let handle = build_backend(settings)?;
    log::info!(
        "scoring {} instances with {} ({} pass(es) each) on {}",
        instances.len(),
        metric,
        cfg.samples(),
        handle.checkpoint_id()
    );
    let results = score_instances(&instances, &cfg, &handle, settings)?;

    let mut rows = Vec::with_capacity(instances.len());
    let mut records = Vec::with_capacity(instances.len());
    let mut failures = 0usize;
    for (inst, res) in instances.iter().zip(results) {
        match res {
            Ok(rec) => {
                rows.push(ScoreRow {
                    uid: inst.uid.clone(),
                    corpus: inst.corpus_id.clone(),
                    metric: metric.clone(),
                    score: rec.score,
                });
                records.push(rec);
            }
            Err(e) => {
                failures += 1;
                log::error!("{e}");
            }
        }
    }
    if rows.is_empty() {
        bail!("no instance could be scored");
    }
    write_score_file(&args.output, &rows)?;
    run.output(&args.output)?;
    if let Some(path) = &args.records {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = std::io::BufWriter::new(file);
        for r in &records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        drop(w);
        run.output(path)?;
    }
    run.seed("mc_base_seed", cfg.base_seed);
    run.counter("backend_calls", handle.call_count());
    run.counter("instances_scored", rows.len() as u64);
    run.counter("instances_failed", failures as u64);
    run.finish(&manifest_path(&args.output))?;
    println!(
        "scored {} of {} instances with {metric}; {} backend calls; wrote {}",
        rows.len(),
        instances.len(),
        handle.call_count(),
        args.output.display()
    );
    if failures > 0 {
        bail!("{failures} instance(s) failed to score");
    }
    Ok(())
}
