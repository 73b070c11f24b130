use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use faithnli::adaptation::{
    finetune, sweep_learning_rates, CurveTrainer, FinetuneOutcome, SubprocessTrainer, TrainingBackend,
    PUBLISHED_LEARNING_RATES,
};

use crate::common::{ensure_dir, Run};
use crate::config::Settings;

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Augmented training corpus (JSON lines).
    #[arg(long)]
    pub train: PathBuf,
    /// Augmented validation corpus used for checkpoint selection.
    #[arg(long)]
    pub val: PathBuf,
    /// Initial checkpoint; defaults to the scoring checkpoint.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long, conflicts_with = "sweep")]
    pub lr: Option<f64>,
    /// Try each learning rate and keep the lowest validation loss.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub sweep: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub interval: Option<u64>,
    /// Python training worker.
    #[arg(long)]
    pub train_worker: Option<PathBuf>,
    /// Replace training with synthetic loss curves to check the pipeline.
    #[arg(long)]
    pub dry_run: bool,
}

fn print_outcome(o: &FinetuneOutcome) {
    println!("lr {:e}:", o.config.learning_rate);
    for h in &o.history {
        println!(
            "  step {:>6}  train {:.4}  val {:.4}  {}",
            h.step, h.train_loss, h.val_loss, h.checkpoint
        );
    }
    if let Some(d) = &o.diverged {
        println!("  diverged: {d}");
    }
}

pub fn run(args: &FinetuneArgs, settings: &Settings) -> Result<()> {
    let mut cfg = settings.train.clone();
    if let Some(lr) = args.lr {
        cfg.learning_rate = lr;
    }
    if let Some(s) = args.steps {
        cfg.total_steps = s;
    }
    if let Some(i) = args.interval {
        cfg.checkpoint_interval = i;
    }
    cfg.validate()?;
    let init = args.init.clone().unwrap_or_else(|| settings.checkpoint.clone());
    let rates: Option<Vec<f64>> = args.sweep.as_ref().map(|r| {
        if r.is_empty() {
            PUBLISHED_LEARNING_RATES.to_vec()
        } else {
            r.clone()
        }
    });
    let mut run = Run::start(
        "finetune",
        settings,
        serde_json::json!({ "train": cfg, "init": init, "sweep": rates, "dry_run": args.dry_run }),
    )?;
    run.inputs([args.train.as_path(), args.val.as_path()])?;
    ensure_dir(&args.run_dir)?;

    let mut backend: Box<dyn TrainingBackend> = if args.dry_run {
        Box::new(CurveTrainer::overfitting(cfg.total_steps / 2))
    } else {
        Box::new(SubprocessTrainer::new(
            args.train_worker
                .clone()
                .unwrap_or_else(|| settings.train_worker.clone()),
        ))
    };
    let best = match &rates {
        Some(rates) => {
            let (i, outcomes) = sweep_learning_rates(
                &init,
                &args.train,
                &args.val,
                &cfg,
                rates,
                backend.as_mut(),
                &args.run_dir,
            )?;
            outcomes.iter().for_each(print_outcome);
            for o in &outcomes {
                run.output(
                    &args
                        .run_dir
                        .join(format!("lr_{:e}", o.config.learning_rate))
                        .join("finetune_run.json"),
                )?;
            }
            outcomes.into_iter().nth(i).expect("index from sweep")
        }
        None => {
            let o = finetune(&init, &args.train, &args.val, &cfg, backend.as_mut(), &args.run_dir)?;
            print_outcome(&o);
            run.output(&args.run_dir.join("finetune_run.json"))?;
            o
        }
    };
    run.finish(&args.run_dir.join("manifest.json"))?;
    println!(
        "selected {} (lr {:e}, step {}, val loss {})",
        best.best_checkpoint,
        best.config.learning_rate,
        best.best_step.map_or("-".into(), |s| s.to_string()),
        best.best_val_loss.map_or("-".into(), |l| format!("{l:.4}"))
    );
    Ok(())
}
