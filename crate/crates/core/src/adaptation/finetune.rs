//! Fine-tuning driver with checkpoint selection on augmented validation
//! loss. The optimiser itself runs behind [`TrainingBackend`].

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Error, Result};

/// Learning rates reported for the original sweep. The two larger values
/// are kept verbatim even though they look implausible for fine-tuning.
pub const PUBLISHED_LEARNING_RATES: [f64; 3] = [5e-6, 5e-2, 5e-1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    MinAugmentedValLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub warmup_ratio: f64,
    pub weight_decay: f64,
    pub effective_batch_size: u32,
    pub learning_rate: f64,
    pub total_steps: u64,
    pub checkpoint_interval: u64,
    pub selection: SelectionRule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            warmup_ratio: 0.06,
            weight_decay: 0.01,
            effective_batch_size: 64,
            learning_rate: 5e-6,
            total_steps: 2000,
            checkpoint_interval: 500,
            selection: SelectionRule::MinAugmentedValLoss,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// `total_steps == 0` is accepted as a no-op run.
    pub fn validate(&self) -> Result<()> {
        let positive = self.warmup_ratio > 0.0
            && self.weight_decay > 0.0
            && self.effective_batch_size > 0
            && self.learning_rate > 0.0
            && self.learning_rate.is_finite();
        if !positive {
            return Err(Error::usage("training hyperparameters must be positive"));
        }
        if self.total_steps == 0 {
            return Ok(());
        }
        if self.checkpoint_interval == 0 || !self.total_steps.is_multiple_of(self.checkpoint_interval) {
            return Err(Error::usage(format!(
                "checkpoint interval {} must divide total steps {}",
                self.checkpoint_interval, self.total_steps
            )));
        }
        Ok(())
    }

    pub fn warmup_steps(&self) -> u64 {
        (self.warmup_ratio * self.total_steps as f64).ceil() as u64
    }

    /// Linear warmup to `learning_rate`, then linear decay to zero.
    pub fn lr_at(&self, step: u64) -> f64 {
        let warm = self.warmup_steps();
        if step < warm {
            self.learning_rate * step as f64 / warm as f64
        } else if self.total_steps <= warm {
            self.learning_rate
        } else {
            let left = self.total_steps.saturating_sub(step) as f64;
            self.learning_rate * left / (self.total_steps - warm) as f64
        }
    }
}

pub trait TrainingBackend {
    fn begin(
        &mut self,
        init_checkpoint: &str,
        train: &Path,
        val: &Path,
        cfg: &TrainConfig,
        run_dir: &Path,
    ) -> Result<()>;

    /// Advance to global step `step`; returns the latest training loss.
    fn train_until(&mut self, step: u64) -> Result<f64>;

    fn validation_loss(&mut self) -> Result<f64>;

    fn save_checkpoint(&mut self, step: u64) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEval {
    pub step: u64,
    pub checkpoint: String,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneOutcome {
    pub init_checkpoint: String,
    pub best_checkpoint: String,
    pub best_step: Option<u64>,
    pub best_val_loss: Option<f64>,
    pub config: TrainConfig,
    pub history: Vec<CheckpointEval>,
    pub diverged: Option<String>,
}

fn persist(run_dir: &Path, outcome: &FinetuneOutcome) -> Result<()> {
    let path = run_dir.join("finetune_run.json");
    fs::write(&path, serde_json::to_vec_pretty(outcome)?).map_err(|e| Error::io(&path, e))
}

/// Train for `cfg.total_steps`, evaluating and saving at every
/// `cfg.checkpoint_interval`, and return the checkpoint with the lowest
/// validation loss. Run metadata goes to `run_dir/finetune_run.json`.
pub fn finetune(
    init_checkpoint: &str,
    train: &Path,
    val: &Path,
    cfg: &TrainConfig,
    backend: &mut dyn TrainingBackend,
    run_dir: &Path,
) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let mut outcome = FinetuneOutcome {
        init_checkpoint: init_checkpoint.to_owned(),
        best_checkpoint: init_checkpoint.to_owned(),
        best_step: None,
        best_val_loss: None,
        config: cfg.clone(),
        history: Vec::new(),
        diverged: None,
    };
    if cfg.total_steps == 0 {
        persist(run_dir, &outcome)?;
        return Ok(outcome);
    }

    backend.begin(init_checkpoint, train, val, cfg, run_dir)?;
    let mut step = 0;
    while step < cfg.total_steps {
        step += cfg.checkpoint_interval;
        let train_loss = backend.train_until(step)?;
        let val_loss = if train_loss.is_finite() {
            backend.validation_loss()?
        } else {
            f64::NAN
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            let loss = if train_loss.is_finite() { val_loss } else { train_loss };
            outcome.diverged = Some(format!("non-finite loss {loss} at step {step}"));
            persist(run_dir, &outcome)?;
            return Err(Error::Divergence { step, loss });
        }
        let checkpoint = backend.save_checkpoint(step)?;
        log::info!("step {step}: train loss {train_loss:.4}, val loss {val_loss:.4}");
        if outcome.best_val_loss.is_none_or(|b| val_loss < b) {
            outcome.best_val_loss = Some(val_loss);
            outcome.best_step = Some(step);
            outcome.best_checkpoint = checkpoint.clone();
        }
        outcome.history.push(CheckpointEval {
            step,
            checkpoint,
            train_loss,
            val_loss,
        });
    }
    persist(run_dir, &outcome)?;
    Ok(outcome)
}

/// Run [`finetune`] once per learning rate (each under
/// `run_dir/lr_<rate>`) and return the index of the run with the lowest
/// best validation loss, with all outcomes.
pub fn sweep_learning_rates(
    init_checkpoint: &str,
    train: &Path,
    val: &Path,
    base: &TrainConfig,
    learning_rates: &[f64],
    backend: &mut dyn TrainingBackend,
    run_dir: &Path,
) -> Result<(usize, Vec<FinetuneOutcome>)> {
    if learning_rates.is_empty() {
        return Err(Error::usage("no learning rates to sweep"));
    }
    let mut outcomes = Vec::with_capacity(learning_rates.len());
    for &lr in learning_rates {
        let cfg = TrainConfig {
            learning_rate: lr,
            ..base.clone()
        };
        let dir = run_dir.join(format!("lr_{lr:e}"));
        match finetune(init_checkpoint, train, val, &cfg, backend, &dir) {
            Ok(o) => outcomes.push(o),
            Err(Error::Divergence { step, loss }) => {
                log::warn!("learning rate {lr:e} diverged at step {step} (loss {loss})");
                outcomes.push(FinetuneOutcome {
                    init_checkpoint: init_checkpoint.to_owned(),
                    best_checkpoint: init_checkpoint.to_owned(),
                    best_step: None,
                    best_val_loss: None,
                    config: cfg,
                    history: Vec::new(),
                    diverged: Some(format!("non-finite loss {loss} at step {step}")),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let best = outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.best_val_loss.map(|l| (i, l)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::validation("every learning rate diverged"))?;
    Ok((best, outcomes))
}

type LossCurve = Box<dyn Fn(f64, u64) -> f64 + Send>;

/// Training backend whose losses follow closed-form curves of
/// `(learning_rate, step)`. Used for dry runs and tests.
pub struct CurveTrainer {
    train_curve: LossCurve,
    val_curve: LossCurve,
    lr: f64,
    step: u64,
    run_dir: PathBuf,
}

impl CurveTrainer {
    pub fn new(
        train_curve: impl Fn(f64, u64) -> f64 + Send + 'static,
        val_curve: impl Fn(f64, u64) -> f64 + Send + 'static,
    ) -> Self {
        CurveTrainer {
            train_curve: Box::new(train_curve),
            val_curve: Box::new(val_curve),
            lr: 0.0,
            step: 0,
            run_dir: PathBuf::new(),
        }
    }

    /// Validation loss falls then rises with an optimum at `best_step`,
    /// scaled by how far the learning rate is from `5e-6`.
    pub fn overfitting(best_step: u64) -> Self {
        CurveTrainer::new(
            |lr, step| 1.0 / (1.0 + step as f64 / 500.0) + (lr / 5e-6).ln().abs() * 0.1,
            move |lr, step| {
                let d = (step as f64 - best_step as f64) / 1000.0;
                0.5 + d * d + (lr / 5e-6).ln().abs() * 0.1
            },
        )
    }
}

impl TrainingBackend for CurveTrainer {
    fn begin(&mut self, _init: &str, _train: &Path, _val: &Path, cfg: &TrainConfig, run_dir: &Path) -> Result<()> {
        self.lr = cfg.learning_rate;
        self.step = 0;
        self.run_dir = run_dir.to_owned();
        Ok(())
    }

    fn train_until(&mut self, step: u64) -> Result<f64> {
        self.step = step;
        Ok((self.train_curve)(self.lr, step))
    }

    fn validation_loss(&mut self) -> Result<f64> {
        Ok((self.val_curve)(self.lr, self.step))
    }

    fn save_checkpoint(&mut self, step: u64) -> Result<String> {
        Ok(self.run_dir.join(format!("checkpoint-{step}")).display().to_string())
    }
}

/// Training backend that drives `scripts/finetune_worker.py` over
/// line-delimited JSON on stdin/stdout.
pub struct SubprocessTrainer {
    python: String,
    script: PathBuf,
    proc: Option<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl SubprocessTrainer {
    pub fn new(script: impl Into<PathBuf>) -> Self {
        SubprocessTrainer {
            python: std::env::var("FAITHNLI_PYTHON").unwrap_or_else(|_| "python3".to_owned()),
            script: script.into(),
            proc: None,
        }
    }

    fn call(&mut self, msg: Value) -> Result<Value> {
        if self.proc.is_none() {
            let mut child = Command::new(&self.python)
                .arg(&self.script)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| Error::io(&self.script, e))?;
            let stdin = child.stdin.take().expect("piped");
            let stdout = BufReader::new(child.stdout.take().expect("piped"));
            self.proc = Some((child, stdin, stdout));
        }
        let (_, stdin, stdout) = self.proc.as_mut().expect("spawned");
        let transport = |e: std::io::Error| Error::Transport {
            retries: 0,
            message: format!("training worker: {e}"),
        };
        writeln!(stdin, "{msg}").map_err(transport)?;
        stdin.flush().map_err(transport)?;
        let mut line = String::new();
        if stdout.read_line(&mut line).map_err(transport)? == 0 {
            return Err(Error::Transport {
                retries: 0,
                message: "training worker exited".into(),
            });
        }
        let v: Value = serde_json::from_str(&line)?;
        if v["ok"].as_bool() != Some(true) {
            return Err(Error::validation(format!(
                "training worker error: {}",
                v["error"].as_str().unwrap_or("unknown")
            )));
        }
        Ok(v)
    }

    fn loss(v: &Value) -> Result<f64> {
        // NaN arrives as null since JSON has no NaN.
        Ok(v["loss"].as_f64().unwrap_or(f64::NAN))
    }
}

impl Drop for SubprocessTrainer {
    fn drop(&mut self) {
        if let Some((mut child, stdin, _)) = self.proc.take() {
            drop(stdin);
            let _ = child.wait();
        }
    }
}

impl TrainingBackend for SubprocessTrainer {
    fn begin(&mut self, init: &str, train: &Path, val: &Path, cfg: &TrainConfig, run_dir: &Path) -> Result<()> {
        self.call(json!({
            "cmd": "begin",
            "init": init,
            "train": train,
            "val": val,
            "run_dir": run_dir,
            "config": cfg,
            "warmup_steps": cfg.warmup_steps(),
        }))
        .map(drop)
    }

    fn train_until(&mut self, step: u64) -> Result<f64> {
        let v = self.call(json!({"cmd": "train_until", "step": step}))?;
        Self::loss(&v)
    }

    fn validation_loss(&mut self) -> Result<f64> {
        let v = self.call(json!({"cmd": "val_loss"}))?;
        Self::loss(&v)
    }

    fn save_checkpoint(&mut self, step: u64) -> Result<String> {
        let v = self.call(json!({"cmd": "save", "step": step}))?;
        v["checkpoint"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| Error::validation("training worker returned no checkpoint path"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paths() -> (PathBuf, PathBuf) {
        (PathBuf::from("train.jsonl"), PathBuf::from("val.jsonl"))
    }

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!(
            (c.warmup_ratio, c.weight_decay, c.effective_batch_size),
            (0.06, 0.01, 64)
        );
        assert_eq!((c.total_steps, c.checkpoint_interval), (2000, 500));
        c.validate().unwrap();
        assert_eq!(c.warmup_steps(), 120);
    }

    #[test]
    fn schedule_shape() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(0), 0.0);
        assert!((c.lr_at(120) - 5e-6).abs() < 1e-18);
        assert!((c.lr_at(60) - 2.5e-6).abs() < 1e-18);
        assert_eq!(c.lr_at(2000), 0.0);
    }

    #[test]
    fn interval_must_divide() {
        let c = TrainConfig {
            checkpoint_interval: 300,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_steps_returns_input() {
        let dir = tempfile::tempdir().unwrap();
        let (t, v) = paths();
        let cfg = TrainConfig {
            total_steps: 0,
            ..Default::default()
        };
        let out = finetune(
            "base-ckpt",
            &t,
            &v,
            &cfg,
            &mut CurveTrainer::overfitting(500),
            dir.path(),
        )
        .unwrap();
        assert_eq!(out.best_checkpoint, "base-ckpt");
        assert!(out.history.is_empty());
        assert!(dir.path().join("finetune_run.json").exists());
    }

    #[test]
    fn selects_min_validation_loss() {
        let dir = tempfile::tempdir().unwrap();
        let (t, v) = paths();
        let out = finetune(
            "base",
            &t,
            &v,
            &TrainConfig::default(),
            &mut CurveTrainer::overfitting(500),
            dir.path(),
        )
        .unwrap();
        assert_eq!(out.history.len(), 4);
        assert_eq!(out.best_step, Some(500));
        assert!(out.best_checkpoint.ends_with("checkpoint-500"));
    }

    #[test]
    fn divergence_aborts_with_diagnostic() {
        let dir = tempfile::tempdir().unwrap();
        let (t, v) = paths();
        let mut trainer = CurveTrainer::new(|_, step| if step >= 1000 { f64::NAN } else { 1.0 }, |_, _| 1.0);
        let err = finetune("base", &t, &v, &TrainConfig::default(), &mut trainer, dir.path()).unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 1000, .. }));
        let meta: FinetuneOutcome =
            serde_json::from_slice(&fs::read(dir.path().join("finetune_run.json")).unwrap()).unwrap();
        assert!(meta.diverged.is_some());
        assert_eq!(meta.history.len(), 1);
    }

    #[test]
    fn sweep_picks_best_rate() {
        let dir = tempfile::tempdir().unwrap();
        let (t, v) = paths();
        let mut trainer = CurveTrainer::overfitting(500);
        let (best, outs) = sweep_learning_rates(
            "base",
            &t,
            &v,
            &TrainConfig::default(),
            &PUBLISHED_LEARNING_RATES,
            &mut trainer,
            dir.path(),
        )
        .unwrap();
        assert_eq!(outs.len(), 3);
        assert_eq!(best, 0);
    }

    #[test]
    fn sweep_survives_divergent_rate() {
        let dir = tempfile::tempdir().unwrap();
        let (t, v) = paths();
        let mut trainer = CurveTrainer::new(
            |lr, _| if lr > 1e-3 { f64::INFINITY } else { 1.0 },
            |lr, s| lr + s as f64,
        );
        let (best, outs) = sweep_learning_rates(
            "b",
            &t,
            &v,
            &TrainConfig::default(),
            &[5e-1, 5e-6],
            &mut trainer,
            dir.path(),
        )
        .unwrap();
        assert_eq!(best, 1);
        assert!(outs[0].diverged.is_some());
    }
}
