//! Settings resolution: command-line flags, then the TOML config file,
//! then built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use faithnli::adaptation::TrainConfig;
use faithnli::evaluation_stats::{DEFAULT_ALPHA, DEFAULT_BOOTSTRAP, DEFAULT_PERMUTATIONS};
use faithnli::nli_scoring::{MetricConfig, ScoreMode, DEFAULT_CHECKPOINT};
use serde::{Deserialize, Serialize};

pub const DEFAULT_NLI_WORKER: &str = "scripts/nli_worker.py";
pub const DEFAULT_FINETUNE_WORKER: &str = "scripts/finetune_worker.py";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Local,
    Http,
    Mock,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub backend: Option<BackendChoice>,
    pub cache: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub checkpoint: Option<String>,
    pub worker: Option<PathBuf>,
    pub metric: MetricSection,
    pub evaluate: EvaluateSection,
    pub train: TrainSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    pub mode: Option<ScoreMode>,
    pub mc: Option<bool>,
    pub k: Option<u32>,
    pub batch_size: Option<usize>,
    pub max_premise_tokens: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub bootstrap: Option<usize>,
    pub alpha: Option<f64>,
    pub permutations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub warmup_ratio: Option<f64>,
    pub weight_decay: Option<f64>,
    pub effective_batch_size: Option<u32>,
    pub learning_rate: Option<f64>,
    pub total_steps: Option<u64>,
    pub checkpoint_interval: Option<u64>,
    pub worker: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// TOML config file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendChoice>,
    /// Score cache directory.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// URL of the HTTP backend.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Checkpoint served by the local backend.
    #[arg(long, global = true)]
    pub checkpoint: Option<String>,
    /// Python worker script of the local backend.
    #[arg(long, global = true)]
    pub worker: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MetricArgs {
    /// Score function: `e` or `e-c`.
    #[arg(long)]
    pub mode: Option<ScoreMode>,
    /// Enable MC dropout (default).
    #[arg(long, overrides_with = "no_mc")]
    pub mc: bool,
    /// Single deterministic pass.
    #[arg(long, overrides_with = "mc")]
    pub no_mc: bool,
    /// MC dropout samples.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_premise_tokens: Option<usize>,
}

impl MetricArgs {
    fn mc(&self) -> Option<bool> {
        match (self.mc, self.no_mc) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub backend: BackendChoice,
    pub cache: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub checkpoint: String,
    pub worker: PathBuf,
    pub metric: MetricConfig,
    pub bootstrap: usize,
    pub alpha: f64,
    pub permutations: usize,
    pub train: TrainConfig,
    pub train_worker: PathBuf,
}

impl Settings {
    pub fn resolve(global: &GlobalArgs) -> Result<Self> {
        let file = match &global.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let seed = global.seed.or(file.seed).unwrap_or(0);
        let m = &file.metric;
        let base = MetricConfig::default();
        let metric = MetricConfig {
            mode: m.mode.unwrap_or(base.mode),
            mc_enabled: m.mc.unwrap_or(base.mc_enabled),
            k: m.k.unwrap_or(base.k),
            base_seed: seed,
            batch_size: m.batch_size.unwrap_or(base.batch_size),
            max_premise_tokens: m.max_premise_tokens.unwrap_or(base.max_premise_tokens),
        };
        let t = &file.train;
        let tb = TrainConfig::default();
        let train = TrainConfig {
            warmup_ratio: t.warmup_ratio.unwrap_or(tb.warmup_ratio),
            weight_decay: t.weight_decay.unwrap_or(tb.weight_decay),
            effective_batch_size: t.effective_batch_size.unwrap_or(tb.effective_batch_size),
            learning_rate: t.learning_rate.unwrap_or(tb.learning_rate),
            total_steps: t.total_steps.unwrap_or(tb.total_steps),
            checkpoint_interval: t.checkpoint_interval.unwrap_or(tb.checkpoint_interval),
            selection: tb.selection,
            seed,
        };
        Ok(Settings {
            seed,
            backend: global.backend.or(file.backend).unwrap_or(BackendChoice::Local),
            cache: global.cache.clone().or(file.cache),
            endpoint: global.endpoint.clone().or(file.endpoint),
            checkpoint: global
                .checkpoint
                .clone()
                .or(file.checkpoint)
                .unwrap_or_else(|| DEFAULT_CHECKPOINT.to_owned()),
            worker: global
                .worker
                .clone()
                .or(file.worker)
                .unwrap_or_else(|| DEFAULT_NLI_WORKER.into()),
            metric,
            bootstrap: file.evaluate.bootstrap.unwrap_or(DEFAULT_BOOTSTRAP),
            alpha: file.evaluate.alpha.unwrap_or(DEFAULT_ALPHA),
            permutations: file.evaluate.permutations.unwrap_or(DEFAULT_PERMUTATIONS),
            train,
            train_worker: file.train.worker.unwrap_or_else(|| DEFAULT_FINETUNE_WORKER.into()),
        })
    }

    /// Metric configuration with command-specific flags applied.
    pub fn metric_with(&self, args: &MetricArgs) -> MetricConfig {
        let mut cfg = self.metric.clone();
        if let Some(mode) = args.mode {
            cfg.mode = mode;
        }
        if let Some(mc) = args.mc() {
            cfg.mc_enabled = mc;
        }
        if let Some(k) = args.k {
            cfg.k = k;
        }
        if let Some(b) = args.batch_size {
            cfg.batch_size = b;
        }
        if let Some(t) = args.max_premise_tokens {
            cfg.max_premise_tokens = t;
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global(config: Option<PathBuf>) -> GlobalArgs {
        GlobalArgs {
            config,
            seed: None,
            backend: None,
            cache: None,
            endpoint: None,
            checkpoint: None,
            worker: None,
        }
    }

    #[test]
    fn defaults_are_the_full_configuration() {
        let s = Settings::resolve(&global(None)).unwrap();
        assert_eq!(s.metric.metric_id(), "e-c+mc15");
        assert_eq!(s.backend, BackendChoice::Local);
        assert_eq!(s.checkpoint, DEFAULT_CHECKPOINT);
        assert_eq!(s.bootstrap, 1000);
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 3\nbackend = \"mock\"\n[metric]\nk = 5\nmode = \"e\"\n").unwrap();
        let mut g = global(Some(path));
        let s = Settings::resolve(&g).unwrap();
        assert_eq!((s.seed, s.backend, s.metric.k), (3, BackendChoice::Mock, 5));
        assert_eq!(s.metric.mode, ScoreMode::EntailmentOnly);

        g.seed = Some(9);
        g.backend = Some(BackendChoice::Http);
        let s = Settings::resolve(&g).unwrap();
        assert_eq!((s.seed, s.backend, s.metric.base_seed), (9, BackendChoice::Http, 9));
        let args = MetricArgs {
            k: Some(7),
            no_mc: true,
            mode: Some(ScoreMode::EMinusC),
            ..Default::default()
        };
        let m = s.metric_with(&args);
        assert_eq!((m.k, m.mc_enabled, m.mode), (7, false, ScoreMode::EMinusC));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "sede = 3\n").unwrap();
        assert!(Settings::resolve(&global(Some(path))).is_err());
    }
}
