use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use faithnli::data_io::{
    is_fact_checking, load_begin_v2, load_true_corpus, read_score_file, BeginV2Config, FaithfulnessInstance, ScoreRow,
};
use faithnli::manifest::RunManifest;
use faithnli::nli_scoring::{BackendHandle, LocalModelBackend, MockBackend, RemoteBackend};

use crate::config::{BackendChoice, Settings};

/// A corpus given as `ID=PATH`, or as `PATH` with the id taken from the
/// file stem.
#[derive(Debug, Clone)]
pub struct CorpusArg {
    pub id: String,
    pub path: PathBuf,
}

impl FromStr for CorpusArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some((id, path)) = s.split_once('=') {
            if id.is_empty() || path.is_empty() {
                return Err(format!("expected ID=PATH, got `{s}`"));
            }
            return Ok(CorpusArg {
                id: id.to_owned(),
                path: path.into(),
            });
        }
        let path = PathBuf::from(s);
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_lowercase)
            .ok_or_else(|| format!("cannot derive a corpus id from `{s}`"))?;
        Ok(CorpusArg { id, path })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorpusFormat {
    /// CSV with grounding, generated_text and label columns.
    True,
    /// Tab-separated BEGIN-v2 release with generator model ids.
    BeginV2,
}

pub fn load_corpora(
    corpora: &[CorpusArg],
    format: CorpusFormat,
    include_fever: bool,
) -> Result<Vec<FaithfulnessInstance>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for c in corpora {
        if is_fact_checking(&c.id) && !include_fever {
            bail!(
                "corpus `{}` is a fact-checking corpus; pass --include-fever to use it",
                c.id
            );
        }
        if !seen.insert(c.id.clone()) {
            bail!("corpus `{}` given twice", c.id);
        }
        let loaded = match format {
            CorpusFormat::True => load_true_corpus(&c.path, &c.id),
            CorpusFormat::BeginV2 => load_begin_v2(&c.path, &c.id, &BeginV2Config::default()),
        }
        .with_context(|| format!("loading corpus `{}` from {}", c.id, c.path.display()))?;
        out.extend(loaded);
    }
    Ok(out)
}

pub fn build_backend(settings: &Settings) -> Result<BackendHandle> {
    Ok(match settings.backend {
        BackendChoice::Mock => BackendHandle::new(MockBackend::new()),
        BackendChoice::Http => {
            let endpoint = settings
                .endpoint
                .as_deref()
                .context("--backend http needs --endpoint")?;
            BackendHandle::new(RemoteBackend::new(endpoint))
        }
        BackendChoice::Local => BackendHandle::new(LocalModelBackend::new(
            settings.checkpoint.clone(),
            settings.worker.clone(),
        )),
    })
}

pub fn read_scores(paths: &[PathBuf]) -> Result<Vec<ScoreRow>> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_score_file(p).with_context(|| format!("reading scores {}", p.display()))?);
    }
    Ok(rows)
}

/// Score rows split by metric, in order of first appearance.
pub fn group_by_metric(rows: Vec<ScoreRow>) -> Vec<(String, Vec<ScoreRow>)> {
    let mut groups: Vec<(String, Vec<ScoreRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(m, _)| *m == r.metric) {
            Some((_, g)) => g.push(r),
            None => groups.push((r.metric.clone(), vec![r])),
        }
    }
    groups
}

/// Gold instances restricted to the corpora the score rows cover.
pub fn gold_for(rows: &[ScoreRow], gold: &[FaithfulnessInstance]) -> Vec<FaithfulnessInstance> {
    let corpora: HashSet<&str> = rows.iter().map(|r| r.corpus.as_str()).collect();
    gold.iter()
        .filter(|g| corpora.contains(g.corpus_id.as_str()))
        .cloned()
        .collect()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Manifest of one command run.
pub struct Run {
    manifest: RunManifest,
}

impl Run {
    pub fn start(command: &str, settings: &Settings, extra: serde_json::Value) -> Result<Self> {
        let config = serde_json::json!({
            "command": command,
            "settings": settings,
            "args": extra,
        });
        let mut manifest = RunManifest::new(std::env::args().collect(), config, env!("CARGO_PKG_VERSION"));
        manifest.add_seed("seed", settings.seed);
        Ok(Run { manifest })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        Ok(self.manifest.add_input(path)?)
    }

    pub fn inputs<'a>(&mut self, paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
        for p in paths {
            self.input(p)?;
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        Ok(self.manifest.add_output(path)?)
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.manifest.add_seed(name, seed);
    }

    pub fn counter(&mut self, name: &str, value: u64) {
        self.manifest.add_counter(name, value);
    }

    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.manifest.finish();
        self.manifest.write(path)?;
        log::info!("manifest written to {}", path.display());
        Ok(())
    }
}

/// `scores.csv` -> `scores.csv.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_args() {
        let a: CorpusArg = "q2=data/x.csv".parse().unwrap();
        assert_eq!((a.id.as_str(), a.path.to_str().unwrap()), ("q2", "data/x.csv"));
        let b: CorpusArg = "data/DialFact.csv".parse().unwrap();
        assert_eq!(b.id, "dialfact");
        assert!("=x".parse::<CorpusArg>().is_err());
    }

    #[test]
    fn manifest_path_appends() {
        assert_eq!(
            manifest_path(Path::new("out/s.csv")),
            PathBuf::from("out/s.csv.manifest.json")
        );
    }
}
