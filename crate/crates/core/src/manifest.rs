//! Run manifests: what a command read, which seeds it used and the
//! content hash of everything it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::rng::sha256_hex;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileDigest {
            path: path.to_path_buf(),
            sha256: file_sha256(path)?,
        })
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config_digest: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<FileDigest>,
    /// Named counts observed during the run, such as backend calls.
    #[serde(default)]
    pub counters: BTreeMap<String, u64>,
    pub started_at: u64,
    pub finished_at: Option<u64>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: serde_json::Value, tool_version: &str) -> Self {
        let config_digest = sha256_hex(config.to_string().as_bytes());
        RunManifest {
            command,
            config_digest,
            config,
            inputs: Vec::new(),
            seeds: BTreeMap::new(),
            outputs: Vec::new(),
            counters: BTreeMap::new(),
            started_at: unix_now(),
            finished_at: None,
            tool_version: tool_version.to_owned(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn add_seed(&mut self, name: &str, seed: u64) {
        self.seeds.insert(name.to_owned(), seed);
    }

    pub fn add_counter(&mut self, name: &str, value: u64) {
        self.counters.insert(name.to_owned(), value);
    }

    /// Records an output that already exists on disk.
    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        let d = FileDigest::of(path)?;
        self.outputs.retain(|o| o.path != d.path);
        self.outputs.push(d);
        Ok(())
    }

    pub fn finish(&mut self) {
        self.finished_at = Some(unix_now());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Recomputes the config digest and every file hash; lists mismatches.
    /// Relative paths resolve against the current directory.
    pub fn verify(&self) -> Result<()> {
        self.verify_from(Path::new("."))
    }

    /// Like [`RunManifest::verify`], resolving relative paths against the
    /// directory the run was started in.
    pub fn verify_from(&self, base: &Path) -> Result<()> {
        let mut bad = Vec::new();
        if sha256_hex(self.config.to_string().as_bytes()) != self.config_digest {
            bad.push("config digest".to_owned());
        }
        for f in self.inputs.iter().chain(&self.outputs) {
            match file_sha256(&base.join(&f.path)) {
                Ok(h) if h == f.sha256 => {}
                Ok(_) => bad.push(format!("{} changed", f.path.display())),
                Err(_) => bad.push(format!("{} unreadable", f.path.display())),
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::validation(format!("manifest mismatch: {}", bad.join("; "))))
        }
    }
}
