//! On-disk score cache.
//!
//! One JSON-lines file per `(checkpoint, config digest, corpus)` key. The
//! first line is a header naming the key; every further line is a
//! [`ScoreRecord`]. Writers hold an exclusive lock on a sibling `.lock`
//! file and replace the cache file by rename, so readers never see a
//! half-written file. Any unreadable line or header mismatch discards the
//! whole file.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FaithfulnessInstance;
use crate::nli_scoring::{score_dataset, BackendHandle, MetricConfig, ScoreRecord};
use crate::rng::sha256_hex;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheKey {
    pub checkpoint: String,
    pub config_digest: String,
    pub corpus_id: String,
}

impl CacheKey {
    pub fn new(handle: &BackendHandle, cfg: &MetricConfig, corpus_id: &str) -> Self {
        CacheKey {
            checkpoint: handle.checkpoint_id().to_owned(),
            config_digest: cfg.digest(),
            corpus_id: corpus_id.to_owned(),
        }
    }

    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("key serializes").as_bytes())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    cache_header: CacheKey,
    key_digest: String,
}

#[derive(Debug, Clone)]
pub struct ScoreCache {
    dir: PathBuf,
}

impl ScoreCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ScoreCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        let d = key.digest();
        self.dir
            .join(format!("{}-{}.jsonl", sanitize(&key.corpus_id), &d[..16]))
    }

    /// Cached records for `key`. A missing file is an empty cache; a
    /// corrupt one is reported and treated as empty.
    pub fn load(&self, key: &CacheKey) -> Result<HashMap<String, ScoreRecord>> {
        let path = self.path_for(key);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashMap::new()),
            Err(e) => return Err(Error::io(&path, e)),
        };
        match parse_cache(BufReader::new(file), key) {
            Ok(map) => Ok(map),
            Err(why) => {
                log::warn!(
                    "discarding corrupt score cache {}: {why}; rebuilding from scratch",
                    path.display()
                );
                Ok(HashMap::new())
            }
        }
    }

    fn store(&self, key: &CacheKey, records: &[&ScoreRecord]) -> Result<()> {
        let path = self.path_for(key);
        let tmp = path.with_extension("jsonl.tmp");
        {
            let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut w = BufWriter::new(file);
            let header = Header {
                cache_header: key.clone(),
                key_digest: key.digest(),
            };
            let io = |e| Error::io(&tmp, e);
            serde_json::to_writer(&mut w, &header)?;
            w.write_all(b"\n").map_err(io)?;
            for r in records {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n").map_err(io)?;
            }
            w.flush().map_err(io)?;
            w.get_ref().sync_all().map_err(io)?;
        }
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    fn lock(&self, key: &CacheKey) -> Result<File> {
        let path = self.path_for(key).with_extension("lock");
        let f = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        f.lock().map_err(|e| Error::io(&path, e))?;
        Ok(f)
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn parse_cache<R: BufRead>(r: R, key: &CacheKey) -> std::result::Result<HashMap<String, ScoreRecord>, String> {
    let mut lines = r.lines();
    let header = lines.next().ok_or("empty file")?.map_err(|e| e.to_string())?;
    let header: Header = serde_json::from_str(&header).map_err(|e| format!("bad header: {e}"))?;
    if &header.cache_header != key || header.key_digest != key.digest() {
        return Err("header does not match cache key".into());
    }
    let mut map = HashMap::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let rec: ScoreRecord = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 2))?;
        map.insert(rec.instance_uid.clone(), rec);
    }
    Ok(map)
}

/// Score `instances`, calling the backend only for uids missing from the
/// cache. Output follows input order. Failed instances are returned as
/// errors and never cached.
pub fn cache_get_or_score(
    instances: &[FaithfulnessInstance],
    cfg: &MetricConfig,
    handle: &BackendHandle,
    cache: &ScoreCache,
) -> Result<Vec<Result<ScoreRecord>>> {
    cfg.validate()?;
    if instances.is_empty() {
        return Err(Error::usage("nothing to score"));
    }
    let mut corpora: Vec<&str> = Vec::new();
    for inst in instances {
        if !corpora.contains(&inst.corpus_id.as_str()) {
            corpora.push(&inst.corpus_id);
        }
    }

    let mut results: HashMap<String, Result<ScoreRecord>> = HashMap::with_capacity(instances.len());
    for corpus in corpora {
        let key = CacheKey::new(handle, cfg, corpus);
        let _guard = cache.lock(&key)?;
        let cached = cache.load(&key)?;
        let members: Vec<&FaithfulnessInstance> = instances.iter().filter(|i| i.corpus_id == corpus).collect();
        let missing: Vec<FaithfulnessInstance> = members
            .iter()
            .filter(|i| !cached.contains_key(&i.uid))
            .map(|i| (*i).clone())
            .collect();
        log::info!(
            "corpus {corpus}: {} cached, {} to score",
            members.len() - missing.len(),
            missing.len()
        );
        let fresh = if missing.is_empty() {
            Vec::new()
        } else {
            score_dataset(&missing, cfg, handle)?
        };
        let fresh_ok: Vec<&ScoreRecord> = fresh.iter().filter_map(|r| r.as_ref().ok()).collect();
        if !fresh_ok.is_empty() || !cache.path_for(&key).exists() {
            let mut all: Vec<&ScoreRecord> = cached.values().collect();
            all.sort_by(|a, b| a.instance_uid.cmp(&b.instance_uid));
            all.extend(fresh_ok.iter().copied());
            cache.store(&key, &all)?;
        }
        for (inst, rec) in missing.iter().zip(fresh) {
            results.insert(inst.uid.clone(), rec);
        }
        for inst in members {
            if let Some(rec) = cached.get(&inst.uid) {
                results.insert(inst.uid.clone(), Ok(rec.clone()));
            }
        }
    }
    Ok(instances
        .iter()
        .map(|i| {
            results
                .remove(&i.uid)
                .unwrap_or_else(|| Err(Error::validation("duplicate uid").for_instance(&i.uid)))
        })
        .collect())
}
