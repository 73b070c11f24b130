use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::backend::{BackendKind, ClassifyRequest, NliBackend, WireRequest, WireResponse};
use super::probs::NliProbs;
use crate::{Error, Result};

/// Multi-dataset DeBERTa-v3-large NLI checkpoint (MultiNLI, Fever-NLI, ANLI,
/// LingNLI, WANLI).
pub const DEFAULT_CHECKPOINT: &str = "MoritzLaurer/DeBERTa-v3-large-mnli-fever-anli-ling-wanli";

/// Runs a local checkpoint in a Python worker process.
///
/// The worker (`scripts/nli_worker.py`) reads one JSON request per line on
/// stdin and writes one JSON response per line on stdout, using the same
/// body shapes as [`super::RemoteBackend`]. It enables every dropout layer
/// when `dropout` is set and seeds torch with the per-pair seed before
/// each forward pass.
pub struct LocalModelBackend {
    checkpoint: String,
    python: String,
    script: PathBuf,
    max_retries: u32,
    worker: Mutex<Option<Worker>>,
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl LocalModelBackend {
    pub fn new(checkpoint: impl Into<String>, script: impl Into<PathBuf>) -> Self {
        LocalModelBackend {
            checkpoint: checkpoint.into(),
            python: std::env::var("FAITHNLI_PYTHON").unwrap_or_else(|_| "python3".to_owned()),
            script: script.into(),
            max_retries: 1,
            worker: Mutex::new(None),
        }
    }

    pub fn with_python(mut self, python: impl Into<String>) -> Self {
        self.python = python.into();
        self
    }

    fn spawn(&self) -> std::io::Result<Worker> {
        let mut child = Command::new(&self.python)
            .arg(&self.script)
            .arg("--checkpoint")
            .arg(&self.checkpoint)
            .arg("--stdio")
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Worker { child, stdin, stdout })
    }

    fn roundtrip(&self, slot: &mut Option<Worker>, line: &str) -> std::result::Result<String, String> {
        if slot.is_none() {
            *slot = Some(self.spawn().map_err(|e| format!("cannot start {}: {e}", self.python))?);
        }
        let w = slot.as_mut().expect("worker present");
        w.stdin
            .write_all(line.as_bytes())
            .and_then(|_| w.stdin.write_all(b"\n"))
            .and_then(|_| w.stdin.flush())
            .map_err(|e| format!("worker stdin: {e}"))?;
        let mut out = String::new();
        let n = w
            .stdout
            .read_line(&mut out)
            .map_err(|e| format!("worker stdout: {e}"))?;
        if n == 0 {
            return Err("worker exited".to_owned());
        }
        Ok(out)
    }
}

impl NliBackend for LocalModelBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::LocalModel
    }

    fn checkpoint_id(&self) -> &str {
        &self.checkpoint
    }

    fn classify(&self, requests: &[ClassifyRequest<'_>], dropout: bool) -> Result<Vec<NliProbs>> {
        let line = serde_json::to_string(&WireRequest::from_requests(requests, dropout))?;
        let mut slot = self.worker.lock().unwrap_or_else(|p| p.into_inner());
        let mut last = String::new();
        for _ in 0..=self.max_retries {
            match self.roundtrip(&mut slot, &line) {
                Ok(out) => {
                    let resp: WireResponse = serde_json::from_str(&out)
                        .map_err(|e| Error::validation(format!("malformed worker response: {e}")))?;
                    return resp.into_probs(requests.len());
                }
                Err(msg) => {
                    // Restart the worker on the next attempt.
                    *slot = None;
                    last = msg;
                }
            }
        }
        Err(Error::Transport {
            retries: self.max_retries,
            message: last,
        })
    }
}
