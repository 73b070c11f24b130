use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::probs::NliProbs;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    LocalModel,
    RemoteHttp,
    Mock,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::LocalModel => "local",
            BackendKind::RemoteHttp => "http",
            BackendKind::Mock => "mock",
        })
    }
}

/// One forward pass: a premise/hypothesis pair and the seed that fixes its
/// dropout mask.
#[derive(Debug, Clone, Copy)]
pub struct ClassifyRequest<'a> {
    pub premise: &'a str,
    pub hypothesis: &'a str,
    pub seed: u64,
}

/// A three-way NLI classifier.
///
/// Implementations must return one vector per request, in request order.
/// With `dropout == false` the output must not depend on the seed.
pub trait NliBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Checkpoint identifier or endpoint URL; part of every cache key.
    fn checkpoint_id(&self) -> &str;

    fn classify(&self, requests: &[ClassifyRequest<'_>], dropout: bool) -> Result<Vec<NliProbs>>;
}

/// A backend plus an atomic count of model calls issued through it.
///
/// Each premise/hypothesis/seed triple sent to the model counts as one
/// call, whether or not it travels in a batch with others.
pub struct BackendHandle {
    backend: Box<dyn NliBackend>,
    calls: AtomicU64,
}

impl BackendHandle {
    pub fn new(backend: impl NliBackend + 'static) -> Self {
        Self::from_boxed(Box::new(backend))
    }

    pub fn from_boxed(backend: Box<dyn NliBackend>) -> Self {
        BackendHandle {
            backend,
            calls: AtomicU64::new(0),
        }
    }

    pub fn kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn checkpoint_id(&self) -> &str {
        self.backend.checkpoint_id()
    }

    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Classify `pairs` with a shared seed.
    pub fn classify(&self, pairs: &[(&str, &str)], dropout_on: bool, seed: u64) -> Result<Vec<NliProbs>> {
        let requests: Vec<_> = pairs
            .iter()
            .map(|&(premise, hypothesis)| ClassifyRequest {
                premise,
                hypothesis,
                seed,
            })
            .collect();
        self.classify_requests(&requests, dropout_on)
    }

    /// Classify requests that each carry their own seed.
    pub fn classify_requests(&self, requests: &[ClassifyRequest<'_>], dropout_on: bool) -> Result<Vec<NliProbs>> {
        if requests.is_empty() {
            return Err(Error::usage("classify needs at least one pair"));
        }
        self.calls.fetch_add(requests.len() as u64, Ordering::SeqCst);
        let out = self.backend.classify(requests, dropout_on)?;
        if out.len() != requests.len() {
            return Err(Error::validation(format!(
                "backend returned {} vectors for {} pairs",
                out.len(),
                requests.len()
            )));
        }
        for p in &out {
            p.validate()?;
        }
        Ok(out)
    }
}

impl fmt::Debug for BackendHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendHandle")
            .field("kind", &self.kind())
            .field("checkpoint", &self.checkpoint_id())
            .field("calls", &self.call_count())
            .finish()
    }
}

/// JSON body sent to a remote or subprocess classifier.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WireRequest {
    pub pairs: Vec<[String; 2]>,
    pub dropout: bool,
    pub seeds: Vec<u64>,
}

/// JSON body returned by a remote or subprocess classifier.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WireResponse {
    pub probs: Vec<Vec<f64>>,
}

impl WireRequest {
    pub fn from_requests(requests: &[ClassifyRequest<'_>], dropout: bool) -> Self {
        WireRequest {
            pairs: requests
                .iter()
                .map(|r| [r.premise.to_owned(), r.hypothesis.to_owned()])
                .collect(),
            dropout,
            seeds: requests.iter().map(|r| r.seed).collect(),
        }
    }
}

impl WireResponse {
    /// Check shape and normalisation against the request it answers.
    pub fn into_probs(self, expected: usize) -> Result<Vec<NliProbs>> {
        if self.probs.len() != expected {
            return Err(Error::validation(format!(
                "response carries {} probability vectors for {expected} pairs",
                self.probs.len()
            )));
        }
        self.probs
            .iter()
            .enumerate()
            .map(|(i, v)| NliProbs::from_slice(v).map_err(|e| Error::validation(format!("pair {i}: {e}"))))
            .collect()
    }
}
