use std::thread;
use std::time::Duration;

use super::backend::{BackendKind, ClassifyRequest, NliBackend, WireRequest, WireResponse};
use super::probs::NliProbs;
use crate::{Error, Result};

/// Classifier served over HTTP.
///
/// POSTs `{"pairs": [[premise, hypothesis], ...], "dropout": bool,
/// "seeds": [int, ...]}` and expects `{"probs": [[e, n, c], ...]}`.
/// `seeds[i]` belongs to `pairs[i]`.
pub struct RemoteBackend {
    endpoint: String,
    agent: ureq::Agent,
    max_retries: u32,
    backoff: Duration,
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        RemoteBackend {
            endpoint: endpoint.into(),
            agent,
            max_retries: 3,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    fn post_once(&self, body: &WireRequest) -> std::result::Result<WireResponse, Attempt> {
        let mut resp = match self.agent.post(&self.endpoint).send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(code)) if (400..500).contains(&code) => {
                return Err(Attempt::Fatal(Error::Transport {
                    retries: 0,
                    message: format!("{} answered HTTP {code}", self.endpoint),
                }))
            }
            Err(e) => return Err(Attempt::Retry(e.to_string())),
        };
        resp.body_mut()
            .read_json::<WireResponse>()
            .map_err(|e| Attempt::Fatal(Error::validation(format!("malformed response body: {e}"))))
    }
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

impl NliBackend for RemoteBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::RemoteHttp
    }

    fn checkpoint_id(&self) -> &str {
        &self.endpoint
    }

    fn classify(&self, requests: &[ClassifyRequest<'_>], dropout: bool) -> Result<Vec<NliProbs>> {
        let body = WireRequest::from_requests(requests, dropout);
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                thread::sleep(self.backoff * attempt);
            }
            match self.post_once(&body) {
                Ok(resp) => return resp.into_probs(requests.len()),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    log::warn!(
                        "classify attempt {} against {} failed: {msg}",
                        attempt + 1,
                        self.endpoint
                    );
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
