//! Deterministic hash-driven stand-in for an NLI model.
//!
//! Output is a pure function of `(premise, hypothesis, dropout, seed)`:
//!
//! 1. `key = sha256("faithnli-mock-v1" 0x00 premise 0x00 hypothesis)`.
//! 2. Base probabilities. If the hypothesis contains the marker of a
//!    [`MockRule`], a ChaCha8 stream seeded with `key` draws
//!    `e ~ Beta(alpha, beta)` and `u ~ U[0, 1)`, giving
//!    `(e, (1 - e) u, (1 - e)(1 - u))`. Otherwise the logits are
//!    `6 (u_i - 0.5)` with `u_i` read from bytes `8i..8i+8` of `key`.
//! 3. With dropout on and a positive noise scale, a ChaCha8 stream seeded
//!    with `sha256("faithnli-mock-dropout" key seed_le)` draws
//!    `z_i ~ N(0, 1)` and the logits become `ln p_i + scale * z_i`.
//!    With dropout off the perturbation is exactly zero.
//! 4. Softmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::backend::{BackendKind, ClassifyRequest, NliBackend};
use super::probs::NliProbs;
use crate::{Error, Result};

pub const DEFAULT_DROPOUT_SCALE: f64 = 0.3;

/// Hypotheses containing `marker` get an entailment probability drawn from
/// `Beta(alpha, beta)`.
#[derive(Debug, Clone)]
pub struct MockRule {
    pub marker: String,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct MockBackend {
    checkpoint: String,
    dropout_scale: f64,
    rules: Vec<MockRule>,
    fail_marker: Option<String>,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend {
            checkpoint: "mock-nli-v1".to_owned(),
            dropout_scale: DEFAULT_DROPOUT_SCALE,
            rules: Vec::new(),
            fail_marker: None,
        }
    }
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_checkpoint(mut self, id: impl Into<String>) -> Self {
        self.checkpoint = id.into();
        self
    }

    /// Scale of the logit noise applied under dropout. Zero makes dropout
    /// a no-op.
    pub fn with_dropout_scale(mut self, scale: f64) -> Self {
        self.dropout_scale = scale;
        self
    }

    pub fn with_rule(mut self, marker: impl Into<String>, alpha: f64, beta: f64) -> Self {
        self.rules.push(MockRule {
            marker: marker.into(),
            alpha,
            beta,
        });
        self
    }

    /// Requests whose hypothesis contains `marker` fail with a transport
    /// error.
    pub fn with_fail_marker(mut self, marker: impl Into<String>) -> Self {
        self.fail_marker = Some(marker.into());
        self
    }

    pub fn predict(&self, premise: &str, hypothesis: &str, dropout: bool, seed: u64) -> Result<NliProbs> {
        let key = pair_key(premise, hypothesis);
        let base = self.base_probs(&key, hypothesis)?;
        let mut logits = base.as_array().map(f64::ln);
        let noise = if dropout && self.dropout_scale > 0.0 {
            dropout_noise(&key, seed)
        } else {
            [0.0; 3]
        };
        for (l, z) in logits.iter_mut().zip(noise) {
            *l += self.dropout_scale * z;
        }
        NliProbs::from_logits(logits)
    }

    fn base_probs(&self, key: &[u8; 32], hypothesis: &str) -> Result<NliProbs> {
        if let Some(rule) = self.rules.iter().find(|r| hypothesis.contains(&r.marker)) {
            let beta = Beta::new(rule.alpha, rule.beta)
                .map_err(|e| Error::usage(format!("bad beta shape for mock rule: {e}")))?;
            let mut rng = ChaCha8Rng::from_seed(*key);
            let e: f64 = beta.sample(&mut rng);
            let u: f64 = rng.random();
            return NliProbs::new(e, (1.0 - e) * u, (1.0 - e) * (1.0 - u));
        }
        let mut logits = [0.0; 3];
        for (i, l) in logits.iter_mut().enumerate() {
            *l = 6.0 * (unit_from_bytes(&key[8 * i..8 * i + 8]) - 0.5);
        }
        NliProbs::from_logits(logits)
    }
}

pub fn pair_key(premise: &str, hypothesis: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"faithnli-mock-v1\0");
    h.update(premise.as_bytes());
    h.update(b"\0");
    h.update(hypothesis.as_bytes());
    h.finalize().into()
}

pub fn dropout_key(pair_key: &[u8; 32], seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"faithnli-mock-dropout");
    h.update(pair_key);
    h.update(seed.to_le_bytes());
    h.finalize().into()
}

fn dropout_noise(pair_key: &[u8; 32], seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::from_seed(dropout_key(pair_key, seed));
    [(); 3].map(|_| StandardNormal.sample(&mut rng))
}

fn unit_from_bytes(b: &[u8]) -> f64 {
    let v = u64::from_le_bytes(b.try_into().expect("8 bytes"));
    (v >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl NliBackend for MockBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }

    fn checkpoint_id(&self) -> &str {
        &self.checkpoint
    }

    fn classify(&self, requests: &[ClassifyRequest<'_>], dropout: bool) -> Result<Vec<NliProbs>> {
        requests
            .iter()
            .map(|r| {
                if let Some(m) = &self.fail_marker {
                    if r.hypothesis.contains(m.as_str()) {
                        return Err(Error::Transport {
                            retries: 0,
                            message: "mock backend refused request".to_owned(),
                        });
                    }
                }
                self.predict(r.premise, r.hypothesis, dropout, r.seed)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_inputs_same_output() {
        let m = MockBackend::new();
        let a = m.predict("the sky is blue", "it is blue", true, 7).unwrap();
        let b = m.predict("the sky is blue", "it is blue", true, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seed_ignored_without_dropout() {
        let m = MockBackend::new();
        let a = m.predict("p", "h", false, 1).unwrap();
        let b = m.predict("p", "h", false, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_give_different_dropout_samples() {
        let key = pair_key("p", "h");
        // The two seeds must select different noise streams.
        assert_ne!(dropout_key(&key, 1), dropout_key(&key, 2));
        let m = MockBackend::new();
        let a = m.predict("p", "h", true, 1).unwrap();
        let b = m.predict("p", "h", true, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn zero_scale_dropout_matches_deterministic() {
        let m = MockBackend::new().with_dropout_scale(0.0);
        let a = m.predict("p", "h", true, 1).unwrap();
        let b = m.predict("p", "h", false, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rule_draws_beta_entailment() {
        let m = MockBackend::new().with_rule("[pos]", 5.0, 2.0);
        let n = 400;
        let mean: f64 = (0..n)
            .map(|i| m.predict(&format!("doc {i}"), "claim [pos]", false, 0).unwrap().e)
            .sum::<f64>()
            / n as f64;
        // Beta(5, 2) has mean 5/7.
        assert!((mean - 5.0 / 7.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn fail_marker_errors() {
        let m = MockBackend::new().with_fail_marker("BOOM");
        let req = [ClassifyRequest {
            premise: "p",
            hypothesis: "BOOM",
            seed: 0,
        }];
        assert!(matches!(m.classify(&req, false), Err(Error::Transport { .. })));
    }
}
