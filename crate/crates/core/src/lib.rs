//! Faithfulness metrics built on a three-way NLI classifier.
//!
//! The crate is organised around the workflow of turning an off-the-shelf
//! NLI model into a faithfulness metric and measuring it:
//!
//! * [`nli_scoring`] wraps a pluggable NLI backend and turns its
//!   probability vectors into scores (entailment-only or entailment minus
//!   contradiction), optionally averaging Monte-Carlo dropout samples.
//! * [`adaptation`] builds the dialogue-adapted NLI training corpus and
//!   drives fine-tuning.
//! * [`evaluation_stats`] holds ROC-AUC, bootstrap intervals, paired
//!   randomization tests, ablation deltas and metric ensembles.
//! * [`analysis`] covers pronoun-proxy correlations, score histograms, the
//!   generator-bias study and cost accounting.
//! * [`data_io`] loads corpora, computes class statistics and caches scores.
//! * [`manifest`] records what each run read and wrote.

pub mod adaptation;
pub mod analysis;
pub mod data_io;
pub mod error;
pub mod evaluation_stats;
pub mod manifest;
pub mod nli_scoring;
pub mod rng;

pub use error::{Error, Result};
