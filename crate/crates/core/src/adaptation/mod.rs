//! Dialogue-oriented augmentation of NLI training data and the fine-tuning
//! driver that consumes it.

mod augment;
mod finetune;
mod phrases;
mod robustness;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use augment::{augment_instance, build_augmented_corpus, phrase_assignments, strip_phrase, AUGMENTED_UID_SUFFIX};
pub use finetune::{
    finetune, sweep_learning_rates, CheckpointEval, CurveTrainer, FinetuneOutcome, SelectionRule, SubprocessTrainer,
    TrainConfig, TrainingBackend, PUBLISHED_LEARNING_RATES,
};
pub use phrases::{sample_phrase_subset, PhraseCategory, PhraseEntry, PhraseSet};
pub use robustness::{
    replay_robustness_run, run_robustness_protocol, summarize_repeats, RepeatSummary, RobustnessManifest, RobustnessRun,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entailment,
    Neutral,
    Contradiction,
}

impl FromStr for NliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "e" | "entailment" => Ok(NliLabel::Entailment),
            "n" | "neutral" => Ok(NliLabel::Neutral),
            "c" | "contradiction" => Ok(NliLabel::Contradiction),
            other => Err(Error::validation(format!("unknown NLI label `{other}`"))),
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NliLabel::Entailment => "entailment",
            NliLabel::Neutral => "neutral",
            NliLabel::Contradiction => "contradiction",
        })
    }
}

/// One NLI training example. `augmented` is set exactly when
/// `phrase_used` is present, and then the hypothesis starts with the
/// phrase followed by one space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliInstance {
    pub uid: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: NliLabel,
    pub source_round: Option<u8>,
    pub augmented: bool,
    pub phrase_used: Option<String>,
}

impl NliInstance {
    pub fn validate(&self) -> Result<()> {
        match (self.augmented, &self.phrase_used) {
            (false, None) => Ok(()),
            (true, Some(p)) if self.hypothesis.starts_with(&format!("{p} ")) => Ok(()),
            (true, Some(p)) => Err(Error::validation(format!(
                "{}: hypothesis does not start with phrase `{p}`",
                self.uid
            ))),
            _ => Err(Error::validation(format!(
                "{}: augmented flag and phrase_used disagree",
                self.uid
            ))),
        }
    }
}
