//! Corpus ingestion, class statistics, score files and the score cache.

mod cache;
mod nli_corpus;
mod scores;
mod stats;
mod true_corpus;

use serde::{Deserialize, Serialize};

pub use cache::{cache_get_or_score, CacheKey, ScoreCache};
pub use nli_corpus::{load_anli_jsonl, read_nli_jsonl, write_nli_jsonl, write_nli_jsonl_to};
pub use scores::{read_score_file, write_score_file, ScoreRow};
pub use stats::{corpus_stats, published_stats, CorpusStats};
pub use true_corpus::{
    is_fact_checking, load_begin_v2, load_true_corpus, load_true_corpus_with, write_true_corpus, BeginV2Config,
    LabelMap, LoaderConfig, DIALOGUE_CORPORA, FACT_CHECKING_CORPORA, TRUE_CORPORA,
};

/// One grounding/generation pair with a binary faithfulness label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaithfulnessInstance {
    pub uid: String,
    pub corpus_id: String,
    pub grounding: String,
    pub generation: String,
    /// 1 = faithful.
    pub gold_label: u8,
    pub generator_model: Option<String>,
}

/// Stable id for row `row` (0-based) of `corpus_id`.
pub fn instance_uid(corpus_id: &str, row: usize) -> String {
    format!("{corpus_id}-{row:06}")
}
