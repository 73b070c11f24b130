//! NLI backends and faithfulness scoring.

mod backend;
mod local;
mod mock;
mod probs;
mod remote;
mod scorer;

pub use backend::{BackendHandle, BackendKind, ClassifyRequest, NliBackend, WireRequest, WireResponse};
pub use local::{LocalModelBackend, DEFAULT_CHECKPOINT};
pub use mock::{dropout_key, pair_key, MockBackend, MockRule, DEFAULT_DROPOUT_SCALE};
pub use probs::{e_minus_c, mc_aggregate, NliProbs, SUM_TOLERANCE};
pub use remote::RemoteBackend;
pub use scorer::{
    score_dataset, score_pair, truncate_premise, MetricConfig, ScoreMode, ScoreRecord, DEFAULT_BATCH_SIZE,
    DEFAULT_MAX_PREMISE_TOKENS, DEFAULT_MC_SAMPLES,
};
