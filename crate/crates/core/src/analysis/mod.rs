//! Pronoun-proxy correlations, score histograms, generator-bias study and
//! cost accounting.

mod bias;
mod cost;
mod histogram;
mod kendall;
mod pronoun;

pub use bias::{
    begin_bias_report, begin_bias_report_with, proxy_correlation_report, BiasReport, GeneratorPatterns, ProxyCell,
    ProxyRow, ProxyTable, SkippedCorrelation, CTRL_INDICATOR, FAITHFUL, FAITHFUL_NO_PRONOUN, GOLD_LABEL_ROW,
    GPT2_INDICATOR, PRONOUN,
};
pub use cost::{
    cost_report, count_sentences, CorpusSummary, CostReport, CostRow, MeasuredCalls, OUR_PARAMS, Q2_PARAMS,
    SNT_CONVENTION, SUMMAC_PARAMS, T5_PARAMS,
};
pub use histogram::{score_histogram, HistogramData, DEFAULT_BINS};
pub use kendall::{kendall_tau_b, kendall_tau_b_named, CorrelationResult};
pub use pronoun::{pronoun_indicator, pronoun_indicator_with, PronounDetector, RuleBasedDetector};
