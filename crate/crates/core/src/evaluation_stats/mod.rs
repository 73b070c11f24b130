//! ROC-AUC, bootstrap intervals, paired randomization tests, ablation
//! deltas, macro averages and metric ensembles.

mod auc;
mod bootstrap;
mod ensemble;
mod report;
mod significance;

pub use auc::roc_auc;
pub use bootstrap::{
    ablation_diff, bootstrap_aucs, bootstrap_ci, percentile_interval, AblationDiff, DEFAULT_ALPHA, DEFAULT_BOOTSTRAP,
};
pub use ensemble::{ensemble_scores, CombinationRule, Ensemble, MinMaxMean, RawMean};
pub use report::{
    align_with_gold, corpus_seed, evaluate_corpus, evaluate_metric, macro_average, render_grid, write_ablation_csv,
    write_report_csv, write_significance_csv, CorpusEvaluation, CorpusRow, CorpusScores, EvalReport, MacroRow,
};
pub use significance::{paired_randomization_test, SignificanceResult, DEFAULT_PERMUTATIONS};
