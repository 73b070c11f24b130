use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FaithfulnessInstance;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub corpus_id: String,
    pub n_faithful: usize,
    pub n_unfaithful: usize,
    pub total: usize,
}

impl CorpusStats {
    pub fn new(corpus_id: impl Into<String>, n_faithful: usize, n_unfaithful: usize) -> Self {
        CorpusStats {
            corpus_id: corpus_id.into(),
            n_faithful,
            n_unfaithful,
            total: n_faithful + n_unfaithful,
        }
    }

    pub fn faithful_pct(&self) -> f64 {
        100.0 * self.n_faithful as f64 / self.total as f64
    }

    pub fn unfaithful_pct(&self) -> f64 {
        100.0 * self.n_unfaithful as f64 / self.total as f64
    }

    /// `Faith. | Non. Faith | Total` row with one-decimal percentages.
    pub fn table_row(&self) -> String {
        format!(
            "{}\t{} ({:.1}%)\t{} ({:.1}%)\t{}",
            self.corpus_id,
            self.n_faithful,
            self.faithful_pct(),
            self.n_unfaithful,
            self.unfaithful_pct(),
            self.total
        )
    }
}

/// Class counts for instances of a single corpus.
pub fn corpus_stats(instances: &[FaithfulnessInstance]) -> Result<CorpusStats> {
    let first = instances
        .first()
        .ok_or_else(|| Error::usage("corpus_stats needs at least one instance"))?;
    let mut faithful = 0;
    for inst in instances {
        if inst.corpus_id != first.corpus_id {
            return Err(Error::usage(format!(
                "mixed corpora `{}` and `{}`; split by corpus first",
                first.corpus_id, inst.corpus_id
            )));
        }
        faithful += usize::from(inst.gold_label == 1);
    }
    Ok(CorpusStats::new(&first.corpus_id, faithful, instances.len() - faithful))
}

/// Class counts of the nine TRUE corpora as distributed.
pub fn published_stats() -> BTreeMap<&'static str, CorpusStats> {
    [
        ("frank", 223, 448),
        ("mnbm", 255, 2245),
        ("summeval", 1306, 294),
        ("qags_x", 116, 123),
        ("qags_c", 113, 122),
        ("begin", 282, 554),
        ("dialfact", 3341, 5348),
        ("q2", 628, 460),
        ("paws", 3539, 4461),
    ]
    .into_iter()
    .map(|(id, f, u)| (id, CorpusStats::new(id, f, u)))
    .collect()
}
