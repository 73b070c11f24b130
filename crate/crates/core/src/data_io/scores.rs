use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One line of a score file: `uid,corpus,metric,score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub uid: String,
    pub corpus: String,
    pub metric: String,
    pub score: f64,
}

pub fn write_score_file(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_score_file(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    for col in ["uid", "corpus", "metric", "score"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Schema {
                column: col.to_owned(),
                path: path.display().to_string(),
            });
        }
    }
    let mut rows = Vec::new();
    for row in r.deserialize() {
        let row: ScoreRow = row?;
        if !row.score.is_finite() {
            return Err(Error::validation(format!(
                "{}: non-finite score for {}",
                path.display(),
                row.uid
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}
