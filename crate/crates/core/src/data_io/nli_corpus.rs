use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use crate::adaptation::{NliInstance, NliLabel};
use crate::{Error, Result};

/// Read an NLI corpus written by [`write_nli_jsonl`].
pub fn read_nli_jsonl(path: &Path) -> Result<Vec<NliInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: NliInstance = serde_json::from_str(&line)
            .map_err(|e| Error::validation(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        inst.validate()
            .map_err(|e| Error::validation(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        out.push(inst);
    }
    Ok(out)
}

pub fn write_nli_jsonl(path: &Path, instances: &[NliInstance]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_nli_jsonl_to(&mut w, instances).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Serialize one instance per line. Output is a pure function of the input.
pub fn write_nli_jsonl_to<W: Write>(w: &mut W, instances: &[NliInstance]) -> Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut *w, inst)?;
        w.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct AnliRow {
    uid: String,
    #[serde(alias = "premise")]
    context: String,
    hypothesis: String,
    label: String,
}

/// Import an ANLI release file (`train.jsonl` of round `round`).
pub fn load_anli_jsonl(path: &Path, round: u8) -> Result<Vec<NliInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: AnliRow = serde_json::from_str(&line)
            .map_err(|e| Error::validation(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        let label: NliLabel = row
            .label
            .parse()
            .map_err(|e| Error::validation(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        out.push(NliInstance {
            uid: row.uid,
            premise: row.context,
            hypothesis: row.hypothesis,
            label,
            source_round: Some(round),
            augmented: false,
            phrase_used: None,
        });
    }
    Ok(out)
}
