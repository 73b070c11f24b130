use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{instance_uid, FaithfulnessInstance};
use crate::{Error, Result};

/// The nine TRUE corpora used for evaluation and macro averages.
pub const TRUE_CORPORA: [&str; 9] = [
    "frank", "mnbm", "summeval", "qags_x", "qags_c", "begin", "dialfact", "q2", "paws",
];

pub const DIALOGUE_CORPORA: [&str; 3] = ["begin", "dialfact", "q2"];

/// Fact-checking corpora. Loadable, but kept out of default evaluation
/// sets because the base NLI model saw parts of them in training.
pub const FACT_CHECKING_CORPORA: [&str; 2] = ["fever", "vitaminc"];

pub fn is_fact_checking(corpus_id: &str) -> bool {
    FACT_CHECKING_CORPORA.contains(&corpus_id)
}

/// Raw label strings accepted as faithful / unfaithful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub faithful: Vec<String>,
    pub unfaithful: Vec<String>,
}

impl Default for LabelMap {
    fn default() -> Self {
        LabelMap {
            faithful: ["1", "1.0", "true", "faithful", "consistent"]
                .map(String::from)
                .to_vec(),
            unfaithful: ["0", "0.0", "false", "unfaithful", "inconsistent"]
                .map(String::from)
                .to_vec(),
        }
    }
}

impl LabelMap {
    pub fn normalize(&self, raw: &str) -> Option<u8> {
        let raw = raw.trim();
        if self.faithful.iter().any(|l| l.eq_ignore_ascii_case(raw)) {
            Some(1)
        } else if self.unfaithful.iter().any(|l| l.eq_ignore_ascii_case(raw)) {
            Some(0)
        } else {
            None
        }
    }
}

/// Column layout of a TRUE-format CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoaderConfig {
    pub grounding_column: String,
    pub generation_column: String,
    pub label_column: String,
    pub labels: LabelMap,
    pub delimiter: char,
}

impl Default for LoaderConfig {
    fn default() -> Self {
        LoaderConfig {
            grounding_column: "grounding".into(),
            generation_column: "generated_text".into(),
            label_column: "label".into(),
            labels: LabelMap::default(),
            delimiter: ',',
        }
    }
}

pub fn load_true_corpus(path: &Path, corpus_id: &str) -> Result<Vec<FaithfulnessInstance>> {
    load_true_corpus_with(path, corpus_id, &LoaderConfig::default())
}

pub fn load_true_corpus_with(path: &Path, corpus_id: &str, cfg: &LoaderConfig) -> Result<Vec<FaithfulnessInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv_reader(file, cfg.delimiter);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema {
                column: name.to_owned(),
                path: path.display().to_string(),
            })
    };
    let (g, t, l) = (
        col(&cfg.grounding_column)?,
        col(&cfg.generation_column)?,
        col(&cfg.label_column)?,
    );

    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row + 2, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let raw_label = field(l);
        let gold_label = cfg.labels.normalize(raw_label).ok_or_else(|| {
            Error::validation(format!(
                "{}: line {line}: non-binary label `{raw_label}`",
                path.display()
            ))
        })?;
        let (grounding, generation) = (field(g), field(t));
        if grounding.trim().is_empty() || generation.trim().is_empty() {
            return Err(Error::validation(format!(
                "{}: line {line}: empty grounding or generation",
                path.display()
            )));
        }
        out.push(FaithfulnessInstance {
            uid: instance_uid(corpus_id, row),
            corpus_id: corpus_id.to_owned(),
            grounding: grounding.to_owned(),
            generation: generation.to_owned(),
            gold_label,
            generator_model: None,
        });
    }
    if out.is_empty() {
        return Err(Error::validation(format!("{}: no instances", path.display())));
    }
    Ok(out)
}

fn csv_reader<R: Read>(r: R, delimiter: char) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .has_headers(true)
        .quoting(delimiter != '\t')
        .from_reader(r)
}

/// Write instances in the layout [`load_true_corpus`] reads.
pub fn write_true_corpus(path: &Path, instances: &[FaithfulnessInstance]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["grounding", "generated_text", "label"])?;
    for inst in instances {
        w.write_record([
            inst.grounding.as_str(),
            inst.generation.as_str(),
            &inst.gold_label.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Column layout of a BEGIN-v2 TSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeginV2Config {
    pub knowledge_column: String,
    pub response_column: String,
    pub label_column: String,
    pub model_column: String,
    /// Label value that counts as faithful; everything else is unfaithful.
    pub faithful_label: String,
    pub delimiter: char,
}

impl Default for BeginV2Config {
    fn default() -> Self {
        BeginV2Config {
            knowledge_column: "knowledge".into(),
            response_column: "response".into(),
            label_column: "begin_label".into(),
            model_column: "model".into(),
            faithful_label: "Fully attributable".into(),
            delimiter: '\t',
        }
    }
}

/// Load BEGIN-v2, keeping the generator model of every instance.
pub fn load_begin_v2(path: &Path, corpus_id: &str, cfg: &BeginV2Config) -> Result<Vec<FaithfulnessInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv_reader(file, cfg.delimiter);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema {
                column: name.to_owned(),
                path: path.display().to_string(),
            })
    };
    let (k, r, l, m) = (
        col(&cfg.knowledge_column)?,
        col(&cfg.response_column)?,
        col(&cfg.label_column)?,
        col(&cfg.model_column)?,
    );
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(row + 2, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let model = field(m);
        if model.is_empty() {
            return Err(Error::UnsupportedCorpus(format!(
                "{}: line {line}: missing generator model id",
                path.display()
            )));
        }
        out.push(FaithfulnessInstance {
            uid: instance_uid(corpus_id, row),
            corpus_id: corpus_id.to_owned(),
            grounding: field(k).to_owned(),
            generation: field(r).to_owned(),
            gold_label: u8::from(field(l).eq_ignore_ascii_case(&cfg.faithful_label)),
            generator_model: Some(model.to_owned()),
        });
    }
    if out.is_empty() {
        return Err(Error::validation(format!("{}: no instances", path.display())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_assigns_uids() {
        let f = file("grounding,generated_text,label\n\"A, b\",c,1\nd,e,0\n");
        let v = load_true_corpus(f.path(), "q2").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].uid, "q2-000000");
        assert_eq!(v[0].grounding, "A, b");
        assert_eq!(v[1].gold_label, 0);
    }

    #[test]
    fn missing_column_named() {
        let f = file("grounding,text,label\na,b,1\n");
        match load_true_corpus(f.path(), "x") {
            Err(Error::Schema { column, .. }) => assert_eq!(column, "generated_text"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_schema_error() {
        let f = file("");
        assert!(matches!(load_true_corpus(f.path(), "x"), Err(Error::Schema { .. })));
    }

    #[test]
    fn non_binary_label_reports_line() {
        let f = file("grounding,generated_text,label\na,b,1\nc,d,0.5\n");
        let err = load_true_corpus(f.path(), "x").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn custom_label_map() {
        let f = file("doc\tsummary\tconsistency\nx\ty\tyes\nx\tz\tno\n");
        let cfg = LoaderConfig {
            grounding_column: "doc".into(),
            generation_column: "summary".into(),
            label_column: "consistency".into(),
            labels: LabelMap {
                faithful: vec!["yes".into()],
                unfaithful: vec!["no".into()],
            },
            delimiter: '\t',
        };
        let v = load_true_corpus_with(f.path(), "c", &cfg).unwrap();
        assert_eq!(v.iter().map(|i| i.gold_label).collect::<Vec<_>>(), vec![1, 0]);
    }

    #[test]
    fn begin_v2_keeps_models() {
        let f = file(
            "knowledge\tresponse\tbegin_label\tmodel\nk\tI think so\tFully attributable\tgpt2\nk\tno\tGeneric\tt5\n",
        );
        let v = load_begin_v2(f.path(), "begin_v2", &BeginV2Config::default()).unwrap();
        assert_eq!(v[0].generator_model.as_deref(), Some("gpt2"));
        assert_eq!(v[0].gold_label, 1);
        assert_eq!(v[1].gold_label, 0);
    }

    #[test]
    fn begin_v2_without_model_unsupported() {
        let f = file("knowledge\tresponse\tbegin_label\tmodel\nk\tr\tGeneric\t\n");
        assert!(matches!(
            load_begin_v2(f.path(), "b", &BeginV2Config::default()),
            Err(Error::UnsupportedCorpus(_))
        ));
    }

    #[test]
    fn write_then_load_roundtrips() {
        let f = file("grounding,generated_text,label\n\"multi\nline\",\"quote \"\"x\"\"\",1\nd,e,0\n");
        let v = load_true_corpus(f.path(), "rt").unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_true_corpus(out.path(), &v).unwrap();
        assert_eq!(load_true_corpus(out.path(), "rt").unwrap(), v);
    }

    #[test]
    fn fact_checking_flag() {
        assert!(is_fact_checking("fever"));
        assert!(!TRUE_CORPORA.iter().any(|c| is_fact_checking(c)));
    }
}
