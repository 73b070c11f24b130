use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhraseCategory {
    Introductory,
    Hedging,
    Sentiment,
}

impl PhraseCategory {
    pub fn header(self) -> &'static str {
        match self {
            PhraseCategory::Introductory => "Introductory Statements",
            PhraseCategory::Hedging => "Hedging",
            PhraseCategory::Sentiment => "Sentiment",
        }
    }

    fn from_header(h: &str) -> Option<Self> {
        let h = h.to_ascii_lowercase();
        if h.starts_with("intro") {
            Some(PhraseCategory::Introductory)
        } else if h.starts_with("hedg") {
            Some(PhraseCategory::Hedging)
        } else if h.starts_with("sentiment") {
            Some(PhraseCategory::Sentiment)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseEntry {
    pub phrase: String,
    pub category: PhraseCategory,
}

/// Non-empty list of unique augmentation phrases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseSet {
    entries: Vec<PhraseEntry>,
}

const DEFAULT_PHRASES: [(&str, PhraseCategory); 10] = [
    ("Here is what I know:", PhraseCategory::Introductory),
    ("yep. Also", PhraseCategory::Introductory),
    ("Sure! Here is what I know:", PhraseCategory::Introductory),
    ("I am not sure, but", PhraseCategory::Hedging),
    ("I am not sure but I do know that", PhraseCategory::Hedging),
    ("I do not have information on this but", PhraseCategory::Hedging),
    ("I think", PhraseCategory::Hedging),
    ("I believe", PhraseCategory::Hedging),
    ("I love that!", PhraseCategory::Sentiment),
    ("I like that!", PhraseCategory::Sentiment),
];

impl Default for PhraseSet {
    /// The ten curated dialogue phrases.
    fn default() -> Self {
        PhraseSet {
            entries: DEFAULT_PHRASES
                .iter()
                .map(|&(p, c)| PhraseEntry {
                    phrase: p.to_owned(),
                    category: c,
                })
                .collect(),
        }
    }
}

impl PhraseSet {
    pub fn new(entries: Vec<PhraseEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation("phrase set is empty"));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if e.phrase.trim().is_empty() || e.phrase != e.phrase.trim() {
                return Err(Error::validation(format!("bad phrase `{}`", e.phrase)));
            }
            if !seen.insert(e.phrase.as_str()) {
                return Err(Error::validation(format!("duplicate phrase `{}`", e.phrase)));
            }
        }
        Ok(PhraseSet { entries })
    }

    pub fn entries(&self) -> &[PhraseEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.phrase.as_str())
    }

    /// Uniform sample of `m` phrases without replacement. The survivors
    /// keep their original order, so `m == len()` returns the set itself.
    pub fn sample_subset(&self, m: usize, seed: u64) -> Result<PhraseSet> {
        if m == 0 || m > self.len() {
            return Err(Error::usage(format!("subset size {m} outside 1..={}", self.len())));
        }
        let mut idx = index::sample(&mut seeded(seed), self.len(), m).into_vec();
        idx.sort_unstable();
        Ok(PhraseSet {
            entries: idx.into_iter().map(|i| self.entries[i].clone()).collect(),
        })
    }

    /// Parse the text format written by `Display`: `# <category>` headers
    /// followed by one phrase per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut category = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                category = Some(PhraseCategory::from_header(h.trim()).ok_or_else(|| {
                    Error::validation(format!("line {}: unknown phrase category `{}`", i + 1, h.trim()))
                })?);
                continue;
            }
            let category = category
                .ok_or_else(|| Error::validation(format!("line {}: phrase before any category header", i + 1)))?;
            entries.push(PhraseEntry {
                phrase: line.to_owned(),
                category,
            });
        }
        PhraseSet::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PhraseSet::parse(&text)
    }
}

impl fmt::Display for PhraseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut current = None;
        for e in &self.entries {
            if current != Some(e.category) {
                if current.is_some() {
                    writeln!(f)?;
                }
                writeln!(f, "# {}", e.category.header())?;
                current = Some(e.category);
            }
            writeln!(f, "{}", e.phrase)?;
        }
        Ok(())
    }
}

/// `sample_phrase_subset` under its operation name.
pub fn sample_phrase_subset(phrases: &PhraseSet, m: usize, seed: u64) -> Result<PhraseSet> {
    phrases.sample_subset(m, seed)
}
