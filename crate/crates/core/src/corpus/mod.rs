//! Collection ingestion: TREC file parsing and text normalization.
//!
//! Text goes through a fixed pipeline: tokenize on non-alphanumeric
//! boundaries, lowercase, drop stopwords, stem. Stopword matching happens
//! after lowercasing and before stemming.

mod porter;
pub mod trec;

use std::collections::{BTreeSet, HashMap};
use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use trec::{parse_qrels, parse_trec_documents, parse_trec_topics, write_qrels, TopicsParse};

/// A raw document pulled out of a TREC SGML file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDoc {
    pub docno: String,
    pub text: String,
}

/// A TREC topic; the title is used as the query text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub qid: String,
    pub title: String,
}

/// Relevance judgments: (qid, docno) -> grade. Duplicate lines keep the last
/// grade seen.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelSet {
    grades: std::collections::BTreeMap<String, std::collections::BTreeMap<String, u32>>,
}

impl QrelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, qid: &str, docno: &str, grade: u32) {
        self.grades
            .entry(qid.to_string())
            .or_default()
            .insert(docno.to_string(), grade);
    }

    pub fn grade(&self, qid: &str, docno: &str) -> Option<u32> {
        self.grades.get(qid).and_then(|m| m.get(docno)).copied()
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.grades.keys().map(|s| s.as_str())
    }

    /// Judged documents for a query, in docno order.
    pub fn judged(&self, qid: &str) -> impl Iterator<Item = (&str, u32)> {
        self.grades
            .get(qid)
            .into_iter()
            .flat_map(|m| m.iter().map(|(d, g)| (d.as_str(), *g)))
    }

    pub fn positives(&self, qid: &str) -> impl Iterator<Item = (&str, u32)> {
        self.judged(qid).filter(|&(_, g)| g > 0)
    }

    pub fn has_positives(&self, qid: &str) -> bool {
        self.positives(qid).next().is_some()
    }

    pub fn len(&self) -> usize {
        self.grades.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.grades.is_empty()
    }
}

/// Which stemmer the pipeline applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StemmerKind {
    Porter,
    None,
}

/// Normalization settings. Shared between indexing and query parsing so both
/// sides tokenize identically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub stopwords: BTreeSet<String>,
    pub stemmer: StemmerKind,
    pub lowercase: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            stopwords: BTreeSet::new(),
            stemmer: StemmerKind::Porter,
            lowercase: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("document block at byte {offset} has no DOCNO")]
    MissingDocno { offset: usize },
    #[error("document block at byte {offset} is not terminated")]
    UnterminatedBlock { offset: usize },
    #[error("topic block {block}: {reason}")]
    BadTopic { block: usize, reason: String },
    #[error("qrels line {line}: {reason}")]
    QrelLine { line: usize, reason: String },
}

/// Tokenizes and normalizes `text` according to `cfg`.
///
/// Tokens are maximal runs of alphanumeric characters. The pipeline is
/// lowercase -> stopword filter -> stem, and it never adds tokens.
pub fn preprocess(text: &str, cfg: &PreprocessConfig) -> Vec<String> {
    let mut out = Vec::new();
    for_each_token(text, cfg, |token, _surface| out.push(token));
    out
}

/// Like [`preprocess`] but also records, for every emitted token, the surface
/// form it came from (the lowercased pre-stemming text). The embedding
/// aligner uses the surface table to look up vectors for stemmed terms.
pub fn preprocess_recording(
    text: &str,
    cfg: &PreprocessConfig,
    surfaces: &mut SurfaceForms,
) -> Vec<String> {
    let mut out = Vec::new();
    for_each_token(text, cfg, |token, surface| {
        surfaces.record(&token, surface);
        out.push(token);
    });
    out
}

fn for_each_token(text: &str, cfg: &PreprocessConfig, mut emit: impl FnMut(String, &str)) {
    for raw in text.split(|c: char| !c.is_alphanumeric()) {
        if raw.is_empty() {
            continue;
        }
        let surface = if cfg.lowercase {
            raw.to_lowercase()
        } else {
            raw.to_string()
        };
        if cfg.stopwords.contains(&surface) {
            continue;
        }
        let token = match cfg.stemmer {
            StemmerKind::Porter => porter::stem(&surface),
            StemmerKind::None => surface.clone(),
        };
        emit(token, &surface);
    }
}

/// Loads a stopword file: UTF-8, one token per line, `#` starts a comment.
pub fn load_stopwords(reader: impl BufRead) -> io::Result<BTreeSet<String>> {
    let mut set = BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        let word = line.split('#').next().unwrap_or("").trim();
        if !word.is_empty() {
            set.insert(word.to_string());
        }
    }
    Ok(set)
}

/// Counts which surface forms produced each indexed token, so that stemmed
/// vocabulary terms can be mapped back to a real word for embedding lookup.
#[derive(Debug, Clone, Default)]
pub struct SurfaceForms {
    counts: HashMap<String, HashMap<String, u32>>,
}

impl SurfaceForms {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, token: &str, surface: &str) {
        *self
            .counts
            .entry(token.to_string())
            .or_default()
            .entry(surface.to_string())
            .or_insert(0) += 1;
    }

    /// Most frequent surface form for a token; ties break to the
    /// lexicographically smallest so the result is deterministic.
    pub fn best(&self, token: &str) -> Option<&str> {
        let forms = self.counts.get(token)?;
        forms
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(s, _)| s.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(stops: &[&str], stemmer: StemmerKind) -> PreprocessConfig {
        PreprocessConfig {
            stopwords: stops.iter().map(|s| s.to_string()).collect(),
            stemmer,
            lowercase: true,
        }
    }

    #[test]
    fn pipeline_lowercases_filters_then_stems() {
        let out = preprocess("The Apples", &cfg(&["the"], StemmerKind::Porter));
        assert_eq!(out, vec!["appl"]);
    }

    #[test]
    fn empty_input_gives_empty_output() {
        assert!(preprocess("", &cfg(&[], StemmerKind::Porter)).is_empty());
        assert!(preprocess("  \t\n", &cfg(&[], StemmerKind::Porter)).is_empty());
    }

    #[test]
    fn counts_preserved_without_stemming() {
        let out = preprocess("apple apple", &cfg(&[], StemmerKind::None));
        assert_eq!(out, vec!["apple", "apple"]);
    }

    #[test]
    fn splits_on_non_alphanumeric_and_keeps_digits() {
        let out = preprocess("foo-bar, 1984!", &cfg(&[], StemmerKind::None));
        assert_eq!(out, vec!["foo", "bar", "1984"]);
    }

    #[test]
    fn stopwords_match_after_lowercasing_before_stemming() {
        // "apples" is not in the list but its stem "appl" could be; filtering
        // happens on the surface form, so the token survives.
        let out = preprocess("Apples", &cfg(&["appl"], StemmerKind::Porter));
        assert_eq!(out, vec!["appl"]);
        let out = preprocess("THE", &cfg(&["the"], StemmerKind::Porter));
        assert!(out.is_empty());
    }

    #[test]
    fn idempotent_when_not_stemming() {
        let c = cfg(&["the", "of"], StemmerKind::None);
        let once = preprocess("The Quick-Brown fox of doom 7x", &c);
        let again = preprocess(&once.join(" "), &c);
        assert_eq!(once, again);
    }

    #[test]
    fn token_count_never_increases() {
        let c = cfg(&["the"], StemmerKind::Porter);
        let text = "The cats were chasing the ponies";
        let raw_count = text.split_whitespace().count();
        assert!(preprocess(text, &c).len() <= raw_count);
    }

    #[test]
    fn surface_forms_track_most_frequent() {
        let mut sf = SurfaceForms::new();
        let c = cfg(&[], StemmerKind::Porter);
        preprocess_recording("pony ponies ponies", &c, &mut sf);
        assert_eq!(sf.best("poni"), Some("ponies"));
        assert_eq!(sf.best("missing"), None);
    }

    #[test]
    fn stopword_file_ignores_comments_and_blanks() {
        let data = "the\n# a comment\n  of  \n\nand # trailing\n";
        let set = load_stopwords(data.as_bytes()).unwrap();
        let expect: BTreeSet<String> = ["the", "of", "and"].iter().map(|s| s.to_string()).collect();
        assert_eq!(set, expect);
    }

    #[test]
    fn qrels_last_grade_wins() {
        let mut q = QrelSet::new();
        q.insert("51", "A1", 1);
        q.insert("51", "A1", 0);
        assert_eq!(q.grade("51", "A1"), Some(0));
    }
}
