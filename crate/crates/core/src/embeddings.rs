//! Pre-trained word vectors: loading the fastText text format and aligning
//! vectors to an index vocabulary.
//!
//! Embeddings are frozen: nothing in this crate mutates an
//! [`EmbeddingMatrix`] after it is built.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::index::{TermId, Vocabulary};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: bad header, expected \"count dim\"")]
    BadHeader { line: usize },
    #[error("line {line}: expected {expected} values, found {got}")]
    DimMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: {value:?} is not a number")]
    BadFloat { line: usize, value: String },
    #[error("header declares {declared} vectors, file holds {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("embedding dim {emb} does not match parameter dim {params}")]
    DimConflict { emb: usize, params: usize },
}

/// Word -> vector table loaded from a `.vec` file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    /// Number of duplicate words encountered while loading (last one wins).
    pub duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: HashMap::new(),
            duplicates: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(|v| v.as_slice())
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector length must equal dim");
        if self.vectors.insert(word.to_string(), vector).is_some() {
            self.duplicates += 1;
        }
    }

    /// Writes the table back out in `.vec` text format, words sorted for
    /// determinism.
    pub fn write_vec_format(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{} {}", self.vectors.len(), self.dim)?;
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        for word in words {
            write!(w, "{word}")?;
            for v in &self.vectors[word] {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Parses the fastText `.vec` text format: a `count dim` header line, then
/// one `word v1 .. v_dim` line per vector. Duplicate words keep the last
/// vector and are counted in [`EmbeddingTable::duplicates`].
pub fn load_vectors(reader: impl BufRead) -> Result<EmbeddingTable, EmbeddingError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or(EmbeddingError::BadHeader { line: 1 })??;
    let mut parts = header.split_whitespace();
    let declared: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(EmbeddingError::BadHeader { line: 1 })?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(EmbeddingError::BadHeader { line: 1 })?;
    if parts.next().is_some() || dim == 0 {
        return Err(EmbeddingError::BadHeader { line: 1 });
    }

    let mut table = EmbeddingTable::new(dim);
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line has a first field");
        let mut vector = Vec::with_capacity(dim);
        for field in fields.by_ref() {
            let v: f64 = field.parse().map_err(|_| EmbeddingError::BadFloat {
                line: line_no,
                value: field.to_string(),
            })?;
            vector.push(v);
        }
        if vector.len() != dim {
            return Err(EmbeddingError::DimMismatch {
                line: line_no,
                expected: dim,
                got: vector.len(),
            });
        }
        table.insert(word, vector);
        rows += 1;
    }
    if rows != declared {
        return Err(EmbeddingError::CountMismatch {
            declared,
            found: rows,
        });
    }
    Ok(table)
}

/// How to fill rows for vocabulary terms with no pre-trained vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OovPolicy {
    /// All-zero rows: the term's discrimination value collapses to ReLU(bias).
    Zeros,
    /// Per-term deterministic uniform(-scale, scale) vector, seeded by a hash
    /// of the term string.
    HashUniform { scale: f64, seed: u64 },
}

/// Dense `|V| x dim` embedding matrix, row `t` = the vector for term `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f64>,
    pub oov_ids: std::collections::BTreeSet<TermId>,
}

impl EmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_terms(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, t: TermId) -> &[f64] {
        let start = t as usize * self.dim;
        &self.data[start..start + self.dim]
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Builds the embedding matrix for a vocabulary.
///
/// Lookup order per term: the term string itself, then (when a surface table
/// is given) its most frequent surface form — stemmed index terms usually
/// miss raw-text embeddings, the surface form recovers them. Terms still
/// missing get the OOV policy and are recorded in `oov_ids`.
pub fn align(
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    policy: OovPolicy,
    surfaces: Option<&[String]>,
) -> EmbeddingMatrix {
    let dim = table.dim();
    let mut data = Vec::with_capacity(vocab.len() * dim);
    let mut oov_ids = std::collections::BTreeSet::new();
    for t in 0..vocab.len() as TermId {
        let term = vocab.term(t);
        let vector = table.get(term).or_else(|| {
            surfaces
                .and_then(|s| s.get(t as usize))
                .filter(|s| !s.is_empty())
                .and_then(|s| table.get(s))
        });
        match vector {
            Some(v) => data.extend_from_slice(v),
            None => {
                oov_ids.insert(t);
                match policy {
                    OovPolicy::Zeros => data.extend(std::iter::repeat_n(0.0, dim)),
                    OovPolicy::HashUniform { scale, seed } => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(term.as_bytes()));
                        let dist = Uniform::new(-scale, scale).expect("scale must be positive");
                        data.extend((0..dim).map(|_| dist.sample(&mut rng)));
                    }
                }
            }
        }
    }
    EmbeddingMatrix { dim, data, oov_ids }
}
