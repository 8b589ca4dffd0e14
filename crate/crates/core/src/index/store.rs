//! On-disk index container.
//!
//! Layout (all integers little-endian, strings are `u32` length + UTF-8):
//!
//! ```text
//! magic      b"TDVI"
//! version    u32 (currently 1)
//! kind       u8  (0 = raw tf index, 1 = weighted index)
//! flags      u8  (bit 0: tdv vector present, bit 1: surface table present)
//! stemmer    u8  (0 = none, 1 = porter)
//! lowercase  u8  (0/1)
//! stopwords  u32 count, then that many strings
//! num_terms  u32
//! num_docs   u32
//! vocab      num_terms strings (term for id 0, 1, ...)
//! docs       per doc: docno string, then doc length (u64 for raw, f64 bits
//!            for weighted)
//! postings   per term: u32 entry count, then entries as (doc-id delta u32,
//!            tf u32) for raw or (delta u32, tf u32, weight f64) for
//!            weighted; doc ids are ascending, first entry stores the id
//! tdv        if flagged: num_terms f64 values
//! surfaces   if flagged: num_terms strings
//! ```
//!
//! `load(save(x)) == x` exactly, including every derived statistic.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::corpus::{PreprocessConfig, StemmerKind};

use super::{Posting, SparseIndex, Vocabulary, WeightedIndex, WeightedPosting};

const MAGIC: [u8; 4] = *b"TDVI";
const VERSION: u32 = 1;
const FLAG_TDV: u8 = 1;
const FLAG_SURFACES: u8 = 1 << 1;
/// Upper bound on stored string lengths, to fail fast on corrupt files.
const MAX_STRING: u32 = 1 << 22;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("not an index file (bad magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported index format version {0}")]
    UnsupportedVersion(u32),
    #[error("index file is truncated")]
    Truncated,
    #[error("corrupt index file: {0}")]
    Corrupt(String),
}

fn eof_as_truncated(e: io::Error) -> StoreError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        StoreError::Truncated
    } else {
        StoreError::Io(e)
    }
}

/// Everything one index file holds: the vocabulary, the text-normalization
/// settings it was built with, the optional surface-form table, and the
/// postings themselves (raw or weighted).
#[derive(Debug, Clone, PartialEq)]
pub struct IndexFile {
    pub vocab: Vocabulary,
    pub preprocess: PreprocessConfig,
    pub surfaces: Option<Vec<String>>,
    pub kind: IndexKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IndexKind {
    Raw(SparseIndex),
    Weighted(WeightedIndex),
}

impl IndexFile {
    pub fn num_docs(&self) -> usize {
        match &self.kind {
            IndexKind::Raw(i) => i.num_docs(),
            IndexKind::Weighted(i) => i.num_docs(),
        }
    }

    pub fn num_terms(&self) -> usize {
        match &self.kind {
            IndexKind::Raw(i) => i.num_terms(),
            IndexKind::Weighted(i) => i.num_terms(),
        }
    }

    pub fn postings_entries(&self) -> u64 {
        match &self.kind {
            IndexKind::Raw(i) => (0..i.num_terms()).map(|t| i.postings[t].len() as u64).sum(),
            IndexKind::Weighted(i) => (0..i.num_terms()).map(|t| i.postings[t].len() as u64).sum(),
        }
    }

    pub fn save(&self, writer: impl Write) -> Result<(), StoreError> {
        save_index(self, writer)
    }

    pub fn save_to_vec(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        save_index(self, &mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        save_index(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(reader: impl Read) -> Result<Self, StoreError> {
        load_index(reader)
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        load_index(BufReader::new(File::open(path)?))
    }
}

fn write_string(w: &mut impl Write, s: &str) -> Result<(), StoreError> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_string(r: &mut impl Read) -> Result<String, StoreError> {
    let len = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)?;
    if len > MAX_STRING {
        return Err(StoreError::Corrupt(format!(
            "string length {len} too large"
        )));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf).map_err(eof_as_truncated)?;
    String::from_utf8(buf).map_err(|_| StoreError::Corrupt("string is not UTF-8".into()))
}

pub fn save_index(file: &IndexFile, mut w: impl Write) -> Result<(), StoreError> {
    w.write_all(&MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    let (kind, has_tdv) = match &file.kind {
        IndexKind::Raw(_) => (0u8, false),
        IndexKind::Weighted(_) => (1u8, true),
    };
    w.write_u8(kind)?;
    let mut flags = 0u8;
    if has_tdv {
        flags |= FLAG_TDV;
    }
    if file.surfaces.is_some() {
        flags |= FLAG_SURFACES;
    }
    w.write_u8(flags)?;
    w.write_u8(match file.preprocess.stemmer {
        StemmerKind::None => 0,
        StemmerKind::Porter => 1,
    })?;
    w.write_u8(file.preprocess.lowercase as u8)?;
    w.write_u32::<LittleEndian>(file.preprocess.stopwords.len() as u32)?;
    for word in &file.preprocess.stopwords {
        write_string(&mut w, word)?;
    }

    let (num_terms, num_docs) = (file.num_terms(), file.num_docs());
    w.write_u32::<LittleEndian>(num_terms as u32)?;
    w.write_u32::<LittleEndian>(num_docs as u32)?;
    for term in file.vocab.terms() {
        write_string(&mut w, term)?;
    }

    match &file.kind {
        IndexKind::Raw(idx) => {
            for d in 0..num_docs {
                write_string(&mut w, &idx.docnos[d])?;
                w.write_u64::<LittleEndian>(idx.doc_lens[d])?;
            }
            for row in &idx.postings {
                w.write_u32::<LittleEndian>(row.len() as u32)?;
                let mut prev = 0u32;
                for (i, p) in row.iter().enumerate() {
                    let delta = if i == 0 { p.doc } else { p.doc - prev };
                    prev = p.doc;
                    w.write_u32::<LittleEndian>(delta)?;
                    w.write_u32::<LittleEndian>(p.tf)?;
                }
            }
        }
        IndexKind::Weighted(idx) => {
            for d in 0..num_docs {
                write_string(&mut w, &idx.docnos[d])?;
                w.write_f64::<LittleEndian>(idx.doc_lens[d])?;
            }
            for row in &idx.postings {
                w.write_u32::<LittleEndian>(row.len() as u32)?;
                let mut prev = 0u32;
                for (i, p) in row.iter().enumerate() {
                    let delta = if i == 0 { p.doc } else { p.doc - prev };
                    prev = p.doc;
                    w.write_u32::<LittleEndian>(delta)?;
                    w.write_u32::<LittleEndian>(p.tf)?;
                    w.write_f64::<LittleEndian>(p.weight)?;
                }
            }
            for &v in &idx.tdv {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
    }

    if let Some(surfaces) = &file.surfaces {
        for s in surfaces {
            write_string(&mut w, s)?;
        }
    }
    Ok(())
}

pub fn load_index(mut r: impl Read) -> Result<IndexFile, StoreError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(eof_as_truncated)?;
    if magic != MAGIC {
        return Err(StoreError::BadMagic(magic));
    }
    let version = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)?;
    if version != VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let kind = r.read_u8().map_err(eof_as_truncated)?;
    let flags = r.read_u8().map_err(eof_as_truncated)?;
    let stemmer = match r.read_u8().map_err(eof_as_truncated)? {
        0 => StemmerKind::None,
        1 => StemmerKind::Porter,
        other => return Err(StoreError::Corrupt(format!("unknown stemmer tag {other}"))),
    };
    let lowercase = r.read_u8().map_err(eof_as_truncated)? != 0;
    let stop_count = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)?;
    let mut stopwords = BTreeSet::new();
    for _ in 0..stop_count {
        stopwords.insert(read_string(&mut r)?);
    }
    let preprocess = PreprocessConfig {
        stopwords,
        stemmer,
        lowercase,
    };

    let num_terms = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)? as usize;
    let num_docs = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)? as usize;
    let mut terms = Vec::with_capacity(num_terms);
    for _ in 0..num_terms {
        terms.push(read_string(&mut r)?);
    }
    let vocab = Vocabulary::from_terms(terms);

    let kind = match kind {
        0 => {
            let mut docnos = Vec::with_capacity(num_docs);
            let mut doc_lens = Vec::with_capacity(num_docs);
            for _ in 0..num_docs {
                docnos.push(read_string(&mut r)?);
                doc_lens.push(r.read_u64::<LittleEndian>().map_err(eof_as_truncated)?);
            }
            let mut postings = Vec::with_capacity(num_terms);
            for _ in 0..num_terms {
                let count = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)?;
                let mut row = Vec::with_capacity(count as usize);
                let mut doc = 0u32;
                for i in 0..count {
                    let delta = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)?;
                    doc = if i == 0 { delta } else { doc + delta };
                    let tf = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)?;
                    if tf == 0 {
                        return Err(StoreError::Corrupt("raw posting with tf = 0".into()));
                    }
                    row.push(Posting { doc, tf });
                }
                postings.push(row);
            }
            IndexKind::Raw(SparseIndex::from_parts(postings, doc_lens, docnos))
        }
        1 => {
            if flags & FLAG_TDV == 0 {
                return Err(StoreError::Corrupt("weighted index without tdv".into()));
            }
            let mut docnos = Vec::with_capacity(num_docs);
            let mut stored_lens = Vec::with_capacity(num_docs);
            for _ in 0..num_docs {
                docnos.push(read_string(&mut r)?);
                stored_lens.push(r.read_f64::<LittleEndian>().map_err(eof_as_truncated)?);
            }
            let mut postings = Vec::with_capacity(num_terms);
            for _ in 0..num_terms {
                let count = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)?;
                let mut row = Vec::with_capacity(count as usize);
                let mut doc = 0u32;
                for i in 0..count {
                    let delta = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)?;
                    doc = if i == 0 { delta } else { doc + delta };
                    let tf = r.read_u32::<LittleEndian>().map_err(eof_as_truncated)?;
                    let weight = r.read_f64::<LittleEndian>().map_err(eof_as_truncated)?;
                    row.push(WeightedPosting { doc, tf, weight });
                }
                postings.push(row);
            }
            let mut tdv = Vec::with_capacity(num_terms);
            for _ in 0..num_terms {
                tdv.push(r.read_f64::<LittleEndian>().map_err(eof_as_truncated)?);
            }
            let widx = WeightedIndex::from_parts(postings, tdv, num_docs, docnos);
            // Stored lengths double as an integrity check: the recomputation
            // is deterministic, so they must match bit for bit.
            for (d, &stored) in stored_lens.iter().enumerate() {
                if widx.doc_lens[d].to_bits() != stored.to_bits() {
                    return Err(StoreError::Corrupt(format!(
                        "doc {d} length mismatch: stored {stored}, recomputed {}",
                        widx.doc_lens[d]
                    )));
                }
            }
            IndexKind::Weighted(widx)
        }
        other => return Err(StoreError::Corrupt(format!("unknown index kind {other}"))),
    };

    let surfaces = if flags & FLAG_SURFACES != 0 {
        let mut v = Vec::with_capacity(num_terms);
        for _ in 0..num_terms {
            v.push(read_string(&mut r)?);
        }
        Some(v)
    } else {
        None
    };

    Ok(IndexFile {
        vocab,
        preprocess,
        surfaces,
        kind,
    })
}
