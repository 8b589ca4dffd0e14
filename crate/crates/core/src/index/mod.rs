//! The inverted index: a sparse term-document matrix of term frequencies,
//! the collection statistics derived from it, and its TDV-weighted variant.
//!
//! Rows of the matrix are posting lists, columns are document bag-of-words
//! vectors. All ranking statistics (idf flavors, language-model term
//! probabilities, document lengths) are functions of the matrix, so the same
//! code computes them for the raw index and for a weighted index whose
//! entries are `tf * tdv`.

pub mod store;

use std::collections::HashMap;

use thiserror::Error;

pub type TermId = u32;
pub type DocId = u32;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate docno {0:?}")]
    DuplicateDocno(String),
    #[error("tdv vector has {got} entries, vocabulary has {expected}")]
    TdvLength { expected: usize, got: usize },
    #[error("tdv for term {term} is {value}, must be finite and >= 0")]
    InvalidTdv { term: TermId, value: f64 },
    #[error("index has no postings with nonzero weight")]
    EmptyIndex,
    #[error("collection has zero total mass")]
    ZeroMass,
}

/// Bidirectional term <-> dense id mapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    ids: HashMap<String, TermId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.ids.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.terms[id as usize]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|s| s.as_str())
    }

    pub(crate) fn intern(&mut self, term: &str) -> TermId {
        if let Some(&id) = self.ids.get(term) {
            return id;
        }
        let id = self.terms.len() as TermId;
        self.terms.push(term.to_string());
        self.ids.insert(term.to_string(), id);
        id
    }

    pub(crate) fn from_terms(terms: Vec<String>) -> Self {
        let ids = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TermId))
            .collect();
        Self { terms, ids }
    }
}

/// One posting entry in the raw index: the term occurs `tf` times in `doc`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: DocId,
    pub tf: u32,
}

/// The raw term-frequency index. Posting lists are sorted by doc id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseIndex {
    postings: Vec<Vec<Posting>>,
    doc_lens: Vec<u64>,
    row_sums: Vec<u64>,
    total_tokens: u64,
    docnos: Vec<String>,
    docno_ids: HashMap<String, DocId>,
}

impl SparseIndex {
    pub fn postings(&self, t: TermId) -> &[Posting] {
        &self.postings[t as usize]
    }

    pub fn num_docs(&self) -> usize {
        self.docnos.len()
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub(crate) fn from_parts(
        postings: Vec<Vec<Posting>>,
        doc_lens: Vec<u64>,
        docnos: Vec<String>,
    ) -> Self {
        let row_sums: Vec<u64> = postings
            .iter()
            .map(|row| row.iter().map(|p| p.tf as u64).sum())
            .collect();
        let total_tokens = row_sums.iter().sum();
        let docno_ids = docnos
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i as DocId))
            .collect();
        Self {
            postings,
            doc_lens,
            row_sums,
            total_tokens,
            docnos,
            docno_ids,
        }
    }
}

/// One posting entry of the weighted index: `weight = tf * tdv(term)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPosting {
    pub doc: DocId,
    pub tf: u32,
    pub weight: f64,
}

/// TDV-weighted index. Shares the shape of [`SparseIndex`] but entries are
/// reals, and every derived statistic (document lengths, average length, row
/// sums, total mass) is recomputed from the weighted entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedIndex {
    postings: Vec<Vec<WeightedPosting>>,
    tdv: Vec<f64>,
    doc_lens: Vec<f64>,
    row_sums: Vec<f64>,
    total_mass: f64,
    avgdl: f64,
    docnos: Vec<String>,
    docno_ids: HashMap<String, DocId>,
}

impl WeightedIndex {
    pub fn postings(&self, t: TermId) -> &[WeightedPosting] {
        &self.postings[t as usize]
    }

    pub fn tdv(&self) -> &[f64] {
        &self.tdv
    }

    pub fn num_docs(&self) -> usize {
        self.docnos.len()
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    /// Rebuilds the derived statistics from the posting entries. Entries with
    /// zero weight contribute nothing, so pruning them leaves every statistic
    /// bit-identical.
    fn finalize(
        postings: Vec<Vec<WeightedPosting>>,
        tdv: Vec<f64>,
        num_docs: usize,
        docnos: Vec<String>,
        docno_ids: HashMap<String, DocId>,
    ) -> Self {
        let mut doc_lens = vec![0.0; num_docs];
        let mut row_sums = vec![0.0; postings.len()];
        for (t, row) in postings.iter().enumerate() {
            let mut sum = 0.0;
            for p in row {
                if p.weight != 0.0 {
                    sum += p.weight;
                    doc_lens[p.doc as usize] += p.weight;
                }
            }
            row_sums[t] = sum;
        }
        let total_mass: f64 = row_sums.iter().sum();
        let avgdl = if num_docs > 0 {
            doc_lens.iter().sum::<f64>() / num_docs as f64
        } else {
            0.0
        };
        Self {
            postings,
            tdv,
            doc_lens,
            row_sums,
            total_mass,
            avgdl,
            docnos,
            docno_ids,
        }
    }

    pub(crate) fn from_parts(
        postings: Vec<Vec<WeightedPosting>>,
        tdv: Vec<f64>,
        doc_count: usize,
        docnos: Vec<String>,
    ) -> Self {
        let docno_ids = docnos
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i as DocId))
            .collect();
        Self::finalize(postings, tdv, doc_count, docnos, docno_ids)
    }
}

/// Read-only view shared by the raw and the weighted index, exposing entries
/// as reals. Rankers and statistics are written against this trait.
pub trait PostingsView {
    fn num_terms(&self) -> usize;
    fn num_docs(&self) -> usize;
    fn postings_len(&self, t: TermId) -> usize;
    fn posting_at(&self, t: TermId, i: usize) -> (DocId, f64);
    /// Raw term frequency at a posting position (the unweighted entry).
    fn tf_at(&self, t: TermId, i: usize) -> f64;
    fn doc_len(&self, d: DocId) -> f64;
    fn avgdl(&self) -> f64;
    fn row_l1(&self, t: TermId) -> f64;
    fn total_mass(&self) -> f64;
    fn docno(&self, d: DocId) -> &str;
    fn doc_id(&self, docno: &str) -> Option<DocId>;

    /// Posting position of (t, d), if the entry exists.
    fn find(&self, t: TermId, d: DocId) -> Option<usize> {
        let mut lo = 0;
        let mut hi = self.postings_len(t);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let (doc, _) = self.posting_at(t, mid);
            match doc.cmp(&d) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Weight of (t, d), 0.0 when the entry is absent.
    fn weight(&self, t: TermId, d: DocId) -> f64 {
        self.find(t, d).map_or(0.0, |i| self.posting_at(t, i).1)
    }
}

impl PostingsView for SparseIndex {
    fn num_terms(&self) -> usize {
        self.postings.len()
    }
    fn num_docs(&self) -> usize {
        self.docnos.len()
    }
    fn postings_len(&self, t: TermId) -> usize {
        self.postings[t as usize].len()
    }
    fn posting_at(&self, t: TermId, i: usize) -> (DocId, f64) {
        let p = self.postings[t as usize][i];
        (p.doc, p.tf as f64)
    }
    fn tf_at(&self, t: TermId, i: usize) -> f64 {
        self.postings[t as usize][i].tf as f64
    }
    fn doc_len(&self, d: DocId) -> f64 {
        self.doc_lens[d as usize] as f64
    }
    fn avgdl(&self) -> f64 {
        if self.docnos.is_empty() {
            0.0
        } else {
            self.total_tokens as f64 / self.docnos.len() as f64
        }
    }
    fn row_l1(&self, t: TermId) -> f64 {
        self.row_sums[t as usize] as f64
    }
    fn total_mass(&self) -> f64 {
        self.total_tokens as f64
    }
    fn docno(&self, d: DocId) -> &str {
        &self.docnos[d as usize]
    }
    fn doc_id(&self, docno: &str) -> Option<DocId> {
        self.docno_ids.get(docno).copied()
    }
}

impl PostingsView for WeightedIndex {
    fn num_terms(&self) -> usize {
        self.postings.len()
    }
    fn num_docs(&self) -> usize {
        self.docnos.len()
    }
    fn postings_len(&self, t: TermId) -> usize {
        self.postings[t as usize].len()
    }
    fn posting_at(&self, t: TermId, i: usize) -> (DocId, f64) {
        let p = self.postings[t as usize][i];
        (p.doc, p.weight)
    }
    fn tf_at(&self, t: TermId, i: usize) -> f64 {
        self.postings[t as usize][i].tf as f64
    }
    fn doc_len(&self, d: DocId) -> f64 {
        self.doc_lens[d as usize]
    }
    fn avgdl(&self) -> f64 {
        self.avgdl
    }
    fn row_l1(&self, t: TermId) -> f64 {
        self.row_sums[t as usize]
    }
    fn total_mass(&self) -> f64 {
        self.total_mass
    }
    fn docno(&self, d: DocId) -> &str {
        &self.docnos[d as usize]
    }
    fn doc_id(&self, docno: &str) -> Option<DocId> {
        self.docno_ids.get(docno).copied()
    }
}

/// Builds the vocabulary and index from tokenized documents.
pub fn build_index<S, I, T>(docs: I) -> Result<(Vocabulary, SparseIndex), IndexError>
where
    S: AsRef<str>,
    T: AsRef<str>,
    I: IntoIterator<Item = (S, Vec<T>)>,
{
    let mut vocab = Vocabulary::new();
    let mut postings: Vec<Vec<Posting>> = Vec::new();
    let mut doc_lens = Vec::new();
    let mut docnos = Vec::new();
    let mut seen: HashMap<String, ()> = HashMap::new();

    for (docno, tokens) in docs {
        let docno = docno.as_ref().to_string();
        if seen.insert(docno.clone(), ()).is_some() {
            return Err(IndexError::DuplicateDocno(docno));
        }
        let doc = docnos.len() as DocId;
        // Per-document term counts, in first-seen order.
        let mut counts: HashMap<TermId, u32> = HashMap::new();
        for tok in &tokens {
            let t = vocab.intern(tok.as_ref());
            *counts.entry(t).or_insert(0) += 1;
        }
        postings.resize_with(vocab.len(), Vec::new);
        let mut entries: Vec<(TermId, u32)> = counts.into_iter().collect();
        entries.sort_unstable_by_key(|&(t, _)| t);
        for (t, tf) in entries {
            postings[t as usize].push(Posting { doc, tf });
        }
        doc_lens.push(tokens.len() as u64);
        docnos.push(docno);
    }
    Ok((vocab, SparseIndex::from_parts(postings, doc_lens, docnos)))
}

/// Sparse bag-of-words counts over a vocabulary. Tokens not in the
/// vocabulary are dropped and tallied in `oov`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bow {
    entries: Vec<(TermId, u32)>,
    oov: u32,
}

impl Bow {
    pub fn from_entries(mut entries: Vec<(TermId, u32)>, oov: u32) -> Self {
        entries.sort_unstable_by_key(|&(t, _)| t);
        Self { entries, oov }
    }

    pub fn iter(&self) -> impl Iterator<Item = (TermId, u32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn count(&self, t: TermId) -> u32 {
        self.entries
            .binary_search_by_key(&t, |&(id, _)| id)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Total in-vocabulary token count, the query length used by the
    /// language model.
    pub fn l1(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn oov(&self) -> u32 {
        self.oov
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Maps tokens onto vocabulary ids, counting out-of-vocabulary tokens.
pub fn bow<T: AsRef<str>>(tokens: &[T], vocab: &Vocabulary) -> Bow {
    let mut counts: HashMap<TermId, u32> = HashMap::new();
    let mut oov = 0;
    for tok in tokens {
        match vocab.id(tok.as_ref()) {
            Some(t) => *counts.entry(t).or_insert(0) += 1,
            None => oov += 1,
        }
    }
    Bow::from_entries(counts.into_iter().collect(), oov)
}

/// Which idf definition a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdfFlavor {
    /// `ln((|C|+1) / df)` with df counted over nonzero entries.
    ClassicL0,
    /// `ln((max_row_l1 + 1) / row_l1)`, the differentiable variant.
    SmoothL1,
}

/// Per-term idf values. Terms whose posting list is empty (or all-zero) are
/// excluded and read as 0.0.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    values: Vec<f64>,
    flavor: IdfFlavor,
}

impl IdfTable {
    pub fn from_values(values: Vec<f64>, flavor: IdfFlavor) -> Self {
        Self { values, flavor }
    }

    pub fn value(&self, t: TermId) -> f64 {
        self.values[t as usize]
    }

    pub fn flavor(&self) -> IdfFlavor {
        self.flavor
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Classic idf: `ln((|C|+1)/df)`, df = number of nonzero entries in the row.
pub fn classic_idf<V: PostingsView>(view: &V) -> IdfTable {
    let n = view.num_docs() as f64;
    let values = (0..view.num_terms() as TermId)
        .map(|t| {
            let df = (0..view.postings_len(t))
                .filter(|&i| view.posting_at(t, i).1 != 0.0)
                .count();
            if df == 0 {
                0.0
            } else {
                ((n + 1.0) / df as f64).ln()
            }
        })
        .collect();
    IdfTable::from_values(values, IdfFlavor::ClassicL0)
}

/// Smoothed idf with maximum normalization:
/// `ln((max_t' l1(row t') + 1) / l1(row t))`. Strictly positive for every
/// term with nonzero row mass.
pub fn smooth_idf<V: PostingsView>(view: &V) -> Result<IdfTable, IndexError> {
    let max_row = (0..view.num_terms() as TermId)
        .map(|t| view.row_l1(t))
        .fold(0.0_f64, f64::max);
    if max_row <= 0.0 {
        return Err(IndexError::EmptyIndex);
    }
    let values = (0..view.num_terms() as TermId)
        .map(|t| {
            let l1 = view.row_l1(t);
            if l1 > 0.0 {
                ((max_row + 1.0) / l1).ln()
            } else {
                0.0
            }
        })
        .collect();
    Ok(IdfTable::from_values(values, IdfFlavor::SmoothL1))
}

/// Collection language model: `p(t|C)` for every term. The Dirichlet
/// document constant `alpha_d = mu / (|d| + mu)` is computed on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectionLm {
    p: Vec<f64>,
}

impl CollectionLm {
    pub fn prob(&self, t: TermId) -> f64 {
        self.p[t as usize]
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

pub fn collection_lm<V: PostingsView>(view: &V) -> Result<CollectionLm, IndexError> {
    let total = view.total_mass();
    if total <= 0.0 {
        return Err(IndexError::ZeroMass);
    }
    let p = (0..view.num_terms() as TermId)
        .map(|t| view.row_l1(t) / total)
        .collect();
    Ok(CollectionLm { p })
}

/// `alpha_d = mu / (|d| + mu)`.
pub fn dirichlet_alpha(doc_len: f64, mu: f64) -> f64 {
    mu / (doc_len + mu)
}

/// Builds the weighted index `S'` with entries `tf * tdv(term)` and all
/// derived statistics recomputed from the weighted entries.
pub fn apply_tdv(idx: &SparseIndex, tdv: &[f64]) -> Result<WeightedIndex, IndexError> {
    if tdv.len() != idx.num_terms() {
        return Err(IndexError::TdvLength {
            expected: idx.num_terms(),
            got: tdv.len(),
        });
    }
    for (t, &v) in tdv.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(IndexError::InvalidTdv {
                term: t as TermId,
                value: v,
            });
        }
    }
    let postings: Vec<Vec<WeightedPosting>> = idx
        .postings
        .iter()
        .enumerate()
        .map(|(t, row)| {
            row.iter()
                .map(|p| WeightedPosting {
                    doc: p.doc,
                    tf: p.tf,
                    weight: p.tf as f64 * tdv[t],
                })
                .collect()
        })
        .collect();
    Ok(WeightedIndex::finalize(
        postings,
        tdv.to_vec(),
        idx.num_docs(),
        idx.docnos.clone(),
        idx.docno_ids.clone(),
    ))
}

/// Counts from a pruning pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruneReport {
    pub entries_before: u64,
    pub entries_after: u64,
    pub terms_pruned: usize,
}

impl PruneReport {
    pub fn reduction_pct(&self) -> f64 {
        if self.entries_before == 0 {
            0.0
        } else {
            (1.0 - self.entries_after as f64 / self.entries_before as f64) * 100.0
        }
    }
}

/// Removes the posting lists of zero-TDV terms. Those entries all carry zero
/// weight, so every recomputed statistic and every ranker score is unchanged.
pub fn prune(widx: &WeightedIndex) -> (WeightedIndex, PruneReport) {
    let entries_before: u64 = widx.postings.iter().map(|r| r.len() as u64).sum();
    let mut terms_pruned = 0;
    let postings: Vec<Vec<WeightedPosting>> = widx
        .postings
        .iter()
        .enumerate()
        .map(|(t, row)| {
            if widx.tdv[t] == 0.0 {
                if !row.is_empty() {
                    terms_pruned += 1;
                }
                Vec::new()
            } else {
                row.clone()
            }
        })
        .collect();
    let entries_after: u64 = postings.iter().map(|r| r.len() as u64).sum();
    let pruned = WeightedIndex::finalize(
        postings,
        widx.tdv.clone(),
        widx.num_docs(),
        widx.docnos.clone(),
        widx.docno_ids.clone(),
    );
    (
        pruned,
        PruneReport {
            entries_before,
            entries_after,
            terms_pruned,
        },
    )
}
