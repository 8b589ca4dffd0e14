//! Ranking functions over an index view: classic TF-IDF, the smoothed
//! differentiable TF-IDF, BM25 with the smoothed idf, and the Dirichlet
//! language model. The same scorers run on the raw index and on a weighted
//! index; in the weighted case every statistic they read (idf, document
//! length, average length, collection probabilities) was recomputed from the
//! weighted entries, which is exactly the TDV variant of each ranker.
//!
//! Zero-weight posting entries are skipped everywhere: an entry `tf * tdv`
//! with `tdv = 0` is semantically absent, so scores — and ranked lists — are
//! identical before and after pruning.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::index::{
    classic_idf, collection_lm, dirichlet_alpha, smooth_idf, Bow, CollectionLm, DocId, IdfFlavor,
    IdfTable, IndexError, PostingsView, TermId,
};

#[derive(Debug, Error)]
pub enum RankError {
    #[error("unknown doc id {0}")]
    UnknownDoc(DocId),
    #[error("idf table has flavor {got:?}, ranker needs {want:?}")]
    WrongIdfFlavor { want: IdfFlavor, got: IdfFlavor },
    #[error("term {0} has positive weight but zero collection probability")]
    InconsistentLm(TermId),
    #[error(transparent)]
    Stats(#[from] IndexError),
    #[error("run line {line}: {reason}")]
    BadRunLine { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

/// BM25 and language-model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankerParams {
    pub k1: f64,
    /// BM25 length-normalization slope (the paper's `b`; not the TDV bias).
    pub b: f64,
    pub mu: f64,
    /// Use the raw `tf` instead of the weighted entry in the BM25
    /// denominator, reproducing the literal formula of the weighted ranker
    /// as printed rather than the consistent substitution. Off by default.
    pub bm25_raw_tf_denominator: bool,
}

impl Default for RankerParams {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            mu: 2000.0,
            bm25_raw_tf_denominator: false,
        }
    }
}

/// Ranking function selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ranker {
    TfIdfClassic,
    TfIdfSmooth,
    Bm25,
    Lm,
}

impl Ranker {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tfidf-classic" => Some(Self::TfIdfClassic),
            "tfidf" => Some(Self::TfIdfSmooth),
            "bm25" => Some(Self::Bm25),
            "lm" => Some(Self::Lm),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TfIdfClassic => "tfidf-classic",
            Self::TfIdfSmooth => "tfidf",
            Self::Bm25 => "bm25",
            Self::Lm => "lm",
        }
    }
}

/// All statistics any ranker needs, computed once per index.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsBundle {
    pub classic: IdfTable,
    pub smooth: IdfTable,
    pub lm: CollectionLm,
}

impl StatsBundle {
    pub fn compute<V: PostingsView>(view: &V) -> Result<Self, IndexError> {
        Ok(Self {
            classic: classic_idf(view),
            smooth: smooth_idf(view)?,
            lm: collection_lm(view)?,
        })
    }
}

// Per-term score contributions. The retrieval loop and the single-document
// scorers share these so the two paths agree bit for bit.

#[inline]
pub(crate) fn tfidf_term(qtf: f64, w: f64, idf: f64) -> f64 {
    qtf * w * idf
}

#[inline]
pub(crate) fn bm25_norm(params: &RankerParams, doc_len: f64, avgdl: f64) -> f64 {
    params.k1 * (1.0 - params.b + params.b * doc_len / avgdl)
}

#[inline]
pub(crate) fn bm25_term(qtf: f64, w: f64, denom_w: f64, idf: f64, k1: f64, k_norm: f64) -> f64 {
    qtf * idf * w * (k1 + 1.0) / (denom_w + k_norm)
}

#[inline]
pub(crate) fn lm_term(qtf: f64, w: f64, mu: f64, p: f64) -> f64 {
    qtf * (1.0 + w / (mu * p)).ln()
}

fn check_doc<V: PostingsView>(view: &V, d: DocId) -> Result<(), RankError> {
    if (d as usize) < view.num_docs() {
        Ok(())
    } else {
        Err(RankError::UnknownDoc(d))
    }
}

/// TF-IDF score `sum_t Q_t * S_{t,d} * idf_t`. Works with either idf flavor;
/// the caller picks classic or smoothed.
pub fn score_tfidf<V: PostingsView>(
    q: &Bow,
    d: DocId,
    view: &V,
    idf: &IdfTable,
) -> Result<f64, RankError> {
    check_doc(view, d)?;
    let mut score = 0.0;
    for (t, qtf) in q.iter() {
        let w = view.weight(t, d);
        if w != 0.0 {
            score += tfidf_term(qtf as f64, w, idf.value(t));
        }
    }
    Ok(score)
}

/// BM25 with the smoothed idf and the index view's (possibly weighted)
/// document-length statistics.
pub fn score_bm25<V: PostingsView>(
    q: &Bow,
    d: DocId,
    view: &V,
    idf: &IdfTable,
    params: &RankerParams,
) -> Result<f64, RankError> {
    check_doc(view, d)?;
    if idf.flavor() != IdfFlavor::SmoothL1 {
        return Err(RankError::WrongIdfFlavor {
            want: IdfFlavor::SmoothL1,
            got: idf.flavor(),
        });
    }
    let k_norm = bm25_norm(params, view.doc_len(d), view.avgdl());
    let mut score = 0.0;
    for (t, qtf) in q.iter() {
        if let Some(i) = view.find(t, d) {
            let (_, w) = view.posting_at(t, i);
            if w != 0.0 {
                let denom_w = if params.bm25_raw_tf_denominator {
                    view.tf_at(t, i)
                } else {
                    w
                };
                score += bm25_term(qtf as f64, w, denom_w, idf.value(t), params.k1, k_norm);
            }
        }
    }
    Ok(score)
}

/// Dirichlet language model:
/// `sum_t Q_t * ln(1 + S_{t,d} / (mu * p(t|C))) + |q| * ln(alpha_d)`.
pub fn score_lm<V: PostingsView>(
    q: &Bow,
    d: DocId,
    view: &V,
    lm: &CollectionLm,
    params: &RankerParams,
) -> Result<f64, RankError> {
    check_doc(view, d)?;
    let mut score = 0.0;
    for (t, qtf) in q.iter() {
        let w = view.weight(t, d);
        if w != 0.0 {
            let p = lm.prob(t);
            if p <= 0.0 {
                return Err(RankError::InconsistentLm(t));
            }
            score += lm_term(qtf as f64, w, params.mu, p);
        }
    }
    score += q.l1() as f64 * dirichlet_alpha(view.doc_len(d), params.mu).ln();
    Ok(score)
}

/// Scores one document with the selected ranker, reading the right table
/// from the bundle.
pub fn score<V: PostingsView>(
    ranker: Ranker,
    q: &Bow,
    d: DocId,
    view: &V,
    stats: &StatsBundle,
    params: &RankerParams,
) -> Result<f64, RankError> {
    match ranker {
        Ranker::TfIdfClassic => score_tfidf(q, d, view, &stats.classic),
        Ranker::TfIdfSmooth => score_tfidf(q, d, view, &stats.smooth),
        Ranker::Bm25 => score_bm25(q, d, view, &stats.smooth, params),
        Ranker::Lm => score_lm(q, d, view, &stats.lm, params),
    }
}

/// Document-at-a-time retrieval: merges the query terms' posting lists in
/// doc-id order and keeps the top `k` by `(score desc, docno asc)`.
///
/// Candidates are documents sharing at least one positively weighted query
/// term. For the language model the per-document floor `|q| ln(alpha_d)` is
/// added to every candidate; documents with no overlap at all are not
/// scored, which ranks them below every candidate in practice.
pub fn retrieve<V: PostingsView>(
    view: &V,
    ranker: Ranker,
    stats: &StatsBundle,
    q: &Bow,
    k: usize,
    params: &RankerParams,
) -> Vec<(DocId, f64)> {
    if k == 0 || q.is_empty() {
        return Vec::new();
    }
    struct Cursor {
        term: TermId,
        qtf: f64,
        pos: usize,
        len: usize,
    }
    let mut cursors: Vec<Cursor> = q
        .iter()
        .filter(|&(t, _)| view.postings_len(t) > 0)
        .map(|(t, qtf)| Cursor {
            term: t,
            qtf: qtf as f64,
            pos: 0,
            len: view.postings_len(t),
        })
        .collect();
    // Skip leading zero-weight entries.
    for c in &mut cursors {
        while c.pos < c.len && view.posting_at(c.term, c.pos).1 == 0.0 {
            c.pos += 1;
        }
    }

    let q_len = q.l1() as f64;
    let mut hits: Vec<(DocId, f64)> = Vec::new();
    loop {
        let mut current: Option<DocId> = None;
        for c in &cursors {
            if c.pos < c.len {
                let (doc, _) = view.posting_at(c.term, c.pos);
                current = Some(current.map_or(doc, |d| d.min(doc)));
            }
        }
        let Some(doc) = current else { break };

        let mut acc = 0.0;
        for c in &mut cursors {
            if c.pos >= c.len {
                continue;
            }
            let (d, w) = view.posting_at(c.term, c.pos);
            if d != doc {
                continue;
            }
            debug_assert!(w != 0.0);
            match ranker {
                Ranker::TfIdfClassic => {
                    acc += tfidf_term(c.qtf, w, stats.classic.value(c.term));
                }
                Ranker::TfIdfSmooth => {
                    acc += tfidf_term(c.qtf, w, stats.smooth.value(c.term));
                }
                Ranker::Bm25 => {
                    let k_norm = bm25_norm(params, view.doc_len(doc), view.avgdl());
                    let denom_w = if params.bm25_raw_tf_denominator {
                        view.tf_at(c.term, c.pos)
                    } else {
                        w
                    };
                    acc += bm25_term(
                        c.qtf,
                        w,
                        denom_w,
                        stats.smooth.value(c.term),
                        params.k1,
                        k_norm,
                    );
                }
                Ranker::Lm => {
                    acc += lm_term(c.qtf, w, params.mu, stats.lm.prob(c.term));
                }
            }
            c.pos += 1;
            while c.pos < c.len && view.posting_at(c.term, c.pos).1 == 0.0 {
                c.pos += 1;
            }
        }
        if ranker == Ranker::Lm {
            acc += q_len * dirichlet_alpha(view.doc_len(doc), params.mu).ln();
        }
        hits.push((doc, acc));
    }

    hits.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| view.docno(a.0).cmp(view.docno(b.0)))
    });
    hits.truncate(k);
    hits
}

/// A ranked result list for one query, ordered by `(score desc, docno asc)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub qid: String,
    pub entries: Vec<(String, f64)>,
}

/// Resolves retrieval hits into docnos.
pub fn ranked_list<V: PostingsView>(view: &V, qid: &str, hits: &[(DocId, f64)]) -> RankedList {
    RankedList {
        qid: qid.to_string(),
        entries: hits
            .iter()
            .map(|&(d, s)| (view.docno(d).to_string(), s))
            .collect(),
    }
}

/// Writes runs in the six-column TREC format: `qid Q0 docno rank score tag`.
pub fn write_trec_run(mut w: impl Write, lists: &[RankedList], tag: &str) -> io::Result<()> {
    for list in lists {
        for (rank, (docno, score)) in list.entries.iter().enumerate() {
            writeln!(
                w,
                "{} Q0 {} {} {} {}",
                list.qid,
                docno,
                rank + 1,
                score,
                tag
            )?;
        }
    }
    Ok(())
}

/// Reads a TREC run file. Entries are grouped by qid in file order and
/// re-sorted by `(score desc, docno asc)`; the stored rank column is ignored.
pub fn read_trec_run(reader: impl BufRead) -> Result<Vec<RankedList>, RankError> {
    let mut order: Vec<String> = Vec::new();
    let mut by_qid: std::collections::HashMap<String, Vec<(String, f64)>> =
        std::collections::HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(RankError::BadRunLine {
                line: line_no,
                reason: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let score: f64 = fields[4].parse().map_err(|_| RankError::BadRunLine {
            line: line_no,
            reason: format!("score {:?} is not a number", fields[4]),
        })?;
        let qid = fields[0].to_string();
        if !by_qid.contains_key(&qid) {
            order.push(qid.clone());
        }
        by_qid
            .entry(qid)
            .or_default()
            .push((fields[2].to_string(), score));
    }
    Ok(order
        .into_iter()
        .map(|qid| {
            let mut entries = by_qid.remove(&qid).unwrap();
            entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            RankedList { qid, entries }
        })
        .collect())
}
