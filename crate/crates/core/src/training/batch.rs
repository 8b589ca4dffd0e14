//! Batch-wise differentiable scoring.
//!
//! During training, every collection-level statistic (the smoothed idf with
//! its max normalization, document lengths, average length, collection term
//! probabilities) is recomputed over the documents of the current batch only,
//! as a function of the TDV vector. The loss is therefore differentiable all
//! the way to the network parameters, and the gradients here chain through
//! every one of those statistics — including the argmax row of the idf
//! normalizer, whose subgradient is routed to the (lowest-id) max row.
//!
//! Conventions for zero TDVs: an entry `tf * tdv` with `tdv = 0` contributes
//! nothing to any score, matching retrieval over a pruned index; the ReLU
//! subgradient at zero is zero, so those terms receive no update either.

use crate::index::{Bow, DocId, SparseIndex, TermId};
use crate::tdvmodel::TdvParams;

use super::{TrainConfig, TrainError, TrainPair, TrainRanker};

/// Document-major view of the raw index (columns of the matrix), built once
/// so batches can read their documents without scanning posting lists.
#[derive(Debug, Clone)]
pub struct DocColumns {
    cols: Vec<Vec<(TermId, u32)>>,
    num_terms: usize,
}

impl DocColumns {
    pub fn build(idx: &SparseIndex) -> Self {
        let mut cols: Vec<Vec<(TermId, u32)>> = vec![Vec::new(); idx.num_docs()];
        for t in 0..idx.num_terms() as TermId {
            for p in idx.postings(t) {
                cols[p.doc as usize].push((t, p.tf));
            }
        }
        Self {
            cols,
            num_terms: idx.num_terms(),
        }
    }

    pub fn col(&self, d: DocId) -> &[(TermId, u32)] {
        &self.cols[d as usize]
    }

    pub fn num_terms(&self) -> usize {
        self.num_terms
    }

    pub fn num_docs(&self) -> usize {
        self.cols.len()
    }

    /// Raw l1 mass of a document column.
    pub fn raw_len(&self, d: DocId) -> f64 {
        self.col(d).iter().map(|&(_, tf)| tf as f64).sum()
    }
}

/// The statistics of one batch under the current TDV vector.
pub(crate) struct BatchStats<'a> {
    cols: &'a DocColumns,
    tdv: &'a [f64],
    /// Batch documents, sorted and unique.
    docs: Vec<DocId>,
    doc_slot: std::collections::HashMap<DocId, usize>,
    /// Raw row sums over batch documents (independent of the TDVs).
    raw_row: Vec<f64>,
    /// Terms with nonzero raw row mass, ascending.
    terms: Vec<TermId>,
    /// Weighted row sums `r_t = tdv_t * raw_row_t`.
    row: Vec<f64>,
    max_term: TermId,
    max_row: f64,
    /// Smoothed idf per term (0.0 where the weighted row is empty).
    idf: Vec<f64>,
    /// Weighted document lengths, one per batch doc slot.
    doc_len: Vec<f64>,
    avgdl: f64,
    /// Total weighted mass and the collection probabilities `r_t / total`.
    total: f64,
}

impl<'a> BatchStats<'a> {
    pub(crate) fn compute(
        cols: &'a DocColumns,
        batch_docs: &[DocId],
        tdv: &'a [f64],
    ) -> Result<Self, TrainError> {
        let mut docs: Vec<DocId> = batch_docs.to_vec();
        docs.sort_unstable();
        docs.dedup();
        let doc_slot: std::collections::HashMap<DocId, usize> =
            docs.iter().enumerate().map(|(i, &d)| (d, i)).collect();

        let num_terms = cols.num_terms();
        let mut raw_row = vec![0.0; num_terms];
        for &d in &docs {
            for &(t, tf) in cols.col(d) {
                raw_row[t as usize] += tf as f64;
            }
        }
        let terms: Vec<TermId> = (0..num_terms as TermId)
            .filter(|&t| raw_row[t as usize] > 0.0)
            .collect();

        let mut row = vec![0.0; num_terms];
        let mut max_term = 0;
        let mut max_row = 0.0;
        let mut total = 0.0;
        for &t in &terms {
            let r = tdv[t as usize] * raw_row[t as usize];
            row[t as usize] = r;
            total += r;
            if r > max_row {
                max_row = r;
                max_term = t;
            }
        }
        if max_row <= 0.0 || total <= 0.0 {
            return Err(TrainError::DegenerateBatch);
        }
        let mut idf = vec![0.0; num_terms];
        for &t in &terms {
            let r = row[t as usize];
            if r > 0.0 {
                idf[t as usize] = ((max_row + 1.0) / r).ln();
            }
        }
        let doc_len: Vec<f64> = docs
            .iter()
            .map(|&d| {
                cols.col(d)
                    .iter()
                    .map(|&(t, tf)| tf as f64 * tdv[t as usize])
                    .sum()
            })
            .collect();
        let avgdl = doc_len.iter().sum::<f64>() / docs.len() as f64;
        Ok(Self {
            cols,
            tdv,
            docs,
            doc_slot,
            raw_row,
            terms,
            row,
            max_term,
            max_row,
            idf,
            doc_len,
            avgdl,
            total,
        })
    }

    fn len_of(&self, d: DocId) -> f64 {
        self.doc_len[self.doc_slot[&d]]
    }

    fn prob(&self, t: TermId) -> f64 {
        self.row[t as usize] / self.total
    }

    /// Query-document overlap: `(term, query count, doc tf)` for terms in
    /// both, ascending by term.
    fn overlap(&self, q: &Bow, d: DocId) -> Vec<(TermId, f64, f64)> {
        let col = self.cols.col(d);
        let mut out = Vec::new();
        let mut i = 0;
        for (t, qtf) in q.iter() {
            while i < col.len() && col[i].0 < t {
                i += 1;
            }
            if i < col.len() && col[i].0 == t {
                out.push((t, qtf as f64, col[i].1 as f64));
            }
        }
        out
    }

    /// Ranker score of (q, d) under the batch statistics.
    pub(crate) fn score(&self, ranker: TrainRanker, q: &Bow, d: DocId, cfg: &TrainConfig) -> f64 {
        let p = &cfg.params;
        match ranker {
            TrainRanker::TfIdf => self
                .overlap(q, d)
                .iter()
                .map(|&(t, qtf, tf)| {
                    let u = tf * self.tdv[t as usize];
                    if u == 0.0 {
                        0.0
                    } else {
                        qtf * u * self.idf[t as usize]
                    }
                })
                .sum(),
            TrainRanker::Bm25 => {
                let k_norm = p.k1 * (1.0 - p.b + p.b * self.len_of(d) / self.avgdl);
                self.overlap(q, d)
                    .iter()
                    .map(|&(t, qtf, tf)| {
                        let u = tf * self.tdv[t as usize];
                        if u == 0.0 {
                            0.0
                        } else {
                            qtf * self.idf[t as usize] * u * (p.k1 + 1.0) / (u + k_norm)
                        }
                    })
                    .sum()
            }
            TrainRanker::Lm => {
                let mut s: f64 = self
                    .overlap(q, d)
                    .iter()
                    .map(|&(t, qtf, tf)| {
                        let u = tf * self.tdv[t as usize];
                        if u == 0.0 {
                            0.0
                        } else {
                            qtf * (1.0 + u / (p.mu * self.prob(t))).ln()
                        }
                    })
                    .sum();
                s += q.l1() as f64 * (p.mu / (self.len_of(d) + p.mu)).ln();
                s
            }
        }
    }

    /// Accumulates `scale * d score(q, d) / d tdv` into `grad`.
    ///
    /// Diagonal contributions skip ReLU-clamped terms (their chain is zero
    /// and the idf path is singular там); the rank-one paths through the
    /// batch statistics touch every term with raw mass and are gated later.
    fn accumulate_score_grad(
        &self,
        ranker: TrainRanker,
        q: &Bow,
        d: DocId,
        cfg: &TrainConfig,
        scale: f64,
        grad: &mut [f64],
    ) {
        let p = &cfg.params;
        let overlap = self.overlap(q, d);
        match ranker {
            TrainRanker::TfIdf => {
                let mut weighted_sum = 0.0; // sum_t Q_t * S'_{t,d}
                for &(t, qtf, tf) in &overlap {
                    let v = self.tdv[t as usize];
                    if v == 0.0 {
                        continue;
                    }
                    grad[t as usize] += scale * qtf * tf * (self.idf[t as usize] - 1.0);
                    weighted_sum += qtf * tf * v;
                }
                grad[self.max_term as usize] += scale
                    * (self.raw_row[self.max_term as usize] / (self.max_row + 1.0))
                    * weighted_sum;
            }
            TrainRanker::Bm25 => {
                let k_norm = p.k1 * (1.0 - p.b + p.b * self.len_of(d) / self.avgdl);
                let mut score_sum = 0.0; // sum_t Q_t * g_t, for the max-row path
                let mut k_sens = 0.0; // sum_t Q_t idf_t (k1+1) u_t / (u_t+K)^2
                for &(t, qtf, tf) in &overlap {
                    let v = self.tdv[t as usize];
                    if v == 0.0 {
                        continue;
                    }
                    let u = tf * v;
                    let denom = u + k_norm;
                    let g = (p.k1 + 1.0) * u / denom;
                    let idf = self.idf[t as usize];
                    // through u_t in the numerator+denominator
                    grad[t as usize] +=
                        scale * qtf * idf * (p.k1 + 1.0) * k_norm * tf / (denom * denom);
                    // through this term's own idf row
                    grad[t as usize] -= scale * qtf * (p.k1 + 1.0) * tf / denom;
                    score_sum += qtf * g;
                    k_sens += qtf * idf * (p.k1 + 1.0) * u / (denom * denom);
                }
                // max-row path of every idf in the sum
                grad[self.max_term as usize] += scale
                    * (self.raw_row[self.max_term as usize] / (self.max_row + 1.0))
                    * score_sum;
                // K path: K = k1(1 - b + b * len/avgdl); d score/dK = -k_sens
                let dlen = -scale * k_sens * p.k1 * p.b / self.avgdl;
                for &(t, tf) in self.cols.col(d) {
                    grad[t as usize] += dlen * tf as f64;
                }
                let davg = scale * k_sens * p.k1 * p.b * self.len_of(d)
                    / (self.docs.len() as f64 * self.avgdl * self.avgdl);
                for &t in &self.terms {
                    grad[t as usize] += davg * self.raw_row[t as usize];
                }
            }
            TrainRanker::Lm => {
                // For tdv_t > 0 the term value is Q_t ln(1 + tf*T/(mu*R_t)):
                // the tdv cancels inside the ratio and only the total mass T
                // remains, so the whole sum moves through T.
                let mut t_sens = 0.0;
                for &(t, qtf, tf) in &overlap {
                    if self.tdv[t as usize] == 0.0 {
                        continue;
                    }
                    let raw = self.raw_row[t as usize];
                    let h = tf * self.total / (p.mu * raw);
                    t_sens += qtf * tf / ((1.0 + h) * p.mu * raw);
                }
                for &t in &self.terms {
                    grad[t as usize] += scale * t_sens * self.raw_row[t as usize];
                }
                // alpha path: |q| ln(mu/(len+mu))
                let dlen = -scale * q.l1() as f64 / (self.len_of(d) + p.mu);
                for &(t, tf) in self.cols.col(d) {
                    grad[t as usize] += dlen * tf as f64;
                }
            }
        }
    }
}

/// Borrowed inputs shared by the loss/gradient entry points.
pub struct TrainContext<'a> {
    pub cols: &'a DocColumns,
    pub emb: &'a crate::embeddings::EmbeddingMatrix,
}

pub(crate) struct BatchEval {
    pub loss: f64,
    pub hinges: Vec<f64>,
    pub grad_w: Vec<f64>,
    pub grad_b: f64,
}

/// Loss, per-pair hinge values, and analytic gradients for one batch.
pub(crate) fn batch_eval(
    ctx: &TrainContext,
    pairs: &[TrainPair],
    params: &TdvParams,
    cfg: &TrainConfig,
    want_grad: bool,
) -> Result<BatchEval, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let tdv = crate::tdvmodel::tdv_forward(ctx.emb, params)?;
    let batch_docs: Vec<DocId> = pairs.iter().flat_map(|p| [p.d_pos, p.d_neg]).collect();
    let stats = BatchStats::compute(ctx.cols, &batch_docs, &tdv)?;

    let n = pairs.len() as f64;
    let mut loss = 0.0;
    let mut hinges = Vec::with_capacity(pairs.len());
    let mut grad_v = vec![0.0; ctx.cols.num_terms()];
    for pair in pairs {
        let f_pos = stats.score(cfg.ranker, &pair.query, pair.d_pos, cfg);
        let f_neg = stats.score(cfg.ranker, &pair.query, pair.d_neg, cfg);
        let hinge = (cfg.margin - f_pos + f_neg).max(0.0);
        hinges.push(hinge);
        let l1_pos = stats.len_of(pair.d_pos);
        let l1_neg = stats.len_of(pair.d_neg);
        loss += ((1.0 - cfg.lambda) * hinge + cfg.lambda * (l1_pos + l1_neg)) / n;

        if want_grad {
            if hinge > 0.0 {
                let s = (1.0 - cfg.lambda) / n;
                stats.accumulate_score_grad(
                    cfg.ranker,
                    &pair.query,
                    pair.d_pos,
                    cfg,
                    -s,
                    &mut grad_v,
                );
                stats.accumulate_score_grad(
                    cfg.ranker,
                    &pair.query,
                    pair.d_neg,
                    cfg,
                    s,
                    &mut grad_v,
                );
            }
            if cfg.lambda > 0.0 {
                for d in [pair.d_pos, pair.d_neg] {
                    for &(t, tf) in ctx.cols.col(d) {
                        grad_v[t as usize] += cfg.lambda / n * tf as f64;
                    }
                }
            }
        }
    }

    // Chain through tdv_t = ReLU(e_t . w + bias): clamped terms are flat.
    let dim = params.dim();
    let mut grad_w = vec![0.0; dim];
    let mut grad_b = 0.0;
    if want_grad {
        for (t, &g) in grad_v.iter().enumerate() {
            if g != 0.0 && tdv[t] > 0.0 {
                let row = ctx.emb.row(t as TermId);
                for (j, &e) in row.iter().enumerate() {
                    grad_w[j] += g * e;
                }
                grad_b += g;
            }
        }
    }
    Ok(BatchEval {
        loss,
        hinges,
        grad_w,
        grad_b,
    })
}

/// Mean batch loss and per-pair hinge values.
///
/// The loss is `(1-lambda) * hinge + lambda * (l1(S'_{:,d+}) + l1(S'_{:,d-}))`
/// averaged over the batch, with every statistic computed over the batch's
/// documents.
pub fn forward_loss(
    ctx: &TrainContext,
    pairs: &[TrainPair],
    params: &TdvParams,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<f64>), TrainError> {
    let eval = batch_eval(ctx, pairs, params, cfg, false)?;
    Ok((eval.loss, eval.hinges))
}

/// Analytic gradient of [`forward_loss`] with respect to `(w, bias)`.
pub fn gradients(
    ctx: &TrainContext,
    pairs: &[TrainPair],
    params: &TdvParams,
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, f64), TrainError> {
    let eval = batch_eval(ctx, pairs, params, cfg, true)?;
    Ok((eval.grad_w, eval.grad_b))
}

/// Verifies the analytic gradients against central finite differences with
/// step `h`. Returns the worst relative error over all components, using
/// `max(|analytic|, |fd|, 1e-8)` as the denominator.
pub fn fd_check(
    ctx: &TrainContext,
    pairs: &[TrainPair],
    params: &TdvParams,
    cfg: &TrainConfig,
    h: f64,
) -> Result<f64, TrainError> {
    assert!(h > 0.0, "step must be positive");
    let (grad_w, grad_b) = gradients(ctx, pairs, params, cfg)?;
    let mut worst = 0.0f64;
    let mut check = |analytic: f64, plus: f64, minus: f64| {
        let fd = (plus - minus) / (2.0 * h);
        let denom = analytic.abs().max(fd.abs()).max(1e-8);
        worst = worst.max((analytic - fd).abs() / denom);
    };
    for i in 0..params.dim() {
        let mut p = params.clone();
        p.w[i] += h;
        let (plus, _) = forward_loss(ctx, pairs, &p, cfg)?;
        p.w[i] -= 2.0 * h;
        let (minus, _) = forward_loss(ctx, pairs, &p, cfg)?;
        check(grad_w[i], plus, minus);
    }
    let mut p = params.clone();
    p.bias += h;
    let (plus, _) = forward_loss(ctx, pairs, &p, cfg)?;
    p.bias -= 2.0 * h;
    let (minus, _) = forward_loss(ctx, pairs, &p, cfg)?;
    check(grad_b, plus, minus);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{align, EmbeddingTable, OovPolicy};
    use crate::index::{apply_tdv, bow, build_index, Vocabulary};
    use crate::ranking::{self, RankerParams, StatsBundle};
    use crate::tdvmodel::init_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (Vocabulary, SparseIndex) {
        build_index(vec![
            ("d1", vec!["apple", "apple", "banana"]),
            ("d2", vec!["banana", "cherry"]),
            ("d3", vec!["cherry", "cherry", "cherry"]),
        ])
        .unwrap()
    }

    fn hash_embeddings(
        vocab: &Vocabulary,
        dim: usize,
        seed: u64,
    ) -> crate::embeddings::EmbeddingMatrix {
        let table = EmbeddingTable::new(dim);
        align(
            vocab,
            &table,
            OovPolicy::HashUniform { scale: 0.8, seed },
            None,
        )
    }

    fn cfg(ranker: TrainRanker, lambda: f64) -> TrainConfig {
        TrainConfig {
            ranker,
            lambda,
            params: RankerParams {
                mu: 4.0,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn hinge_values_match_definition() {
        let (vocab, idx) = toy();
        let cols = DocColumns::build(&idx);
        let emb = hash_embeddings(&vocab, 4, 3);
        let ctx = TrainContext {
            cols: &cols,
            emb: &emb,
        };
        let q = bow(&["cherry"], &vocab);
        // d3 is saturated with cherry, d1 has none: the margin is satisfied
        // or violated depending on pair direction.
        let good = TrainPair {
            qid: "q".into(),
            query: q.clone(),
            d_pos: 2,
            d_neg: 0,
        };
        let bad = TrainPair {
            qid: "q".into(),
            query: q,
            d_pos: 0,
            d_neg: 2,
        };
        let params = init_params(4, 0);
        let c = cfg(TrainRanker::TfIdf, 0.0);
        let (_, hinges) = forward_loss(&ctx, &[good.clone(), bad], &params, &c).unwrap();
        // equal scores would give hinge exactly 1; here scores differ
        assert!(hinges[0] < 1.0);
        assert!(hinges[1] > 1.0);
        // identical docs on both sides: f+ = f-, hinge = margin = 1
        let tie = TrainPair {
            d_neg: good.d_pos,
            ..good
        };
        let (_, hinges) = forward_loss(&ctx, &[tie], &params, &c).unwrap();
        assert_eq!(hinges[0], 1.0);
    }

    #[test]
    fn pure_sparsity_loss_is_sum_of_weighted_lengths() {
        // lambda = 1 with tdv = 1: loss = |d+| + |d-| in raw tokens.
        let (vocab, idx) = toy();
        let cols = DocColumns::build(&idx);
        let emb = hash_embeddings(&vocab, 4, 3);
        let ctx = TrainContext {
            cols: &cols,
            emb: &emb,
        };
        let pair = TrainPair {
            qid: "q".into(),
            query: bow(&["cherry"], &vocab),
            d_pos: 0, // len 3
            d_neg: 1, // len 2
        };
        let params = init_params(4, 0);
        let c = cfg(TrainRanker::Bm25, 1.0);
        let (loss, _) = forward_loss(&ctx, &[pair], &params, &c).unwrap();
        assert!((loss - 5.0).abs() < 1e-12);
    }

    #[test]
    fn loss_is_never_negative() {
        let (vocab, idx) = toy();
        let cols = DocColumns::build(&idx);
        let emb = hash_embeddings(&vocab, 6, 9);
        let ctx = TrainContext {
            cols: &cols,
            emb: &emb,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = bow(&["banana", "cherry"], &vocab);
        for trial in 0..50 {
            let pair = TrainPair {
                qid: "q".into(),
                query: q.clone(),
                d_pos: rng.random_range(0..3),
                d_neg: rng.random_range(0..3),
            };
            let params = init_params(6, trial + 1);
            for ranker in [TrainRanker::TfIdf, TrainRanker::Bm25, TrainRanker::Lm] {
                let lambda = rng.random_range(0.0..=1.0);
                match forward_loss(&ctx, std::slice::from_ref(&pair), &params, &cfg(ranker, lambda)) {
                    Ok((loss, _)) => {
                        assert!(loss >= 0.0, "{ranker:?} lambda {lambda}: loss {loss}")
                    }
                    // A random init can clamp every batch term to zero.
                    Err(TrainError::DegenerateBatch) => continue,
                    Err(e) => panic!("unexpected error {e:?}"),
                }
            }
        }
    }

    #[test]
    fn whole_collection_batch_matches_index_scorers() {
        // When the batch is the entire collection, batch statistics equal
        // full-collection statistics, so the training-side scorer must agree
        // with the ranking module over the weighted index.
        let (vocab, idx) = toy();
        let cols = DocColumns::build(&idx);
        let emb = hash_embeddings(&vocab, 4, 11);
        let params = init_params(4, 17);
        let tdv = crate::tdvmodel::tdv_forward(&emb, &params).unwrap();
        let stats = BatchStats::compute(&cols, &[0, 1, 2], &tdv).unwrap();

        let widx = apply_tdv(&idx, &tdv).unwrap();
        let bundle = StatsBundle::compute(&widx).unwrap();
        let q = bow(&["apple", "banana", "cherry"], &vocab);
        let c = cfg(TrainRanker::Bm25, 0.0);
        for d in 0..3 {
            let got = stats.score(TrainRanker::TfIdf, &q, d, &c);
            let want = ranking::score_tfidf(&q, d, &widx, &bundle.smooth).unwrap();
            assert!((got - want).abs() < 1e-12, "tfidf d{d}");

            let got = stats.score(TrainRanker::Bm25, &q, d, &c);
            let want = ranking::score_bm25(&q, d, &widx, &bundle.smooth, &c.params).unwrap();
            assert!((got - want).abs() < 1e-12, "bm25 d{d}");

            let got = stats.score(TrainRanker::Lm, &q, d, &c);
            let want = ranking::score_lm(&q, d, &widx, &bundle.lm, &c.params).unwrap();
            assert!((got - want).abs() < 1e-12, "lm d{d}");
        }
    }

    #[test]
    fn flat_region_has_zero_gradient() {
        // hinge inactive (f+ >> f-) and lambda = 0: the whole batch sits in
        // the flat part of the loss.
        let (vocab, idx) = toy();
        let cols = DocColumns::build(&idx);
        let emb = hash_embeddings(&vocab, 4, 3);
        let ctx = TrainContext {
            cols: &cols,
            emb: &emb,
        };
        let q = bow(&["cherry", "cherry", "cherry"], &vocab);
        let pair = TrainPair {
            qid: "q".into(),
            query: q,
            d_pos: 2,
            d_neg: 0,
        };
        let mut c = cfg(TrainRanker::TfIdf, 0.0);
        c.margin = 0.01;
        let params = init_params(4, 0);
        let (loss, hinges) = forward_loss(&ctx, std::slice::from_ref(&pair), &params, &c).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(hinges[0], 0.0);
        let (gw, gb) = gradients(&ctx, std::slice::from_ref(&pair), &params, &c).unwrap();
        assert!(gw.iter().all(|&g| g == 0.0));
        assert_eq!(gb, 0.0);
        let err = fd_check(&ctx, &[pair], &params, &c, 1e-4).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn sparsity_gradient_matches_hand_derivation() {
        // lambda = 1, every term in the linear region, zero embeddings:
        // d loss / d bias = sum over both docs of their raw token counts.
        let (vocab, idx) = toy();
        let cols = DocColumns::build(&idx);
        let table = EmbeddingTable::new(3);
        let emb = align(&vocab, &table, OovPolicy::Zeros, None);
        let ctx = TrainContext {
            cols: &cols,
            emb: &emb,
        };
        let pair = TrainPair {
            qid: "q".into(),
            query: bow(&["cherry"], &vocab),
            d_pos: 0,
            d_neg: 1,
        };
        let params = init_params(3, 0); // bias 1, all tdv = 1 > 0
        let c = cfg(TrainRanker::TfIdf, 1.0);
        let (gw, gb) = gradients(&ctx, &[pair], &params, &c).unwrap();
        assert!((gb - 5.0).abs() < 1e-12); // |d1| + |d2| = 3 + 2
        assert!(gw.iter().all(|&g| g == 0.0)); // zero embeddings
    }

    fn random_instance(
        seed: u64,
    ) -> (
        Vocabulary,
        SparseIndex,
        crate::embeddings::EmbeddingMatrix,
        Vec<TrainPair>,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab_size = rng.random_range(8..20);
        let num_docs = rng.random_range(6..14);
        let terms: Vec<String> = (0..vocab_size).map(|t| format!("t{t}")).collect();
        let docs: Vec<(String, Vec<String>)> = (0..num_docs)
            .map(|d| {
                let len = rng.random_range(3..25);
                let tokens = (0..len)
                    .map(|_| terms[rng.random_range(0..vocab_size)].clone())
                    .collect();
                (format!("d{d:02}"), tokens)
            })
            .collect();
        let (vocab, idx) = build_index(docs).unwrap();
        let emb = hash_embeddings(&vocab, 5, seed ^ 0xabcd);
        let mut pairs = Vec::new();
        for i in 0..rng.random_range(2..6) {
            let q_len = rng.random_range(1..4);
            let tokens: Vec<String> = (0..q_len)
                .map(|_| terms[rng.random_range(0..vocab_size)].clone())
                .collect();
            let q = bow(&tokens, &vocab);
            if q.is_empty() {
                continue;
            }
            let d_pos = rng.random_range(0..num_docs as DocId);
            let mut d_neg = rng.random_range(0..num_docs as DocId);
            if d_neg == d_pos {
                d_neg = (d_neg + 1) % num_docs as DocId;
            }
            pairs.push(TrainPair {
                qid: format!("q{i}"),
                query: q,
                d_pos,
                d_neg,
            });
        }
        (vocab, idx, emb, pairs)
    }

    #[test]
    fn finite_differences_agree_for_all_rankers() {
        let mut checked = 0;
        for seed in 0..30u64 {
            let (_, idx, emb, pairs) = random_instance(seed);
            if pairs.is_empty() {
                continue;
            }
            let cols = DocColumns::build(&idx);
            let ctx = TrainContext {
                cols: &cols,
                emb: &emb,
            };
            let params = init_params(5, seed + 1);
            for ranker in [TrainRanker::TfIdf, TrainRanker::Bm25, TrainRanker::Lm] {
                let c = cfg(ranker, 0.05);
                let err = fd_check(&ctx, &pairs, &params, &c, 1e-4).unwrap();
                assert!(err < 1e-3, "seed {seed} {ranker:?}: fd error {err}");
                checked += 1;
            }
        }
        assert!(checked >= 60, "too few instances exercised: {checked}");
    }

    #[test]
    fn fd_error_shrinks_with_step_size() {
        // Central differences truncate at O(h^2): two decades of h should
        // move the error by roughly four orders of magnitude.
        let (_, idx, emb, pairs) = random_instance(3);
        let cols = DocColumns::build(&idx);
        let ctx = TrainContext {
            cols: &cols,
            emb: &emb,
        };
        let params = init_params(5, 4);
        let c = cfg(TrainRanker::Lm, 0.0);
        let coarse = fd_check(&ctx, &pairs, &params, &c, 1e-2).unwrap();
        let fine = fd_check(&ctx, &pairs, &params, &c, 1e-3).unwrap();
        assert!(
            coarse > fine * 10.0,
            "expected O(h^2) scaling, got {coarse} vs {fine}"
        );
    }

    #[test]
    fn empty_batch_is_rejected() {
        let (vocab, idx) = toy();
        let cols = DocColumns::build(&idx);
        let emb = hash_embeddings(&vocab, 4, 3);
        let ctx = TrainContext {
            cols: &cols,
            emb: &emb,
        };
        let params = init_params(4, 0);
        let c = cfg(TrainRanker::Bm25, 0.0);
        assert!(matches!(
            forward_loss(&ctx, &[], &params, &c),
            Err(TrainError::EmptyBatch)
        ));
    }
}
