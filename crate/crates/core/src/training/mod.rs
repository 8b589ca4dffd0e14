//! Pairwise training of the TDV network: hinge loss on (query, d+, d-)
//! triples plus an l1 sparsity penalty on the weighted document vectors,
//! optimized with Adam. Collection statistics are batch-wise during
//! training; full-collection statistics are used for the per-epoch nDCG@5
//! checkpoint that drives early stopping.

mod adam;
mod batch;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::QrelSet;
use crate::embeddings::EmbeddingMatrix;
use crate::eval::ndcg_at_k;
use crate::index::{apply_tdv, Bow, DocId, IndexError, SparseIndex};
use crate::ranking::{ranked_list, retrieve, RankerParams, StatsBundle};
use crate::tdvmodel::{init_params, tdv_forward, TdvError, TdvParams};

pub use adam::{adam_step, AdamState};
pub use batch::{fd_check, forward_loss, gradients, DocColumns, TrainContext};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch has no nonzero TDV mass")]
    DegenerateBatch,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("no training pairs")]
    NoPairs,
    #[error(transparent)]
    Tdv(#[from] TdvError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// Differentiable ranking function to train against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainRanker {
    TfIdf,
    Bm25,
    Lm,
}

impl TrainRanker {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tfidf" => Some(Self::TfIdf),
            "bm25" => Some(Self::Bm25),
            "lm" => Some(Self::Lm),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TfIdf => "tfidf",
            Self::Bm25 => "bm25",
            Self::Lm => "lm",
        }
    }

    pub fn as_ranker(&self) -> crate::ranking::Ranker {
        match self {
            Self::TfIdf => crate::ranking::Ranker::TfIdfSmooth,
            Self::Bm25 => crate::ranking::Ranker::Bm25,
            Self::Lm => crate::ranking::Ranker::Lm,
        }
    }
}

/// One training triple: a query with a more relevant and a less relevant
/// document.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub qid: String,
    pub query: Bow,
    pub d_pos: DocId,
    pub d_neg: DocId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub ranker: TrainRanker,
    /// Sparsity weight in [0, 1]; 0 trains on the hinge alone.
    pub lambda: f64,
    pub margin: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs without an nDCG improvement.
    pub patience: usize,
    pub seed: u64,
    pub params: RankerParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ranker: TrainRanker::Bm25,
            lambda: 0.01,
            margin: 1.0,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 64,
            max_epochs: 100,
            patience: 5,
            seed: 42,
            params: RankerParams::default(),
        }
    }
}

/// Per-epoch training diagnostics. Epoch 0 is the untouched initialization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub ndcg5: f64,
    pub zero_tdv_terms: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: TdvParams,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Builds training pairs from the judgments and a baseline run.
///
/// For every positive (qid, doc), `negatives_per_positive` documents are
/// sampled uniformly (without replacement) from the non-relevant part of the
/// query's baseline top-k. Queries whose pool is empty are skipped with a
/// warning. Deterministic for a fixed seed.
pub fn sample_pairs(
    idx: &SparseIndex,
    queries: &[(String, Bow)],
    qrels: &QrelSet,
    base_run: &HashMap<String, Vec<DocId>>,
    negatives_per_positive: usize,
    seed: u64,
) -> (Vec<TrainPair>, Vec<String>) {
    use crate::index::PostingsView;
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (qid, query) in queries {
        let positives: Vec<DocId> = qrels
            .positives(qid)
            .filter_map(|(docno, _)| idx.doc_id(docno))
            .collect();
        if positives.is_empty() {
            continue;
        }
        let pool: Vec<DocId> = base_run
            .get(qid)
            .map(|docs| {
                docs.iter()
                    .copied()
                    .filter(|&d| qrels.grade(qid, idx.docno(d)).unwrap_or(0) == 0)
                    .collect()
            })
            .unwrap_or_default();
        if pool.is_empty() {
            warnings.push(format!("query {qid}: no negatives available, skipped"));
            continue;
        }
        for d_pos in positives {
            let take = negatives_per_positive.min(pool.len());
            let chosen = rand::seq::index::sample(&mut rng, pool.len(), take);
            for i in chosen.iter() {
                pairs.push(TrainPair {
                    qid: qid.clone(),
                    query: query.clone(),
                    d_pos,
                    d_neg: pool[i],
                });
            }
        }
    }
    (pairs, warnings)
}

/// Mean training nDCG@5 with full-collection statistics and the given TDV
/// snapshot. Returns 0.0 when the weighted index is degenerate (all mass
/// gone) — such an epoch can never become the best one.
fn checkpoint_ndcg(
    idx: &SparseIndex,
    tdv: &[f64],
    queries: &[(String, Bow)],
    qrels: &QrelSet,
    params: &RankerParams,
    ranker: crate::ranking::Ranker,
) -> Result<f64, TrainError> {
    let widx = apply_tdv(idx, tdv)?;
    let stats = match StatsBundle::compute(&widx) {
        Ok(s) => s,
        Err(IndexError::EmptyIndex | IndexError::ZeroMass) => return Ok(0.0),
        Err(e) => return Err(e.into()),
    };
    let mut sum = 0.0;
    let mut n = 0;
    for (qid, q) in queries {
        let hits = retrieve(&widx, ranker, &stats, q, 5, params);
        let list = ranked_list(&widx, qid, &hits);
        if let Some(v) = ndcg_at_k(&list, qrels, 5) {
            sum += v;
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Runs the training loop.
///
/// Epoch 0 in the history is the evaluation of the freshly initialized
/// parameters (with seed 0 that is exactly the unweighted baseline). Each
/// later epoch shuffles the pairs, walks them in batches with batch-wise
/// statistics, applies one Adam step per batch, then checkpoints nDCG@5 with
/// full statistics. The best-checkpoint parameters are returned; ties on
/// nDCG keep the lower-loss epoch.
pub fn train(
    idx: &SparseIndex,
    emb: &EmbeddingMatrix,
    queries: &[(String, Bow)],
    qrels: &QrelSet,
    pairs: &[TrainPair],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::NoPairs);
    }
    let cols = DocColumns::build(idx);
    let ctx = TrainContext { cols: &cols, emb };
    let mut params = init_params(emb.dim(), cfg.seed);
    let mut adam = AdamState::new(emb.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eval_ranker = cfg.ranker.as_ranker();

    let epoch_zero_loss = {
        let mut total = 0.0;
        for chunk in pairs.chunks(cfg.batch_size) {
            let (loss, _) = forward_loss(&ctx, chunk, &params, cfg)?;
            total += loss * chunk.len() as f64;
        }
        total / pairs.len() as f64
    };
    let tdv = tdv_forward(emb, &params)?;
    let record = EpochRecord {
        epoch: 0,
        loss: epoch_zero_loss,
        ndcg5: checkpoint_ndcg(idx, &tdv, queries, qrels, &cfg.params, eval_ranker)?,
        zero_tdv_terms: tdv.iter().filter(|&&v| v == 0.0).count(),
    };
    on_epoch(&record);
    let mut history = vec![record.clone()];
    let mut best = (0usize, params.clone(), record.ndcg5, record.loss);
    let mut since_improvement = 0usize;

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut shuffled: Vec<TrainPair> = Vec::with_capacity(pairs.len());
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        shuffled.clear();
        shuffled.extend(order.iter().map(|&i| pairs[i].clone()));

        let mut epoch_loss = 0.0;
        for (batch_no, chunk) in shuffled.chunks(cfg.batch_size).enumerate() {
            let eval = batch::batch_eval(&ctx, chunk, &params, cfg, true)?;
            if !eval.loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            epoch_loss += eval.loss * chunk.len() as f64;
            adam_step(
                &mut params,
                &eval.grad_w,
                eval.grad_b,
                &mut adam,
                cfg.lr,
                cfg.beta1,
                cfg.beta2,
                cfg.eps,
            );
        }
        epoch_loss /= pairs.len() as f64;

        let tdv = tdv_forward(emb, &params)?;
        let record = EpochRecord {
            epoch,
            loss: epoch_loss,
            ndcg5: checkpoint_ndcg(idx, &tdv, queries, qrels, &cfg.params, eval_ranker)?,
            zero_tdv_terms: tdv.iter().filter(|&&v| v == 0.0).count(),
        };
        on_epoch(&record);
        history.push(record.clone());

        let improved = record.ndcg5 > best.2;
        if improved || (record.ndcg5 == best.2 && record.loss < best.3) {
            best = (epoch, params.clone(), record.ndcg5, record.loss);
        }
        since_improvement = if improved { 0 } else { since_improvement + 1 };
        if since_improvement >= cfg.patience {
            break;
        }
    }

    Ok(TrainOutcome {
        params: best.1,
        best_epoch: best.0,
        history,
    })
}
