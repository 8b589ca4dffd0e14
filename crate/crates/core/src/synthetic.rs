//! Deterministic synthetic collections for tests and benchmarks.
//!
//! The planted corpus embeds a known relevance signal: a small set of topic
//! terms decides relevance, the (much larger) noise vocabulary is spread
//! uniformly and carries none. Topic and noise terms get linearly separable
//! embeddings, so a trained TDV model can keep the former and zero out the
//! latter.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::QrelSet;
use crate::embeddings::EmbeddingTable;

#[derive(Debug, Clone)]
pub struct PlantedParams {
    pub num_docs: usize,
    pub topic_terms: usize,
    pub noise_terms: usize,
    pub num_queries: usize,
    pub dim: usize,
}

impl Default for PlantedParams {
    fn default() -> Self {
        Self {
            num_docs: 500,
            topic_terms: 100,
            noise_terms: 400,
            num_queries: 50,
            dim: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// (docno, tokens)
    pub docs: Vec<(String, Vec<String>)>,
    /// (qid, query tokens)
    pub queries: Vec<(String, Vec<String>)>,
    pub qrels: QrelSet,
    pub embeddings: EmbeddingTable,
}

/// Builds the planted corpus.
///
/// Every document carries 2-3 distinct topic terms (each repeated up to 3
/// times) plus 20-40 uniform noise tokens. Queries are two topic terms
/// co-occurring in some document, padded with three noise terms the way real
/// queries carry non-discriminative words; the relevance grade of a document
/// is `overlap - 1` where `overlap` counts shared query/document topic
/// terms, so single-term matches are judged non-relevant and two-term
/// matches are positive. Noise terms never affect relevance.
pub fn planted(params: &PlantedParams, seed: u64) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topic: Vec<String> = (0..params.topic_terms)
        .map(|i| format!("topic{i:03}"))
        .collect();
    let noise: Vec<String> = (0..params.noise_terms)
        .map(|i| format!("noise{i:03}"))
        .collect();

    let mut docs = Vec::with_capacity(params.num_docs);
    let mut doc_topics: Vec<Vec<usize>> = Vec::with_capacity(params.num_docs);
    for d in 0..params.num_docs {
        let n_topics = rng.random_range(2..=3);
        let mut picked: Vec<usize> = Vec::new();
        while picked.len() < n_topics {
            let t = rng.random_range(0..params.topic_terms);
            if !picked.contains(&t) {
                picked.push(t);
            }
        }
        let mut tokens = Vec::new();
        for &t in &picked {
            for _ in 0..rng.random_range(1..=3) {
                tokens.push(topic[t].clone());
            }
        }
        for _ in 0..rng.random_range(20..=40) {
            tokens.push(noise[rng.random_range(0..params.noise_terms)].clone());
        }
        docs.push((format!("D{d:04}"), tokens));
        doc_topics.push(picked);
    }

    let mut queries = Vec::with_capacity(params.num_queries);
    let mut qrels = QrelSet::new();
    let mut used: Vec<(usize, usize)> = Vec::new();
    for q in 0..params.num_queries {
        // Pick two topic terms that co-occur in some document so the query
        // is guaranteed at least one positive.
        let (a, b) = loop {
            let doc = rng.random_range(0..params.num_docs);
            let topics = &doc_topics[doc];
            let a = topics[rng.random_range(0..topics.len())];
            let b = topics[rng.random_range(0..topics.len())];
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if used.contains(&key) && used.len() < params.topic_terms * 2 {
                continue;
            }
            used.push(key);
            break (a, b);
        };
        let qid = format!("q{q:03}");
        for (d, topics) in doc_topics.iter().enumerate() {
            let overlap = topics.iter().filter(|&&t| t == a || t == b).count() as u32;
            if overlap > 0 {
                qrels.insert(&qid, &docs[d].0, overlap.saturating_sub(1));
            }
        }
        let mut tokens = vec![topic[a].clone(), topic[b].clone()];
        for _ in 0..3 {
            tokens.push(noise[rng.random_range(0..params.noise_terms)].clone());
        }
        queries.push((qid, tokens));
    }

    // Linearly separable embeddings: topic terms point one way along the
    // first axis, noise terms the other; the rest is small jitter.
    let mut embeddings = EmbeddingTable::new(params.dim);
    let vector = |sign: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut v = vec![sign];
        for _ in 1..params.dim {
            v.push(rng.random_range(-0.1..0.1));
        }
        v
    };
    for term in &topic {
        let v = vector(1.0, &mut rng);
        embeddings.insert(term, v);
    }
    for term in &noise {
        let v = vector(-1.0, &mut rng);
        embeddings.insert(term, v);
    }

    SyntheticData {
        docs,
        queries,
        qrels,
        embeddings,
    }
}

/// A uniform random corpus with exact shape, for property tests and oracle
/// comparisons: `num_docs` documents over a `vocab_size` vocabulary with
/// lengths in `[3, max_doc_len]`.
pub fn random_corpus(
    seed: u64,
    num_docs: usize,
    vocab_size: usize,
    max_doc_len: usize,
) -> Vec<(String, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<String> = (0..vocab_size).map(|t| format!("term{t:03}")).collect();
    (0..num_docs)
        .map(|d| {
            let len = rng.random_range(3..=max_doc_len.max(3));
            let tokens = (0..len)
                .map(|_| terms.choose(&mut rng).unwrap().clone())
                .collect();
            (format!("R{d:04}"), tokens)
        })
        .collect()
}

/// Random queries drawn from the same vocabulary shape as [`random_corpus`].
pub fn random_queries(
    seed: u64,
    vocab_size: usize,
    count: usize,
    max_len: usize,
) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<String> = (0..vocab_size).map(|t| format!("term{t:03}")).collect();
    (0..count)
        .map(|_| {
            let len = rng.random_range(1..=max_len.max(1));
            (0..len)
                .map(|_| terms.choose(&mut rng).unwrap().clone())
                .collect()
        })
        .collect()
}
