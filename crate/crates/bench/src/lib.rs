//! Shared fixtures for the criterion benchmarks: a planted synthetic
//! collection, indexed and optionally TDV-weighted with half the vocabulary
//! zeroed out.

use tdvi_core::synthetic::{planted, PlantedParams};
use tdvi_core::{apply_tdv, bow, build_index, prune, Bow, SparseIndex, Vocabulary, WeightedIndex};

pub struct Fixture {
    pub vocab: Vocabulary,
    pub index: SparseIndex,
    pub weighted: WeightedIndex,
    pub pruned: WeightedIndex,
    pub queries: Vec<(String, Bow)>,
    pub docs: Vec<(String, Vec<String>)>,
}

/// Builds the planted corpus and an index where every noise term has zero
/// TDV, plus its pruned counterpart.
pub fn fixture(seed: u64) -> Fixture {
    let data = planted(&PlantedParams::default(), seed);
    let (vocab, index) = build_index(data.docs.clone()).expect("unique docnos");
    let tdv: Vec<f64> = vocab
        .terms()
        .map(|t| if t.starts_with("noise") { 0.0 } else { 1.0 })
        .collect();
    let weighted = apply_tdv(&index, &tdv).expect("valid tdv");
    let (pruned, _) = prune(&weighted);
    let queries = data
        .queries
        .iter()
        .map(|(qid, tokens)| (qid.clone(), bow(tokens, &vocab)))
        .collect();
    Fixture {
        vocab,
        index,
        weighted,
        pruned,
        queries,
        docs: data.docs,
    }
}
