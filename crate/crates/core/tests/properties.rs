//! Property tests over the spec-level invariants.

use proptest::prelude::*;

use tdvi_core::corpus::{
    parse_qrels, preprocess, write_qrels, PreprocessConfig, QrelSet, StemmerKind,
};
use tdvi_core::eval::{ndcg_at_k, recall_at_k};
use tdvi_core::index::store::{IndexFile, IndexKind};
use tdvi_core::ranking::RankedList;
use tdvi_core::{apply_tdv, bow, build_index, prune, PostingsView};

fn token_strategy() -> impl Strategy<Value = String> {
    "[a-z]{1,8}"
}

fn docs_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(token_strategy(), 1..20), 1..12)
}

fn named_docs(docs: Vec<Vec<String>>) -> Vec<(String, Vec<String>)> {
    docs.into_iter()
        .enumerate()
        .map(|(i, tokens)| (format!("p{i:03}"), tokens))
        .collect()
}

proptest! {
    #[test]
    fn preprocess_without_stemming_is_idempotent(text in "[ -~]{0,120}") {
        let cfg = PreprocessConfig {
            stemmer: StemmerKind::None,
            ..Default::default()
        };
        let once = preprocess(&text, &cfg);
        let again = preprocess(&once.join(" "), &cfg);
        prop_assert_eq!(once, again);
    }

    #[test]
    fn preprocess_never_adds_tokens(text in "[ -~]{0,120}") {
        let cfg = PreprocessConfig::default();
        let raw = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .count();
        prop_assert!(preprocess(&text, &cfg).len() <= raw);
    }

    #[test]
    fn qrels_roundtrip_identity(
        entries in prop::collection::vec(("[0-9]{1,3}", "[A-Z][0-9]{1,3}", 0u32..4), 0..30)
    ) {
        let mut qrels = QrelSet::new();
        for (qid, docno, grade) in &entries {
            qrels.insert(qid, docno, *grade);
        }
        let mut buf = Vec::new();
        write_qrels(&qrels, &mut buf).unwrap();
        prop_assert_eq!(parse_qrels(buf.as_slice()).unwrap(), qrels);
    }

    #[test]
    fn bow_accounts_for_every_token(docs in docs_strategy(), extra in prop::collection::vec(token_strategy(), 0..10)) {
        let (vocab, _) = build_index(named_docs(docs)).unwrap();
        let b = bow(&extra, &vocab);
        let counted: u64 = b.iter().map(|(_, c)| c as u64).sum();
        prop_assert_eq!(counted + b.oov() as u64, extra.len() as u64);
    }

    #[test]
    fn row_l0_never_exceeds_row_l1(docs in docs_strategy()) {
        let (_, idx) = build_index(named_docs(docs)).unwrap();
        for t in 0..idx.num_terms() as u32 {
            prop_assert!(idx.postings_len(t) as f64 <= idx.row_l1(t));
        }
    }

    #[test]
    fn smooth_idf_strictly_positive(docs in docs_strategy()) {
        let (_, idx) = build_index(named_docs(docs)).unwrap();
        let idf = tdvi_core::index::smooth_idf(&idx).unwrap();
        for t in 0..idx.num_terms() as u32 {
            prop_assert!(idf.value(t) > 0.0);
        }
    }

    #[test]
    fn doc_lengths_track_weighted_entries(
        docs in docs_strategy(),
        scale in 0.0f64..3.0,
    ) {
        let (_, idx) = build_index(named_docs(docs)).unwrap();
        let tdv: Vec<f64> = (0..idx.num_terms())
            .map(|t| if t % 3 == 0 { 0.0 } else { scale })
            .collect();
        let w = apply_tdv(&idx, &tdv).unwrap();
        for d in 0..w.num_docs() as u32 {
            let expect: f64 = (0..w.num_terms() as u32).map(|t| w.weight(t, d)).sum();
            prop_assert!((w.doc_len(d) - expect).abs() < 1e-9);
        }
        // pruning never changes the statistics
        let (pruned, _) = prune(&w);
        for d in 0..w.num_docs() as u32 {
            prop_assert_eq!(pruned.doc_len(d), w.doc_len(d));
        }
        prop_assert_eq!(pruned.avgdl(), w.avgdl());
    }

    #[test]
    fn index_file_roundtrip(docs in docs_strategy()) {
        let (vocab, idx) = build_index(named_docs(docs)).unwrap();
        let file = IndexFile {
            vocab,
            preprocess: PreprocessConfig::default(),
            surfaces: None,
            kind: IndexKind::Raw(idx),
        };
        let loaded = IndexFile::load(file.save_to_vec().as_slice()).unwrap();
        prop_assert_eq!(file, loaded);
    }

    #[test]
    fn metrics_bounded_in_unit_interval(
        ranked in prop::collection::vec("[a-f]", 0..12),
        judged in prop::collection::vec(("[a-f]", 0u32..4), 1..12),
        k in 1usize..15,
    ) {
        let mut qrels = QrelSet::new();
        for (docno, grade) in &judged {
            qrels.insert("q", docno, *grade);
        }
        let mut seen = std::collections::HashSet::new();
        let run = RankedList {
            qid: "q".into(),
            entries: ranked
                .into_iter()
                .filter(|d| seen.insert(d.clone()))
                .enumerate()
                .map(|(i, d)| (d, 10.0 - i as f64))
                .collect(),
        };
        if let Some(v) = ndcg_at_k(&run, &qrels, k) {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v), "ndcg {v}");
        }
        if let Some(v) = recall_at_k(&run, &qrels, k) {
            prop_assert!((0.0..=1.0).contains(&v), "recall {v}");
        }
    }
}
