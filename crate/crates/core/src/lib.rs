//! tdvi-core: an inverted-index retrieval engine whose per-term
//! discrimination values (TDVs) are learned by a shallow network over word
//! embeddings.
//!
//! The pieces, in pipeline order:
//!
//! - [`corpus`]: TREC document/topic/qrels parsing and text normalization;
//! - [`index`]: the sparse term-document matrix, its statistics, the
//!   TDV-weighted variant, pruning, and the on-disk format;
//! - [`embeddings`]: pre-trained word vectors aligned to the vocabulary;
//! - [`tdvmodel`]: the one-layer ReLU network producing the TDVs;
//! - [`ranking`]: TF-IDF / BM25 / Dirichlet-LM scoring and top-k retrieval,
//!   shared between the raw and the weighted index;
//! - [`training`]: pairwise hinge + l1-sparsity training with analytic
//!   gradients through every batch statistic;
//! - [`eval`]: nDCG/Recall, paired significance tests, cross-validation;
//! - [`bench`]: retrieval timing and index footprint measurement;
//! - [`synthetic`]: deterministic corpora for tests and benchmarks.

pub mod bench;
pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod index;
pub mod ranking;
pub mod synthetic;
pub mod tdvmodel;
pub mod training;

pub use corpus::{PreprocessConfig, QrelSet, RawDoc, StemmerKind, Topic};
pub use embeddings::{EmbeddingMatrix, EmbeddingTable, OovPolicy};
pub use index::store::{IndexFile, IndexKind, StoreError};
pub use index::{
    apply_tdv, bow, build_index, prune, Bow, CollectionLm, DocId, IdfTable, PostingsView,
    PruneReport, SparseIndex, TermId, Vocabulary, WeightedIndex,
};
pub use ranking::{RankedList, Ranker, RankerParams, StatsBundle};
pub use tdvmodel::{TdvModelFile, TdvParams};
pub use training::{EpochRecord, TrainConfig, TrainOutcome, TrainPair, TrainRanker};
