//! `tdvi`: command-line pipeline around the TDV retrieval engine.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "tdvi",
    version,
    about = "Learned term-discrimination retrieval"
)]
pub struct Cli {
    /// Seed threaded through every stochastic step.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build a term-frequency index from TREC SGML documents.
    Index {
        /// Document file or directory of document files.
        #[arg(long)]
        corpus: PathBuf,
        /// Stopword list: one word per line, `#` comments.
        #[arg(long)]
        stopwords: PathBuf,
        /// `porter` or `none`.
        #[arg(long, default_value = "porter")]
        stemmer: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train TDVs against a differentiable ranker.
    Train {
        #[arg(long)]
        index: PathBuf,
        /// Pre-trained word vectors in fastText .vec text format.
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// `tfidf`, `bm25`, or `lm`.
        #[arg(long, default_value = "bm25")]
        ranker: String,
        /// Sparsity weight in [0, 1].
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 5)]
        patience: usize,
        /// Negatives sampled per positive document.
        #[arg(long, default_value_t = 4)]
        neg_per_pos: usize,
        #[arg(long)]
        out_model: PathBuf,
    },
    /// Drop the posting lists of zero-TDV terms.
    Prune {
        #[arg(long)]
        index: PathBuf,
        /// Trained model (required when the index is raw).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank documents for every topic and write a TREC run file.
    Search {
        #[arg(long)]
        index: PathBuf,
        /// Apply this model's TDVs before scoring (raw index only).
        #[arg(long)]
        model: Option<PathBuf>,
        /// `tfidf-classic`, `tfidf`, `bm25`, or `lm`.
        #[arg(long)]
        ranker: String,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Run tag written in the last column.
        #[arg(long, default_value = "tdvi")]
        tag: String,
    },
    /// Score a run file against qrels.
    Eval {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        /// Comma-separated metrics, e.g. `ndcg@5,recall@1000`.
        #[arg(long, default_value = "ndcg@5,recall@1000")]
        metric: String,
        /// Second run for a paired significance test.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Bonferroni correction factor for the t-test.
        #[arg(long, default_value_t = 1)]
        comparisons: u32,
    },
    /// Measure retrieval time and index footprint.
    Bench {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        ranker: String,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        warmup: usize,
    },
    /// Check analytic training gradients against finite differences.
    Fdcheck {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// `tfidf`, `bm25`, or `lm`.
        #[arg(long)]
        ranker: String,
        #[arg(long, default_value_t = 20)]
        batches: usize,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
