use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use tdvi_core::corpus::{
    load_stopwords, parse_qrels, parse_trec_documents, parse_trec_topics, preprocess,
    preprocess_recording, PreprocessConfig, QrelSet, StemmerKind, SurfaceForms,
};
use tdvi_core::embeddings::{align, load_vectors, EmbeddingMatrix, OovPolicy};
use tdvi_core::index::store::{IndexFile, IndexKind};
use tdvi_core::index::{apply_tdv, bow, build_index, prune, Bow, DocId, PostingsView};
use tdvi_core::ranking::{ranked_list, read_trec_run, retrieve, write_trec_run, RankedList};
use tdvi_core::tdvmodel::{load_model, save_model, tdv_forward, TdvModelFile};
use tdvi_core::training::{
    fd_check, sample_pairs, train, DocColumns, TrainConfig, TrainContext, TrainPair, TrainRanker,
};
use tdvi_core::{bench, eval, Ranker, RankerParams, StatsBundle};

use crate::{Cli, CliError, Command};

/// Marker for errors that should exit with the usage code.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    let result = match cli.command {
        Command::Index {
            corpus,
            stopwords,
            stemmer,
            out,
        } => cmd_index(&corpus, &stopwords, &stemmer, &out),
        Command::Train {
            index,
            embeddings,
            topics,
            qrels,
            ranker,
            lambda,
            lr,
            batch_size,
            epochs,
            patience,
            neg_per_pos,
            out_model,
        } => cmd_train(
            &index,
            &embeddings,
            &topics,
            &qrels,
            &ranker,
            lambda,
            lr,
            batch_size,
            epochs,
            patience,
            neg_per_pos,
            seed,
            &out_model,
        ),
        Command::Prune { index, model, out } => cmd_prune(&index, model.as_deref(), &out),
        Command::Search {
            index,
            model,
            ranker,
            topics,
            k,
            out,
            tag,
        } => cmd_search(&index, model.as_deref(), &ranker, &topics, k, &out, &tag),
        Command::Eval {
            run,
            qrels,
            metric,
            compare,
            comparisons,
        } => cmd_eval(&run, &qrels, &metric, compare.as_deref(), comparisons),
        Command::Bench {
            index,
            ranker,
            topics,
            k,
            repeats,
            warmup,
        } => cmd_bench(&index, &ranker, &topics, k, repeats, warmup),
        Command::Fdcheck {
            index,
            embeddings,
            ranker,
            batches,
        } => cmd_fdcheck(&index, &embeddings, &ranker, batches, seed),
    };
    result.map_err(|e| match e.downcast::<UsageError>() {
        Ok(u) => CliError::Usage(u.0),
        Err(e) => CliError::Data(e),
    })
}

fn collect_files(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let meta = std::fs::metadata(path)
        .with_context(|| format!("cannot access corpus path {}", path.display()))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let entry = entry?;
            let p = entry.path();
            if entry.file_type()?.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    Ok(files)
}

fn load_index_file(path: &Path) -> anyhow::Result<IndexFile> {
    IndexFile::load_from_path(path).with_context(|| format!("cannot load index {}", path.display()))
}

fn load_model_file(path: &Path) -> anyhow::Result<TdvModelFile> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("cannot open model {}", path.display()))?,
    );
    Ok(load_model(reader)?)
}

fn load_embedding_matrix(path: &Path, file: &IndexFile) -> anyhow::Result<EmbeddingMatrix> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("cannot open embeddings {}", path.display()))?,
    );
    let table = load_vectors(reader)?;
    if table.duplicates > 0 {
        eprintln!(
            "warning: {} duplicate words in embedding file",
            table.duplicates
        );
    }
    let matrix = align(
        &file.vocab,
        &table,
        OovPolicy::Zeros,
        file.surfaces.as_deref(),
    );
    if !matrix.oov_ids.is_empty() {
        eprintln!(
            "note: {} of {} vocabulary terms have no pre-trained vector",
            matrix.oov_ids.len(),
            file.vocab.len()
        );
    }
    Ok(matrix)
}

/// Parses a topic file and turns the titles into bags of words with the
/// index's own preprocessing settings.
fn load_topic_bows(path: &Path, file: &IndexFile) -> anyhow::Result<Vec<(String, Bow)>> {
    let reader =
        File::open(path).with_context(|| format!("cannot open topics {}", path.display()))?;
    let parsed = parse_trec_topics(reader)?;
    for err in &parsed.errors {
        eprintln!("warning: {err}");
    }
    Ok(parsed
        .topics
        .into_iter()
        .map(|t| {
            let tokens = preprocess(&t.title, &file.preprocess);
            (t.qid, bow(&tokens, &file.vocab))
        })
        .collect())
}

fn load_qrel_file(path: &Path) -> anyhow::Result<QrelSet> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("cannot open qrels {}", path.display()))?,
    );
    Ok(parse_qrels(reader)?)
}

fn cmd_index(corpus: &Path, stopwords: &Path, stemmer: &str, out: &Path) -> anyhow::Result<()> {
    let stemmer = match stemmer {
        "porter" => StemmerKind::Porter,
        "none" => StemmerKind::None,
        other => return Err(usage(format!("unknown --stemmer {other:?} (porter|none)"))),
    };
    let stop_reader = BufReader::new(
        File::open(stopwords)
            .with_context(|| format!("cannot open stopwords {}", stopwords.display()))?,
    );
    let cfg = PreprocessConfig {
        stopwords: load_stopwords(stop_reader)?,
        stemmer,
        lowercase: true,
    };

    let mut surfaces = SurfaceForms::new();
    let mut docs: Vec<(String, Vec<String>)> = Vec::new();
    for path in collect_files(corpus)? {
        let reader =
            File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
        let parsed =
            parse_trec_documents(reader).with_context(|| format!("parsing {}", path.display()))?;
        for doc in parsed {
            let tokens = preprocess_recording(&doc.text, &cfg, &mut surfaces);
            docs.push((doc.docno, tokens));
        }
    }
    let doc_count = docs.len();
    let (vocab, idx) = build_index(docs)?;
    let surface_table: Vec<String> = vocab
        .terms()
        .map(|t| surfaces.best(t).unwrap_or(t).to_string())
        .collect();
    let entries: u64 = (0..idx.num_terms() as u32)
        .map(|t| idx.postings(t).len() as u64)
        .sum();
    let file = IndexFile {
        vocab,
        preprocess: cfg,
        surfaces: Some(surface_table),
        kind: IndexKind::Raw(idx),
    };
    file.save_to_path(out)?;
    eprintln!(
        "indexed {} documents, {} terms, {} posting entries -> {}",
        doc_count,
        file.num_terms(),
        entries,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    index: &Path,
    embeddings: &Path,
    topics: &Path,
    qrels_path: &Path,
    ranker: &str,
    lambda: f64,
    lr: f64,
    batch_size: usize,
    epochs: usize,
    patience: usize,
    neg_per_pos: usize,
    seed: u64,
    out_model: &Path,
) -> anyhow::Result<()> {
    let ranker = TrainRanker::parse(ranker)
        .ok_or_else(|| usage(format!("unknown --ranker {ranker:?} (tfidf|bm25|lm)")))?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(usage(format!("--lambda {lambda} is outside [0, 1]")));
    }
    let file = load_index_file(index)?;
    let idx = match &file.kind {
        IndexKind::Raw(idx) => idx,
        IndexKind::Weighted(_) => {
            return Err(anyhow!(
                "training needs a raw tf index, this one is weighted"
            ))
        }
    };
    let emb = load_embedding_matrix(embeddings, &file)?;
    let qrels = load_qrel_file(qrels_path)?;
    let queries: Vec<(String, Bow)> = load_topic_bows(topics, &file)?
        .into_iter()
        .filter(|(qid, q)| {
            let keep = qrels.has_positives(qid) && !q.is_empty();
            if !keep {
                eprintln!(
                    "warning: query {qid} skipped (no positives or empty after preprocessing)"
                );
            }
            keep
        })
        .collect();
    if queries.is_empty() {
        return Err(anyhow!("no trainable queries (need positives in qrels)"));
    }

    // Baseline run for negative sampling: smoothed BM25 over the raw index.
    let params = RankerParams::default();
    let stats = StatsBundle::compute(idx)?;
    let base_run: HashMap<String, Vec<DocId>> = queries
        .iter()
        .map(|(qid, q)| {
            let hits = retrieve(idx, Ranker::Bm25, &stats, q, 1000, &params);
            (qid.clone(), hits.into_iter().map(|(d, _)| d).collect())
        })
        .collect();
    let (pairs, warnings) = sample_pairs(idx, &queries, &qrels, &base_run, neg_per_pos, seed);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "training on {} pairs from {} queries",
        pairs.len(),
        queries.len()
    );

    let cfg = TrainConfig {
        ranker,
        lambda,
        lr,
        batch_size,
        max_epochs: epochs,
        patience,
        seed,
        params,
        ..Default::default()
    };
    let outcome = train(idx, &emb, &queries, &qrels, &pairs, &cfg, |record| {
        eprintln!(
            "{}",
            serde_json::to_string(record).expect("epoch record serializes")
        );
    })?;
    let tdv = tdv_forward(&emb, &outcome.params)?;
    let zero = tdv.iter().filter(|&&v| v == 0.0).count();
    let model = TdvModelFile {
        seed,
        params: outcome.params,
        tdv,
    };
    let mut writer = BufWriter::new(
        File::create(out_model)
            .with_context(|| format!("cannot create {}", out_model.display()))?,
    );
    save_model(&model, &mut writer)?;
    writer.flush()?;
    eprintln!(
        "best epoch {} (nDCG@5 {:.4}); {} of {} terms at zero TDV -> {}",
        outcome.best_epoch,
        outcome.history[outcome.best_epoch].ndcg5,
        zero,
        model.tdv.len(),
        out_model.display()
    );
    Ok(())
}

fn cmd_prune(index: &Path, model: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let file = load_index_file(index)?;
    let weighted = match (&file.kind, model) {
        (IndexKind::Raw(idx), Some(model_path)) => {
            let model = load_model_file(model_path)?;
            apply_tdv(idx, &model.tdv)?
        }
        (IndexKind::Raw(_), None) => {
            return Err(usage("--model is required to prune a raw index"));
        }
        (IndexKind::Weighted(w), None) => w.clone(),
        (IndexKind::Weighted(_), Some(_)) => {
            return Err(usage("--model does not apply to an already weighted index"));
        }
    };
    let (pruned, report) = prune(&weighted);
    let out_file = IndexFile {
        kind: IndexKind::Weighted(pruned),
        ..file
    };
    out_file.save_to_path(out)?;
    eprintln!(
        "pruned {} terms: {} -> {} posting entries ({:.2}% reduction) -> {}",
        report.terms_pruned,
        report.entries_before,
        report.entries_after,
        report.reduction_pct(),
        out.display()
    );
    Ok(())
}

fn search_lists<V: PostingsView>(
    view: &V,
    ranker: Ranker,
    queries: &[(String, Bow)],
    k: usize,
    params: &RankerParams,
) -> anyhow::Result<Vec<RankedList>> {
    let stats = StatsBundle::compute(view)?;
    Ok(queries
        .iter()
        .map(|(qid, q)| ranked_list(view, qid, &retrieve(view, ranker, &stats, q, k, params)))
        .collect())
}

fn cmd_search(
    index: &Path,
    model: Option<&Path>,
    ranker: &str,
    topics: &Path,
    k: usize,
    out: &Path,
    tag: &str,
) -> anyhow::Result<()> {
    let ranker = Ranker::parse(ranker).ok_or_else(|| {
        usage(format!(
            "unknown --ranker {ranker:?} (tfidf-classic|tfidf|bm25|lm)"
        ))
    })?;
    let file = load_index_file(index)?;
    let queries = load_topic_bows(topics, &file)?;
    let params = RankerParams::default();
    let lists = match (&file.kind, model) {
        (IndexKind::Raw(idx), None) => search_lists(idx, ranker, &queries, k, &params)?,
        (IndexKind::Raw(idx), Some(model_path)) => {
            let model = load_model_file(model_path)?;
            let widx = apply_tdv(idx, &model.tdv)?;
            search_lists(&widx, ranker, &queries, k, &params)?
        }
        (IndexKind::Weighted(widx), None) => search_lists(widx, ranker, &queries, k, &params)?,
        (IndexKind::Weighted(_), Some(_)) => {
            return Err(usage("--model does not apply to an already weighted index"));
        }
    };
    let mut writer = BufWriter::new(
        File::create(out).with_context(|| format!("cannot create {}", out.display()))?,
    );
    write_trec_run(&mut writer, &lists, tag)?;
    writer.flush()?;
    let total: usize = lists.iter().map(|l| l.entries.len()).sum();
    eprintln!(
        "wrote {} result lines for {} topics -> {}",
        total,
        lists.len(),
        out.display()
    );
    Ok(())
}

fn cmd_eval(
    run_path: &Path,
    qrels_path: &Path,
    metrics: &str,
    compare: Option<&Path>,
    comparisons: u32,
) -> anyhow::Result<()> {
    let parse_metrics = |s: &str| -> anyhow::Result<Vec<eval::Metric>> {
        s.split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(|m| {
                eval::Metric::parse(m)
                    .ok_or_else(|| usage(format!("unknown metric {m:?} (ndcg@K|recall@K)")))
            })
            .collect()
    };
    let metrics = parse_metrics(metrics)?;
    if metrics.is_empty() {
        return Err(usage("no metrics given"));
    }
    let runs = read_trec_run(BufReader::new(
        File::open(run_path).with_context(|| format!("cannot open run {}", run_path.display()))?,
    ))?;
    let qrels = load_qrel_file(qrels_path)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();

    let compare_runs = match compare {
        Some(path) => Some(read_trec_run(BufReader::new(
            File::open(path).with_context(|| format!("cannot open run {}", path.display()))?,
        ))?),
        None => None,
    };

    for metric in &metrics {
        let report = eval::evaluate_runs(&runs, &qrels, *metric, "run");
        report.write_table(&mut out)?;
        for qid in &report.excluded {
            eprintln!("note: query {qid} has no positive qrels, excluded");
        }
        if let Some(other) = &compare_runs {
            let other_report = eval::evaluate_runs(other, &qrels, *metric, "compare");
            let by_qid: HashMap<&str, f64> = other_report
                .per_query
                .iter()
                .map(|(q, v)| (q.as_str(), *v))
                .collect();
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (qid, v) in &report.per_query {
                if let Some(&w) = by_qid.get(qid.as_str()) {
                    a.push(*v);
                    b.push(w);
                }
            }
            let t = eval::paired_t_test(&a, &b, comparisons)?;
            writeln!(
                out,
                "{}\tt-test\tn={}\tmean_diff={:.4}\tt={:.4}\tp={:.4}\tp_bonferroni={:.4}{}",
                metric.name(),
                a.len(),
                (report.mean - other_report.mean),
                t.t,
                t.p_raw,
                t.p_bonferroni,
                match t.degenerate {
                    Some(d) => format!("\tdegenerate={d:?}"),
                    None => String::new(),
                }
            )?;
        }
    }
    Ok(())
}

fn cmd_bench(
    index: &Path,
    ranker: &str,
    topics: &Path,
    k: usize,
    repeats: usize,
    warmup: usize,
) -> anyhow::Result<()> {
    let ranker = Ranker::parse(ranker).ok_or_else(|| {
        usage(format!(
            "unknown --ranker {ranker:?} (tfidf-classic|tfidf|bm25|lm)"
        ))
    })?;
    let file = load_index_file(index)?;
    let queries = load_topic_bows(topics, &file)?;
    let params = RankerParams::default();
    let report = match &file.kind {
        IndexKind::Raw(idx) => {
            let stats = StatsBundle::compute(idx)?;
            bench::time_retrieval(idx, ranker, &stats, &queries, k, repeats, warmup, &params)?
        }
        IndexKind::Weighted(widx) => {
            let stats = StatsBundle::compute(widx)?;
            bench::time_retrieval(widx, ranker, &stats, &queries, k, repeats, warmup, &params)?
        }
    }
    .with_footprint(bench::index_footprint(&file));
    report.write_table(std::io::stderr())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_fdcheck(
    index: &Path,
    embeddings: &Path,
    ranker: &str,
    batches: usize,
    seed: u64,
) -> anyhow::Result<()> {
    use rand::{Rng, SeedableRng};

    let ranker = TrainRanker::parse(ranker)
        .ok_or_else(|| usage(format!("unknown --ranker {ranker:?} (tfidf|bm25|lm)")))?;
    let file = load_index_file(index)?;
    let idx = match &file.kind {
        IndexKind::Raw(idx) => idx,
        IndexKind::Weighted(_) => {
            return Err(anyhow!(
                "fdcheck needs a raw tf index, this one is weighted"
            ))
        }
    };
    if idx.num_docs() < 2 {
        return Err(anyhow!("fdcheck needs at least 2 documents"));
    }
    let emb = load_embedding_matrix(embeddings, &file)?;
    let cols = DocColumns::build(idx);
    let ctx = TrainContext {
        cols: &cols,
        emb: &emb,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let num_docs = idx.num_docs() as DocId;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for batch_no in 0..batches {
        let mut pairs = Vec::new();
        for _ in 0..4 {
            let d_pos = loop {
                let d = rng.random_range(0..num_docs);
                if !cols.col(d).is_empty() {
                    break d;
                }
            };
            let d_neg = loop {
                let d = rng.random_range(0..num_docs);
                if d != d_pos && !cols.col(d).is_empty() {
                    break d;
                }
            };
            let col = cols.col(d_pos);
            let mut counts = std::collections::BTreeMap::new();
            for _ in 0..2 {
                let (t, _) = col[rng.random_range(0..col.len())];
                *counts.entry(t).or_insert(0u32) += 1;
            }
            let query = Bow::from_entries(counts.into_iter().collect(), 0);
            pairs.push(TrainPair {
                qid: format!("fd{batch_no}"),
                query,
                d_pos,
                d_neg,
            });
        }
        let params = tdvi_core::tdvmodel::init_params(
            emb.dim(),
            seed.wrapping_mul(1000) + batch_no as u64 + 1,
        );
        let cfg = TrainConfig {
            ranker,
            lambda: 0.05,
            ..Default::default()
        };
        match fd_check(&ctx, &pairs, &params, &cfg, 1e-4) {
            Ok(err) => {
                println!("batch {batch_no}: max relative error {err:.3e}");
                worst = worst.max(err);
                checked += 1;
            }
            Err(tdvi_core::training::TrainError::DegenerateBatch) => {
                eprintln!("batch {batch_no}: skipped (no nonzero TDV mass)");
            }
            Err(e) => return Err(e.into()),
        }
    }
    if checked == 0 {
        return Err(anyhow!("every batch was degenerate, nothing checked"));
    }
    println!(
        "{}: worst relative error {worst:.3e} over {checked} batches",
        ranker.name()
    );
    if worst >= 1e-3 {
        return Err(anyhow!(
            "gradient check failed: {worst:.3e} >= 1e-3 for {}",
            ranker.name()
        ));
    }
    Ok(())
}
