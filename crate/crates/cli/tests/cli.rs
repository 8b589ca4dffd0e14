//! End-to-end tests of the `tdvi` binary: full pipeline over a small
//! generated TREC collection, plus exit-code behavior.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tdvi_core::synthetic::{planted, PlantedParams};

fn tdvi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tdvi"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Writes the planted corpus as TREC files plus a .vec embedding file.
struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn build() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let data = planted(
            &PlantedParams {
                num_docs: 80,
                topic_terms: 16,
                noise_terms: 48,
                num_queries: 8,
                dim: 6,
            },
            99,
        );
        let mut sgml = String::new();
        for (docno, tokens) in &data.docs {
            sgml.push_str(&format!(
                "<DOC><DOCNO> {docno} </DOCNO><TEXT>{}</TEXT></DOC>\n",
                tokens.join(" ")
            ));
        }
        fs::write(dir.path().join("corpus.sgml"), sgml).unwrap();

        let mut topics = String::new();
        let mut qrels = String::new();
        for (i, (qid, tokens)) in data.queries.iter().enumerate() {
            let num = i + 1;
            topics.push_str(&format!(
                "<top>\n<num> Number: {num:03}\n<title> Topic: {}\n</top>\n",
                tokens.join(" ")
            ));
            for (docno, grade) in data.qrels.judged(qid) {
                qrels.push_str(&format!("{num} 0 {docno} {grade}\n"));
            }
        }
        fs::write(dir.path().join("topics.txt"), topics).unwrap();
        fs::write(dir.path().join("qrels.txt"), qrels).unwrap();

        let mut vec_file = Vec::new();
        data.embeddings.write_vec_format(&mut vec_file).unwrap();
        fs::write(dir.path().join("vectors.vec"), vec_file).unwrap();

        fs::write(dir.path().join("stopwords.txt"), "the\nof\n# comment\n").unwrap();
        Fixture { dir }
    }
}

fn file_nonempty(path: &Path) -> bool {
    fs::metadata(path).map(|m| m.len() > 0).unwrap_or(false)
}

#[test]
fn full_pipeline() {
    let fx = Fixture::build();
    let idx = fx.path("idx.tdvi");
    run_ok(
        tdvi()
            .arg("index")
            .args(["--corpus"])
            .arg(fx.path("corpus.sgml"))
            .args(["--stopwords"])
            .arg(fx.path("stopwords.txt"))
            .args(["--out"])
            .arg(&idx),
    );
    assert!(file_nonempty(&idx));

    // baseline search on the raw index
    let run_a = fx.path("bm25_a.run");
    run_ok(
        tdvi()
            .arg("search")
            .args(["--index"])
            .arg(&idx)
            .args(["--ranker", "bm25", "--k", "20", "--tag", "base"])
            .args(["--topics"])
            .arg(fx.path("topics.txt"))
            .args(["--out"])
            .arg(&run_a),
    );
    let text = fs::read_to_string(&run_a).unwrap();
    let first = text.lines().next().unwrap();
    assert_eq!(first.split_whitespace().count(), 6);
    assert_eq!(first.split_whitespace().nth(1), Some("Q0"));
    assert_eq!(first.split_whitespace().last(), Some("base"));

    // identical invocation gives identical bytes
    let run_b = fx.path("bm25_b.run");
    run_ok(
        tdvi()
            .arg("search")
            .args(["--index"])
            .arg(&idx)
            .args(["--ranker", "bm25", "--k", "20", "--tag", "base"])
            .args(["--topics"])
            .arg(fx.path("topics.txt"))
            .args(["--out"])
            .arg(&run_b),
    );
    assert_eq!(fs::read(&run_a).unwrap(), fs::read(&run_b).unwrap());

    // evaluation prints per-query rows and a summary for each metric
    let out = run_ok(
        tdvi()
            .arg("eval")
            .args(["--run"])
            .arg(&run_a)
            .args(["--qrels"])
            .arg(fx.path("qrels.txt"))
            .args(["--metric", "ndcg@5,recall@1000"]),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout
        .lines()
        .any(|l| l.starts_with("ndcg@5") && l.contains("\tall\t")));
    assert!(stdout
        .lines()
        .any(|l| l.starts_with("recall@1000") && l.contains("\tall\t")));

    // training emits one JSON record per epoch on stderr and writes a model
    let model = fx.path("model.tdvm");
    let out = run_ok(
        tdvi()
            .arg("train")
            .args(["--index"])
            .arg(&idx)
            .args(["--embeddings"])
            .arg(fx.path("vectors.vec"))
            .args(["--topics"])
            .arg(fx.path("topics.txt"))
            .args(["--qrels"])
            .arg(fx.path("qrels.txt"))
            .args(["--ranker", "bm25", "--lambda", "0.05", "--lr", "0.05"])
            .args(["--epochs", "20", "--patience", "20", "--seed", "0"])
            .args(["--out-model"])
            .arg(&model),
    );
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("\"epoch\":0"), "history log:\n{stderr}");
    assert!(stderr.contains("\"ndcg5\":"));
    assert!(file_nonempty(&model));

    // prune with the trained model
    let pruned = fx.path("pruned.tdvi");
    let out = run_ok(
        tdvi()
            .arg("prune")
            .args(["--index"])
            .arg(&idx)
            .args(["--model"])
            .arg(&model)
            .args(["--out"])
            .arg(&pruned),
    );
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("reduction"), "{stderr}");

    // search with model over raw == search over the pruned weighted index
    let run_model = fx.path("model.run");
    run_ok(
        tdvi()
            .arg("search")
            .args(["--index"])
            .arg(&idx)
            .args(["--model"])
            .arg(&model)
            .args(["--ranker", "bm25", "--k", "20", "--tag", "tdv"])
            .args(["--topics"])
            .arg(fx.path("topics.txt"))
            .args(["--out"])
            .arg(&run_model),
    );
    let run_pruned = fx.path("pruned.run");
    run_ok(
        tdvi()
            .arg("search")
            .args(["--index"])
            .arg(&pruned)
            .args(["--ranker", "bm25", "--k", "20", "--tag", "tdv"])
            .args(["--topics"])
            .arg(fx.path("topics.txt"))
            .args(["--out"])
            .arg(&run_pruned),
    );
    assert_eq!(
        fs::read(&run_model).unwrap(),
        fs::read(&run_pruned).unwrap(),
        "pruning must not change any ranked list"
    );

    // eval with significance test against the baseline run
    let out = run_ok(
        tdvi()
            .arg("eval")
            .args(["--run"])
            .arg(&run_model)
            .args(["--qrels"])
            .arg(fx.path("qrels.txt"))
            .args(["--metric", "ndcg@5"])
            .args(["--compare"])
            .arg(&run_a)
            .args(["--comparisons", "2"]),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("t-test"), "{stdout}");

    // bench emits JSON on stdout
    let out = run_ok(
        tdvi()
            .arg("bench")
            .args(["--index"])
            .arg(&pruned)
            .args([
                "--ranker",
                "bm25",
                "--repeats",
                "3",
                "--warmup",
                "1",
                "--k",
                "100",
            ])
            .args(["--topics"])
            .arg(fx.path("topics.txt")),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["ranker"], "bm25");
    assert!(report["mean_ms_per_query"].as_f64().unwrap() >= 0.0);

    // gradient check passes on this index
    let out = run_ok(
        tdvi()
            .arg("fdcheck")
            .args(["--index"])
            .arg(&idx)
            .args(["--embeddings"])
            .arg(fx.path("vectors.vec"))
            .args(["--ranker", "lm", "--batches", "5"]),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("worst relative error"), "{stdout}");
}

#[test]
fn exit_codes() {
    let fx = Fixture::build();

    // unknown subcommand and missing required flag: usage, exit 1
    let out = tdvi().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = tdvi().arg("index").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // unknown ranker name: usage, exit 1
    let idx = fx.path("idx.tdvi");
    run_ok(
        tdvi()
            .arg("index")
            .args(["--corpus"])
            .arg(fx.path("corpus.sgml"))
            .args(["--stopwords"])
            .arg(fx.path("stopwords.txt"))
            .args(["--out"])
            .arg(&idx),
    );
    let out = tdvi()
        .arg("search")
        .args(["--index"])
        .arg(&idx)
        .args(["--ranker", "pagerank"])
        .args(["--topics"])
        .arg(fx.path("topics.txt"))
        .args(["--out"])
        .arg(fx.path("x.run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // pruning a raw index without a model names the missing flag
    let out = tdvi()
        .arg("prune")
        .args(["--index"])
        .arg(&idx)
        .args(["--out"])
        .arg(fx.path("x.tdvi"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));

    // data errors: missing and corrupt index files, exit 2
    let out = tdvi()
        .arg("search")
        .args(["--index"])
        .arg(fx.path("missing.tdvi"))
        .args(["--ranker", "bm25"])
        .args(["--topics"])
        .arg(fx.path("topics.txt"))
        .args(["--out"])
        .arg(fx.path("x.run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    fs::write(fx.path("bad.tdvi"), b"NOPE not an index").unwrap();
    let out = tdvi()
        .arg("search")
        .args(["--index"])
        .arg(fx.path("bad.tdvi"))
        .args(["--ranker", "bm25"])
        .args(["--topics"])
        .arg(fx.path("topics.txt"))
        .args(["--out"])
        .arg(fx.path("x.run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // help exits 0
    let out = tdvi().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}
