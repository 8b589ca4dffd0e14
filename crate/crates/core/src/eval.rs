//! Retrieval evaluation: nDCG@k and Recall@k per query, paired significance
//! testing with Bonferroni correction, and query-level cross-validation for
//! hyperparameter search.
//!
//! Conventions follow trec_eval: linear gain with a `log2(rank+1)` discount,
//! and queries without positive judgments are excluded from metric means.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::corpus::QrelSet;
use crate::ranking::RankedList;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("paired test needs at least 2 queries, got {0}")]
    TooFewQueries(usize),
    #[error("paired test inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cross-validation needs at least {folds} queries, got {queries}")]
    TooFewForFolds { folds: usize, queries: usize },
    #[error("empty hyperparameter grid")]
    EmptyGrid,
}

/// Metric selector, parsed from strings like `ndcg@5` or `recall@1000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    NdcgAt(usize),
    RecallAt(usize),
}

impl Metric {
    pub fn parse(s: &str) -> Option<Self> {
        let (name, k) = s.split_once('@')?;
        let k: usize = k.parse().ok()?;
        match name {
            "ndcg" => Some(Self::NdcgAt(k)),
            "recall" => Some(Self::RecallAt(k)),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::NdcgAt(k) => format!("ndcg@{k}"),
            Self::RecallAt(k) => format!("recall@{k}"),
        }
    }

    pub fn value(&self, run: &RankedList, qrels: &QrelSet) -> Option<f64> {
        match self {
            Self::NdcgAt(k) => ndcg_at_k(run, qrels, *k),
            Self::RecallAt(k) => recall_at_k(run, qrels, *k),
        }
    }
}

/// nDCG@k with linear gain: `DCG = sum_i rel_i / log2(i+1)`, normalized by
/// the ideal DCG from the judgments. `None` when the query has no positive
/// judgment (excluded from means).
pub fn ndcg_at_k(run: &RankedList, qrels: &QrelSet, k: usize) -> Option<f64> {
    let mut ideal: Vec<u32> = qrels.positives(&run.qid).map(|(_, grade)| grade).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 / ((i + 2) as f64).log2())
        .sum();
    let dcg: f64 = run
        .entries
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, (docno, _))| {
            let g = qrels.grade(&run.qid, docno).unwrap_or(0);
            g as f64 / ((i + 2) as f64).log2()
        })
        .sum();
    Some(dcg / idcg)
}

/// Fraction of the query's relevant documents retrieved in the top k.
pub fn recall_at_k(run: &RankedList, qrels: &QrelSet, k: usize) -> Option<f64> {
    let relevant: Vec<&str> = qrels.positives(&run.qid).map(|(d, _)| d).collect();
    if relevant.is_empty() {
        return None;
    }
    let retrieved: std::collections::HashSet<&str> = run
        .entries
        .iter()
        .take(k)
        .map(|(d, _)| d.as_str())
        .collect();
    let hit = relevant.iter().filter(|d| retrieved.contains(*d)).count();
    Some(hit as f64 / relevant.len() as f64)
}

/// Per-query values plus their mean for one metric over one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metric: String,
    pub tag: String,
    pub per_query: Vec<(String, f64)>,
    pub mean: f64,
    /// Queries present in the run but skipped for lack of positive qrels.
    pub excluded: Vec<String>,
}

impl MetricReport {
    /// Tab-separated per-query table with a trailing summary line.
    pub fn write_table(&self, mut w: impl Write) -> std::io::Result<()> {
        for (qid, value) in &self.per_query {
            writeln!(w, "{}\t{}\t{}\t{:.4}", self.metric, self.tag, qid, value)?;
        }
        writeln!(w, "{}\t{}\tall\t{:.4}", self.metric, self.tag, self.mean)
    }
}

/// Evaluates a metric over every ranked list in a run.
pub fn evaluate_runs(
    runs: &[RankedList],
    qrels: &QrelSet,
    metric: Metric,
    tag: &str,
) -> MetricReport {
    let mut per_query = Vec::new();
    let mut excluded = Vec::new();
    for run in runs {
        match metric.value(run, qrels) {
            Some(v) => per_query.push((run.qid.clone(), v)),
            None => excluded.push(run.qid.clone()),
        }
    }
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.iter().map(|(_, v)| v).sum::<f64>() / per_query.len() as f64
    };
    MetricReport {
        metric: metric.name(),
        tag: tag.to_string(),
        per_query,
        mean,
        excluded,
    }
}

/// Why a paired test produced a degenerate p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TTestDegenerate {
    /// All differences identical and zero: the systems are the same, p = 1.
    ZeroMeanZeroVariance,
    /// All differences identical and nonzero: no sampling variance, p = 0.
    NonzeroMeanZeroVariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p_raw: f64,
    pub p_bonferroni: f64,
    pub degenerate: Option<TTestDegenerate>,
}

/// Two-tailed paired t-test on per-query values, with a Bonferroni-corrected
/// p-value for `comparisons` simultaneous tests.
pub fn paired_t_test(a: &[f64], b: &[f64], comparisons: u32) -> Result<TTest, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewQueries(n));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);

    let finish = |t: f64, p_raw: f64, degenerate| TTest {
        t,
        p_raw,
        p_bonferroni: (p_raw * comparisons as f64).min(1.0),
        degenerate,
    };
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            finish(0.0, 1.0, Some(TTestDegenerate::ZeroMeanZeroVariance))
        } else {
            finish(
                f64::INFINITY.copysign(mean),
                0.0,
                Some(TTestDegenerate::NonzeroMeanZeroVariance),
            )
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof");
    let p_raw = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(finish(t, p_raw, None))
}

/// One fold's outcome: the winning config and its held-out per-query values.
#[derive(Debug, Clone)]
pub struct FoldOutcome<C> {
    pub fold: usize,
    pub best: C,
    pub tune_mean: f64,
    pub test_per_query: Vec<(String, f64)>,
    pub test_mean: f64,
}

#[derive(Debug, Clone)]
pub struct CvReport<C> {
    pub folds: Vec<FoldOutcome<C>>,
    /// Held-out values pooled over every query, the headline number.
    pub pooled_mean: f64,
    pub pooled_per_query: Vec<(String, f64)>,
    /// Queries dropped everywhere for lack of positive judgments.
    pub excluded: Vec<String>,
}

/// K-fold cross-validation over queries.
///
/// Queries are shuffled with the seed and split into `folds` contiguous
/// chunks. For each fold, every config is scored by its mean metric on the
/// other folds' queries; the best config (ties to the earlier grid entry) is
/// then evaluated on the held-out fold. `per_query(config, qid)` returns the
/// metric value, or `None` when the query has no positives.
pub fn cross_validate<C: Clone, F>(
    qids: &[String],
    folds: usize,
    grid: &[C],
    seed: u64,
    mut per_query: F,
) -> Result<CvReport<C>, EvalError>
where
    F: FnMut(&C, &str) -> Option<f64>,
{
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if qids.len() < folds || folds == 0 {
        return Err(EvalError::TooFewForFolds {
            folds,
            queries: qids.len(),
        });
    }
    let mut shuffled: Vec<String> = qids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    // Evaluate each (config, query) pair once.
    let mut values: Vec<HashMap<&str, Option<f64>>> = Vec::with_capacity(grid.len());
    for config in grid {
        let mut map = HashMap::new();
        for qid in &shuffled {
            map.insert(qid.as_str(), per_query(config, qid));
        }
        values.push(map);
    }
    let excluded: Vec<String> = shuffled
        .iter()
        .filter(|q| values.iter().all(|m| m[q.as_str()].is_none()))
        .cloned()
        .collect();

    let n = shuffled.len();
    let bounds: Vec<usize> = (0..=folds).map(|i| i * n / folds).collect();
    let mut outcomes = Vec::with_capacity(folds);
    let mut pooled = Vec::new();
    for fold in 0..folds {
        let test: &[String] = &shuffled[bounds[fold]..bounds[fold + 1]];
        let tune: Vec<&String> = shuffled[..bounds[fold]]
            .iter()
            .chain(&shuffled[bounds[fold + 1]..])
            .collect();
        debug_assert!(test.iter().all(|q| !tune.contains(&q)));

        let mut best: Option<(usize, f64)> = None;
        for (ci, map) in values.iter().enumerate() {
            let vals: Vec<f64> = tune.iter().filter_map(|q| map[q.as_str()]).collect();
            if vals.is_empty() {
                continue;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            if best.is_none_or(|(_, m)| mean > m) {
                best = Some((ci, mean));
            }
        }
        let (best_ci, tune_mean) = best.unwrap_or((0, 0.0));
        let test_per_query: Vec<(String, f64)> = test
            .iter()
            .filter_map(|q| values[best_ci][q.as_str()].map(|v| (q.clone(), v)))
            .collect();
        let test_mean = if test_per_query.is_empty() {
            0.0
        } else {
            test_per_query.iter().map(|(_, v)| v).sum::<f64>() / test_per_query.len() as f64
        };
        pooled.extend(test_per_query.iter().cloned());
        outcomes.push(FoldOutcome {
            fold,
            best: grid[best_ci].clone(),
            tune_mean,
            test_per_query,
            test_mean,
        });
    }
    let pooled_mean = if pooled.is_empty() {
        0.0
    } else {
        pooled.iter().map(|(_, v)| v).sum::<f64>() / pooled.len() as f64
    };
    Ok(CvReport {
        folds: outcomes,
        pooled_mean,
        pooled_per_query: pooled,
        excluded,
    })
}
