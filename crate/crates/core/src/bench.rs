//! Retrieval timing and index footprint measurement.
//!
//! Timing is wall-clock and single-threaded: every query runs `warmup`
//! unmeasured passes, then `repeats` measured passes, and the report carries
//! the mean and standard deviation of the per-pass per-query times. Footprint
//! counting (posting entries, serialized bytes) is exact.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::index::store::IndexFile;
use crate::index::{Bow, PostingsView};
use crate::ranking::{retrieve, Ranker, RankerParams, StatsBundle};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no topics to benchmark")]
    NoTopics,
    #[error("need repeats >= 3 and warmup >= 1, got repeats {repeats}, warmup {warmup}")]
    BadParams { repeats: usize, warmup: usize },
}

/// Exact size measures of an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Footprint {
    pub postings_entries: u64,
    pub serialized_bytes: u64,
}

/// Posting-entry count and serialized byte size of an index file.
pub fn index_footprint(file: &IndexFile) -> Footprint {
    Footprint {
        postings_entries: file.postings_entries(),
        serialized_bytes: file.save_to_vec().len() as u64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub ranker: String,
    pub queries: usize,
    pub k: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub mean_ms_per_query: f64,
    pub std_ms_per_query: f64,
    pub postings_entries: u64,
    pub serialized_bytes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_reduction_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entries_reduction_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes_reduction_pct: Option<f64>,
}

impl BenchReport {
    pub fn with_footprint(mut self, fp: Footprint) -> Self {
        self.postings_entries = fp.postings_entries;
        self.serialized_bytes = fp.serialized_bytes;
        self
    }

    /// Human-readable table.
    pub fn write_table(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "ranker            {}", self.ranker)?;
        writeln!(w, "queries           {}", self.queries)?;
        writeln!(w, "top-k             {}", self.k)?;
        writeln!(
            w,
            "time/query        {:.3} ms (std {:.3}, {} repeats, {} warmup)",
            self.mean_ms_per_query, self.std_ms_per_query, self.repeats, self.warmup
        )?;
        writeln!(w, "posting entries   {}", self.postings_entries)?;
        writeln!(w, "serialized bytes  {}", self.serialized_bytes)?;
        if let Some(p) = self.time_reduction_pct {
            writeln!(w, "time reduction    {p:.2}%")?;
        }
        if let Some(p) = self.entries_reduction_pct {
            writeln!(w, "entries reduction {p:.2}%")?;
        }
        if let Some(p) = self.bytes_reduction_pct {
            writeln!(w, "bytes reduction   {p:.2}%")?;
        }
        Ok(())
    }
}

/// Times retrieval of every query over the view. Footprint fields are left
/// at zero; attach them with [`BenchReport::with_footprint`].
#[allow(clippy::too_many_arguments)]
pub fn time_retrieval<V: PostingsView>(
    view: &V,
    ranker: Ranker,
    stats: &StatsBundle,
    queries: &[(String, Bow)],
    k: usize,
    repeats: usize,
    warmup: usize,
    params: &RankerParams,
) -> Result<BenchReport, BenchError> {
    if queries.is_empty() {
        return Err(BenchError::NoTopics);
    }
    if repeats < 3 || warmup < 1 {
        return Err(BenchError::BadParams { repeats, warmup });
    }
    for _ in 0..warmup {
        for (_, q) in queries {
            std::hint::black_box(retrieve(view, ranker, stats, q, k, params));
        }
    }
    let mut pass_means = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        for (_, q) in queries {
            std::hint::black_box(retrieve(view, ranker, stats, q, k, params));
        }
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        pass_means.push(elapsed / queries.len() as f64);
    }
    let mean = pass_means.iter().sum::<f64>() / repeats as f64;
    let var = pass_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (repeats as f64 - 1.0);
    Ok(BenchReport {
        ranker: ranker.name().to_string(),
        queries: queries.len(),
        k,
        repeats,
        warmup,
        mean_ms_per_query: mean,
        std_ms_per_query: var.sqrt(),
        postings_entries: 0,
        serialized_bytes: 0,
        time_reduction_pct: None,
        entries_reduction_pct: None,
        bytes_reduction_pct: None,
    })
}

fn reduction_pct(before: f64, after: f64) -> f64 {
    if before == 0.0 {
        0.0
    } else {
        (1.0 - after / before) * 100.0
    }
}

/// The `after` report extended with percentage reductions relative to
/// `before`: `(1 - after/before) * 100` for time, entries, and bytes.
pub fn compare_report(before: &BenchReport, after: &BenchReport) -> BenchReport {
    BenchReport {
        time_reduction_pct: Some(reduction_pct(
            before.mean_ms_per_query,
            after.mean_ms_per_query,
        )),
        entries_reduction_pct: Some(reduction_pct(
            before.postings_entries as f64,
            after.postings_entries as f64,
        )),
        bytes_reduction_pct: Some(reduction_pct(
            before.serialized_bytes as f64,
            after.serialized_bytes as f64,
        )),
        ..after.clone()
    }
}
