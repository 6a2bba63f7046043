//! Delay statistics over request logs, and the CSV files they are written to.
//!
//! Undefined quantities (an average over no requests, a hit rate with no
//! cacheable requests) are `None` and appear as empty CSV cells.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Scheme;
use crate::engine::RequestRecord;
use crate::error::{Error, Result};
use crate::model::ServedBy;

pub const REQUEST_LOG_HEADER: [&str; 12] = [
    "slot",
    "un",
    "task",
    "scheme",
    "served_by",
    "cacheable",
    "hit",
    "transmit_s",
    "compute_s",
    "queue_wait_s",
    "processing_s",
    "total_s",
];

pub const SUMMARY_HEADER: [&str; 14] = [
    "label",
    "scheme",
    "seed",
    "measured",
    "local",
    "offloaded",
    "cache_served",
    "cacheable",
    "avg_total_delay_s",
    "std_total_delay_s",
    "avg_offloaded_delay_s",
    "violation_rate",
    "cache_hit_rate",
    "delay_threshold_s",
];

pub const CCDF_HEADER: [&str; 4] = ["threshold", "probability", "scheme", "seed"];

pub const SWEEP_HEADER: [&str; 13] = [
    "axis",
    "value",
    "series",
    "seeds",
    "avg_total_delay_s_mean",
    "avg_total_delay_s_std",
    "avg_offloaded_delay_s_mean",
    "avg_offloaded_delay_s_std",
    "violation_rate_mean",
    "violation_rate_std",
    "cache_hit_rate_mean",
    "cache_hit_rate_std",
    "measured_mean",
];

/// `Pr(D > d)` for each threshold `d` in `grid`.
pub fn ccdf(samples: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|&d| {
            let at_most = sorted.partition_point(|&x| x <= d);
            (d, (sorted.len() - at_most) as f64 / n)
        })
        .collect())
}

/// `n` thresholds spaced evenly in log scale over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

/// Threshold grid used for delay CCDF output.
pub fn default_ccdf_grid() -> Vec<f64> {
    log_grid(1e-4, 10.0, 101)
}

/// Cache-served requests over requests for cacheable tasks.
pub fn hit_rate(records: &[RequestRecord]) -> Option<f64> {
    let cacheable = records.iter().filter(|r| r.cacheable).count();
    if cacheable == 0 {
        return None;
    }
    let hits = records.iter().filter(|r| r.hit).count();
    Some(hits as f64 / cacheable as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub measured: u64,
    pub local: u64,
    pub offloaded: u64,
    pub cache_served: u64,
    pub cacheable: u64,
    pub avg_total_delay_s: Option<f64>,
    pub std_total_delay_s: Option<f64>,
    /// Mean delay of cloudlet-computed requests.
    pub avg_offloaded_delay_s: Option<f64>,
    /// Fraction of cloudlet-computed requests with delay at or above the
    /// threshold.
    pub violation_rate: Option<f64>,
    pub cache_hit_rate: Option<f64>,
    pub delay_threshold_s: f64,
}

/// Sum taken in sorted order, so the result does not depend on input order.
fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

pub fn summarize(records: &[RequestRecord], label: &str, scheme: Scheme, seed: u64, delay_threshold_s: f64) -> RunSummary {
    let mut totals: Vec<f64> = records.iter().map(|r| r.total_s).collect();
    let mut offloaded: Vec<f64> = records.iter().filter(|r| r.is_offloaded()).map(|r| r.total_s).collect();
    let n = totals.len();
    let n_off = offloaded.len();

    let avg = (n > 0).then(|| ordered_sum(&mut totals) / n as f64);
    let std = avg.map(|m| {
        if n < 2 {
            0.0
        } else {
            let mut sq: Vec<f64> = totals.iter().map(|x| (x - m).powi(2)).collect();
            (ordered_sum(&mut sq) / (n - 1) as f64).sqrt()
        }
    });
    let violations = offloaded.iter().filter(|&&d| d >= delay_threshold_s).count();
    let avg_off = (n_off > 0).then(|| ordered_sum(&mut offloaded) / n_off as f64);

    let count = |f: fn(&ServedBy) -> bool| records.iter().filter(|r| f(&r.served_by)).count() as u64;
    RunSummary {
        label: label.to_string(),
        scheme,
        seed,
        measured: n as u64,
        local: count(|s| matches!(s, ServedBy::Local)),
        offloaded: n_off as u64,
        cache_served: count(|s| matches!(s, ServedBy::Cache(_))),
        cacheable: records.iter().filter(|r| r.cacheable).count() as u64,
        avg_total_delay_s: avg,
        std_total_delay_s: std,
        avg_offloaded_delay_s: avg_off,
        violation_rate: (n_off > 0).then(|| violations as f64 / n_off as f64),
        cache_hit_rate: hit_rate(records),
        delay_threshold_s,
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some((mean, std))
}

/// One sweep point: an axis value and a series, summarized over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub series: String,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub series: String,
    pub seeds: usize,
    pub avg_total_delay_s_mean: Option<f64>,
    pub avg_total_delay_s_std: Option<f64>,
    pub avg_offloaded_delay_s_mean: Option<f64>,
    pub avg_offloaded_delay_s_std: Option<f64>,
    pub violation_rate_mean: Option<f64>,
    pub violation_rate_std: Option<f64>,
    pub cache_hit_rate_mean: Option<f64>,
    pub cache_hit_rate_std: Option<f64>,
    pub measured_mean: f64,
}

/// Mean ± std of a metric; undefined if any seed left it undefined.
fn aggregate(runs: &[RunSummary], f: impl Fn(&RunSummary) -> Option<f64>) -> (Option<f64>, Option<f64>) {
    let vals: Option<Vec<f64>> = runs.iter().map(f).collect();
    match vals.as_deref().and_then(mean_std) {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    }
}

pub fn sweep(axis: &str, points: &[SweepPoint]) -> Result<Vec<SweepRow>> {
    let mut expected: Option<usize> = None;
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let n = p.runs.len();
        if n == 0 {
            return Err(Error::EmptySamples);
        }
        match expected {
            Some(e) if e != n => return Err(Error::RaggedSweep(e, n)),
            _ => expected = Some(n),
        }
        let (d_m, d_s) = aggregate(&p.runs, |r| r.avg_total_delay_s);
        let (o_m, o_s) = aggregate(&p.runs, |r| r.avg_offloaded_delay_s);
        let (v_m, v_s) = aggregate(&p.runs, |r| r.violation_rate);
        let (h_m, h_s) = aggregate(&p.runs, |r| r.cache_hit_rate);
        let measured: Vec<f64> = p.runs.iter().map(|r| r.measured as f64).collect();
        rows.push(SweepRow {
            axis: axis.to_string(),
            value: p.value,
            series: p.series.clone(),
            seeds: n,
            avg_total_delay_s_mean: d_m,
            avg_total_delay_s_std: d_s,
            avg_offloaded_delay_s_mean: o_m,
            avg_offloaded_delay_s_std: o_s,
            violation_rate_mean: v_m,
            violation_rate_std: v_s,
            cache_hit_rate_mean: h_m,
            cache_hit_rate_std: h_s,
            measured_mean: mean_std(&measured).map_or(0.0, |m| m.0),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfRow {
    pub threshold: f64,
    pub probability: f64,
    pub scheme: String,
    pub seed: u64,
}

pub fn ccdf_rows(records: &[RequestRecord], grid: &[f64], series: &str, seed: u64) -> Result<Vec<CcdfRow>> {
    let totals: Vec<f64> = records.iter().map(|r| r.total_s).collect();
    Ok(ccdf(&totals, grid)?
        .into_iter()
        .map(|(threshold, probability)| CcdfRow {
            threshold,
            probability,
            scheme: series.to_string(),
            seed,
        })
        .collect())
}

/// Writes `rows` with a header even when there are no rows.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV whose header must equal `header` exactly.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Malformed(format!(
            "{}: header {:?} does not match {:?}",
            path.display(),
            found,
            header
        )));
    }
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_request_log(path: &Path, records: &[RequestRecord]) -> Result<()> {
    write_csv(path, &REQUEST_LOG_HEADER, records)
}

pub fn read_request_log(path: &Path) -> Result<Vec<RequestRecord>> {
    read_csv(path, &REQUEST_LOG_HEADER)
}

pub fn write_summaries(path: &Path, rows: &[RunSummary]) -> Result<()> {
    write_csv(path, &SUMMARY_HEADER, rows)
}

pub fn write_ccdf(path: &Path, rows: &[CcdfRow]) -> Result<()> {
    write_csv(path, &CCDF_HEADER, rows)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_csv(path, &SWEEP_HEADER, rows)
}
