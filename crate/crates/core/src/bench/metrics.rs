//! Per-stream statistics over the measurement window.

use serde::{Deserialize, Serialize};

/// One row of an arrivals file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalRow {
    pub stream: String,
    pub seq: u64,
    pub send_ts_us: Option<u64>,
    pub recv_ts_us: u64,
    /// Gap to the previous arrival of the same stream; empty for the first.
    pub inter_arrival_us: Option<u64>,
    pub size_bytes: usize,
}

/// Run parameters a stream summary depends on.
///
/// Delivery is counted over the whole run; timing statistics only cover
/// arrivals received at or after `warmup_us`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub period_us: u64,
    pub warmup_us: u64,
    pub duration_us: u64,
}

impl Window {
    /// Emissions in the run: `floor(duration / period)`.
    pub fn expected(&self) -> u64 {
        self.duration_us / self.period_us
    }
}

/// Mean, spread and extremes of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub min: u64,
    pub p50: u64,
    pub p95: u64,
    pub p99: u64,
    pub max: u64,
}

impl Stats {
    pub fn of(samples: &[u64]) -> Stats {
        if samples.is_empty() {
            return Stats::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let mean = sorted.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
        let var = sorted.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n as f64;
        Stats {
            n,
            mean,
            stddev: var.sqrt(),
            min: sorted[0],
            p50: nearest_rank(&sorted, 50.0),
            p95: nearest_rank(&sorted, 95.0),
            p99: nearest_rank(&sorted, 99.0),
            max: sorted[n - 1],
        }
    }
}

/// Nearest-rank percentile of an ascending, non-empty sample.
pub fn nearest_rank(sorted: &[u64], p: f64) -> u64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub stream: String,
    pub period_us: u64,
    pub duration_us: u64,
    pub warmup_us: u64,
    /// Arrivals received at or after the warmup.
    pub count: usize,
    pub expected: u64,
    /// Distinct sequence numbers below `expected` received during the run.
    pub received: u64,
    pub delivery_ratio: f64,
    pub inter_arrival: Stats,
    pub mean_e2e_us: Option<f64>,
    pub mean_size_bytes: f64,
}

/// Fills `inter_arrival_us` for rows of one stream, sorting them by
/// receive time first.
pub fn fill_inter_arrivals(rows: &mut [ArrivalRow]) {
    rows.sort_by_key(|r| (r.recv_ts_us, r.seq));
    let mut prev = None;
    for r in rows.iter_mut() {
        r.inter_arrival_us = prev.map(|p| r.recv_ts_us - p);
        prev = Some(r.recv_ts_us);
    }
}

/// Summarizes the rows of one stream, which must be sorted by receive time
/// with inter-arrivals filled.
pub fn summarize(stream: &str, rows: &[ArrivalRow], window: Window) -> StreamSummary {
    let in_window: Vec<&ArrivalRow> = rows.iter().filter(|r| r.recv_ts_us >= window.warmup_us).collect();
    let gaps: Vec<u64> = in_window.iter().filter_map(|r| r.inter_arrival_us).collect();
    let expected = window.expected();
    let mut seqs: Vec<u64> = rows.iter().map(|r| r.seq).filter(|&s| s < expected).collect();
    seqs.sort_unstable();
    seqs.dedup();
    let received = seqs.len() as u64;
    let e2e: Vec<u64> = in_window
        .iter()
        .filter_map(|r| r.send_ts_us.map(|s| r.recv_ts_us.saturating_sub(s)))
        .collect();
    let mean = |v: &[u64]| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
    let sizes: Vec<u64> = in_window.iter().map(|r| r.size_bytes as u64).collect();
    StreamSummary {
        stream: stream.to_string(),
        period_us: window.period_us,
        duration_us: window.duration_us,
        warmup_us: window.warmup_us,
        count: in_window.len(),
        expected,
        received,
        delivery_ratio: if expected == 0 { 0.0 } else { received as f64 / expected as f64 },
        inter_arrival: Stats::of(&gaps),
        mean_e2e_us: (!e2e.is_empty()).then(|| mean(&e2e)),
        mean_size_bytes: if sizes.is_empty() { 0.0 } else { mean(&sizes) },
    }
}
