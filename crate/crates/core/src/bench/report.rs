//! Result files of a run and the cross-run comparison.
//!
//! A run directory holds one `arrivals_<stream>.csv` per stream,
//! `summary.csv`, `counters.csv`, the effective `config.toml` and a
//! `run.toml` manifest naming the rest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::payload::Serialization;
use crate::traffic::NodeReport;

use super::metrics::{fill_inter_arrivals, summarize, ArrivalRow, Stats, StreamSummary, Window};
use super::{Arm, BenchError, Config, RunOptions};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const COUNTERS_FILE: &str = "counters.csv";
pub const MANIFEST_FILE: &str = "run.toml";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestStream {
    pub label: String,
    pub file: String,
    pub period_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub arm: Arm,
    pub serialization: Serialization,
    pub duration_us: u64,
    pub warmup_us: u64,
    pub seed: u64,
    pub sim: bool,
    pub processes: bool,
    pub streams: Vec<ManifestStream>,
    /// Problems nodes reported during the run.
    #[serde(default)]
    pub errors: Vec<String>,
    /// Notes about the run's configuration.
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub summaries: Vec<StreamSummary>,
    pub reports: Vec<NodeReport>,
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub arm: Arm,
    pub serialization: Serialization,
    pub stream: String,
    pub period_us: u64,
    pub duration_us: u64,
    pub warmup_us: u64,
    pub count: usize,
    pub expected: u64,
    pub received: u64,
    pub delivery_ratio: f64,
    pub ia_n: usize,
    pub ia_mean_us: f64,
    pub ia_stddev_us: f64,
    pub ia_min_us: u64,
    pub ia_p50_us: u64,
    pub ia_p95_us: u64,
    pub ia_p99_us: u64,
    pub ia_max_us: u64,
    pub e2e_mean_us: Option<f64>,
    pub size_mean_bytes: f64,
}

impl SummaryRow {
    pub fn new(arm: Arm, serialization: Serialization, s: &StreamSummary) -> SummaryRow {
        let ia = &s.inter_arrival;
        SummaryRow {
            arm,
            serialization,
            stream: s.stream.clone(),
            period_us: s.period_us,
            duration_us: s.duration_us,
            warmup_us: s.warmup_us,
            count: s.count,
            expected: s.expected,
            received: s.received,
            delivery_ratio: s.delivery_ratio,
            ia_n: ia.n,
            ia_mean_us: ia.mean,
            ia_stddev_us: ia.stddev,
            ia_min_us: ia.min,
            ia_p50_us: ia.p50,
            ia_p95_us: ia.p95,
            ia_p99_us: ia.p99,
            ia_max_us: ia.max,
            e2e_mean_us: s.mean_e2e_us,
            size_mean_bytes: s.mean_size_bytes,
        }
    }

    pub fn inter_arrival(&self) -> Stats {
        Stats {
            n: self.ia_n,
            mean: self.ia_mean_us,
            stddev: self.ia_stddev_us,
            min: self.ia_min_us,
            p50: self.ia_p50_us,
            p95: self.ia_p95_us,
            p99: self.ia_p99_us,
            max: self.ia_max_us,
        }
    }
}

#[derive(Debug, Serialize)]
struct CounterRow<'a> {
    node: &'a str,
    counter: String,
    value: String,
}

/// File name for a stream label: `/trailer/lidar` becomes
/// `arrivals_trailer_lidar.csv`.
pub fn arrivals_file(label: &str) -> String {
    let slug: String = label
        .trim_start_matches('/')
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    format!("arrivals_{slug}.csv")
}

fn out_err(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Output(format!("{}: {e}", path.display()))
}

fn in_err(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Input(format!("{}: {e}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<(), BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| out_err(path, e))?;
    w.write_record(header).map_err(|e| out_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| out_err(path, e))?;
    }
    w.flush().map_err(|e| out_err(path, e))
}

pub const ARRIVALS_HEADER: [&str; 6] =
    ["stream", "seq", "send_ts_us", "recv_ts_us", "inter_arrival_us", "size_bytes"];

const SUMMARY_HEADER: [&str; 20] = [
    "arm",
    "serialization",
    "stream",
    "period_us",
    "duration_us",
    "warmup_us",
    "count",
    "expected",
    "received",
    "delivery_ratio",
    "ia_n",
    "ia_mean_us",
    "ia_stddev_us",
    "ia_min_us",
    "ia_p50_us",
    "ia_p95_us",
    "ia_p99_us",
    "ia_max_us",
    "e2e_mean_us",
    "size_mean_bytes",
];

/// Writes every result file of a finished run.
pub(crate) fn write_run(config: &Config, options: &RunOptions, reports: &[NodeReport]) -> Result<RunOutcome, BenchError> {
    let out = &options.out;
    fs::create_dir_all(out).map_err(|e| out_err(out, e))?;
    let params = &options.params;
    let duration_us = params.duration.as_micros() as u64;
    let warmup_us = config.warmup_us();

    let mut label_of = BTreeMap::new();
    let mut rows: BTreeMap<String, Vec<ArrivalRow>> = BTreeMap::new();
    let mut streams = Vec::new();
    for (i, consumer, label) in config.stream_labels() {
        label_of.insert((config.streams[i].name.clone(), consumer), label.clone());
        rows.insert(label.clone(), Vec::new());
        streams.push(ManifestStream { file: arrivals_file(&label), label, period_us: config.streams[i].period_us });
    }
    let mut errors = Vec::new();
    for r in reports {
        errors.extend(r.errors.iter().map(|e| format!("{}: {e}", r.node)));
        for a in &r.arrivals {
            let label = label_of.get(&(a.stream.clone(), r.node.clone())).cloned().unwrap_or(a.stream.clone());
            rows.entry(label.clone()).or_default().push(ArrivalRow {
                stream: label,
                seq: a.seq,
                send_ts_us: a.send_ts_us,
                recv_ts_us: a.recv_ts_us,
                inter_arrival_us: None,
                size_bytes: a.size_bytes,
            });
        }
    }

    let mut summaries = Vec::new();
    for s in &streams {
        let stream_rows = rows.get_mut(&s.label).expect("label registered");
        fill_inter_arrivals(stream_rows);
        let path = out.join(&s.file);
        write_csv(&path, stream_rows.iter(), &ARRIVALS_HEADER)?;
        let window = Window { period_us: s.period_us, warmup_us, duration_us };
        summaries.push(summarize(&s.label, stream_rows, window));
    }

    let path = out.join(SUMMARY_FILE);
    let summary_rows = summaries.iter().map(|s| SummaryRow::new(params.arm, params.serialization, s));
    write_csv(&path, summary_rows, &SUMMARY_HEADER)?;

    let mut counters = Vec::new();
    for r in reports {
        let mut push = |counter: String, value: String| counters.push(CounterRow { node: &r.node, counter, value });
        if let Some(c) = &r.counters {
            for (name, value) in c.fields() {
                push(name.to_string(), value.to_string());
            }
        }
        for (stream, stats) in &r.consumers {
            push(format!("requests:{stream}"), stats.requests.to_string());
            push(format!("timeouts:{stream}"), stats.timeouts.to_string());
        }
        if let Some(cpu) = r.cpu_percent {
            push("cpu_mean_percent".into(), format!("{cpu:.3}"));
        }
        push("errors".into(), r.errors.len().to_string());
    }
    let path = out.join(COUNTERS_FILE);
    write_csv(&path, counters, &["node", "counter", "value"])?;

    let path = out.join(CONFIG_FILE);
    fs::write(&path, config.to_toml()).map_err(|e| out_err(&path, e))?;

    let manifest = RunManifest {
        arm: params.arm,
        serialization: params.serialization,
        duration_us,
        warmup_us,
        seed: params.seed,
        sim: options.sim,
        processes: options.node_exe.is_some(),
        streams,
        errors,
        warnings: run_warnings(options),
    };
    let path = out.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| out_err(&path, e))?;
    fs::write(&path, text).map_err(|e| out_err(&path, e))?;

    Ok(RunOutcome { dir: out.clone(), manifest, summaries, reports: reports.to_vec() })
}

fn run_warnings(options: &RunOptions) -> Vec<String> {
    let mut warnings = Vec::new();
    if options.params.arm == Arm::Pubsub && options.params.serialization == Serialization::Bytes {
        warnings.push("pubsub with bytes serialization is outside the reference comparison set (pubsub is compared in string mode)".into());
    }
    warnings
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, BenchError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| in_err(&path, e))?;
    toml::from_str(&text).map_err(|e| in_err(&path, e))
}

pub fn read_arrivals(path: &Path) -> Result<Vec<ArrivalRow>, BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| in_err(path, e))?;
    let header = r.headers().map_err(|e| in_err(path, e))?.clone();
    if header.iter().ne(ARRIVALS_HEADER) {
        return Err(in_err(path, format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    r.deserialize().collect::<Result<_, _>>().map_err(|e| in_err(path, e))
}

pub fn read_summary(dir: &Path) -> Result<Vec<SummaryRow>, BenchError> {
    let path = dir.join(SUMMARY_FILE);
    let mut r = csv::Reader::from_path(&path).map_err(|e| in_err(&path, e))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| in_err(&path, e))
}

/// Reads a run directory and recomputes its summaries from the arrivals
/// files alone.
pub fn load_run(dir: &Path) -> Result<(RunManifest, Vec<StreamSummary>), BenchError> {
    let manifest = read_manifest(dir)?;
    let mut summaries = Vec::new();
    for s in &manifest.streams {
        let mut rows = read_arrivals(&dir.join(&s.file))?;
        fill_inter_arrivals(&mut rows);
        let window = Window { period_us: s.period_us, warmup_us: manifest.warmup_us, duration_us: manifest.duration_us };
        summaries.push(summarize(&s.label, &rows, window));
    }
    Ok((manifest, summaries))
}

/// Streams against runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Arm and serialization of each run.
    pub runs: Vec<(Arm, Serialization)>,
    /// One entry per stream with a cell per run.
    pub rows: Vec<(String, Vec<Option<StreamSummary>>)>,
}

pub fn compare(runs: &[(RunManifest, Vec<StreamSummary>)]) -> Comparison {
    let mut streams: Vec<String> = Vec::new();
    for (_, summaries) in runs {
        for s in summaries {
            if !streams.contains(&s.stream) {
                streams.push(s.stream.clone());
            }
        }
    }
    let rows = streams
        .into_iter()
        .map(|stream| {
            let cells = runs
                .iter()
                .map(|(_, summaries)| summaries.iter().find(|s| s.stream == stream).cloned())
                .collect();
            (stream, cells)
        })
        .collect();
    Comparison { runs: runs.iter().map(|(m, _)| (m.arm, m.serialization)).collect(), rows }
}

/// Loads run directories and compares them. Every run must cover the same
/// streams.
pub fn summarize_dirs(dirs: &[PathBuf]) -> Result<Comparison, BenchError> {
    if dirs.is_empty() {
        return Err(BenchError::Input("no run directories given".into()));
    }
    let mut runs = Vec::new();
    for dir in dirs {
        runs.push(load_run(dir)?);
    }
    let labels = |r: &(RunManifest, Vec<StreamSummary>)| r.0.streams.iter().map(|s| s.label.clone()).collect::<Vec<_>>();
    let first = labels(&runs[0]);
    for (dir, run) in dirs.iter().zip(&runs).skip(1) {
        let these = labels(run);
        if these != first {
            return Err(BenchError::Input(format!(
                "inconsistent inputs: {} has streams {these:?} but {} has {first:?}",
                dir.display(),
                dirs[0].display()
            )));
        }
    }
    Ok(compare(&runs))
}

const TABLE_HEADER: [&str; 9] =
    ["stream", "arm", "serialization", "mean_ms", "median_ms", "p99_ms", "stddev_ms", "delivery", "samples"];

impl Comparison {
    /// One line per (stream, run) present, in stream order.
    fn lines(&self) -> Vec<(&str, Arm, Serialization, &StreamSummary)> {
        let mut out = Vec::new();
        for (stream, cells) in &self.rows {
            for ((arm, ser), cell) in self.runs.iter().zip(cells) {
                if let Some(s) = cell {
                    out.push((stream.as_str(), *arm, *ser, s));
                }
            }
        }
        out
    }

    /// True when every stream has a summary with inter-arrival samples in
    /// every run.
    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(|(_, cells)| cells.iter().all(|c| c.as_ref().is_some_and(|s| s.inter_arrival.n > 0)))
    }

    /// Aligned text table with one row per (stream, run).
    pub fn to_text(&self) -> String {
        let ms = |us: f64| format!("{:.3}", us / 1000.0);
        let mut grid: Vec<Vec<String>> = vec![TABLE_HEADER.iter().map(|h| h.to_string()).collect()];
        for (stream, arm, ser, s) in self.lines() {
            let ia = &s.inter_arrival;
            let timing = if ia.n == 0 {
                vec!["-".to_string(); 4]
            } else {
                vec![ms(ia.mean), ms(ia.p50 as f64), ms(ia.p99 as f64), ms(ia.stddev)]
            };
            let mut row = vec![stream.to_string(), arm.to_string(), ser.to_string()];
            row.extend(timing);
            row.push(format!("{:.1}%", s.delivery_ratio * 100.0));
            row.push(ia.n.to_string());
            grid.push(row);
        }
        let widths: Vec<usize> = (0..TABLE_HEADER.len())
            .map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            let line: Vec<String> = row.iter().zip(&widths).map(|(v, &w)| format!("{v:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }

    /// The same rows as [`Comparison::to_text`], in microseconds, as CSV.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record([
            "stream",
            "arm",
            "serialization",
            "ia_mean_us",
            "ia_p50_us",
            "ia_p95_us",
            "ia_p99_us",
            "ia_stddev_us",
            "delivery_ratio",
            "ia_n",
            "e2e_mean_us",
            "size_mean_bytes",
        ]);
        for (stream, arm, ser, s) in self.lines() {
            let ia = &s.inter_arrival;
            let _ = w.write_record([
                stream.to_string(),
                arm.to_string(),
                ser.to_string(),
                format!("{:.3}", ia.mean),
                ia.p50.to_string(),
                ia.p95.to_string(),
                ia.p99.to_string(),
                format!("{:.3}", ia.stddev),
                format!("{:.6}", s.delivery_ratio),
                ia.n.to_string(),
                s.mean_e2e_us.map(|v| format!("{v:.3}")).unwrap_or_default(),
                format!("{:.3}", s.mean_size_bytes),
            ]);
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
    }
}
