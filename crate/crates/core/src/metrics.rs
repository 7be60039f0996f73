//! Run results, trace records, queue divergence classification and the CSV
//! formats written by the harness.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{BufferSize, ScenarioConfig};
use crate::time::SimTime;

/// Minimum number of classification windows needed for a verdict.
pub const MIN_WINDOWS: usize = 20;
/// Slope threshold, as a fraction of the RTT in cells per window.
pub const SLOPE_RTT_FRACTION: f64 = 0.01;
/// A divergent queue must end above this many RTTs of cells.
pub const DIVERGENT_RTT_MULTIPLE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    Convergent,
    Divergent,
    Unknown,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Divergence::Convergent => "CONVERGENT",
            Divergence::Divergent => "DIVERGENT",
            Divergence::Unknown => "UNKNOWN",
        })
    }
}

/// Least-squares slope of `ys` against their index.
pub fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        num += dx * (y - mean_y);
        den += dx * dx;
    }
    num / den
}

/// Classifies a series of per-window queue maxima.
///
/// Divergent iff, over the final half of the series, the maxima trend
/// upward faster than 1% of an RTT's worth of cells per window and the last
/// window's maximum exceeds three RTTs' worth.
pub fn classify_window_maxima(maxima: &[u64], rtt_cells: f64) -> Divergence {
    if maxima.len() < MIN_WINDOWS {
        return Divergence::Unknown;
    }
    let tail: Vec<f64> = maxima[maxima.len() / 2..].iter().map(|&m| m as f64).collect();
    let slope = ls_slope(&tail);
    let last = *tail.last().expect("non-empty");
    if slope > SLOPE_RTT_FRACTION * rtt_cells && last > DIVERGENT_RTT_MULTIPLE * rtt_cells {
        Divergence::Divergent
    } else {
        Divergence::Convergent
    }
}

/// Per-window maxima of the switch queue reconstructed from trace samples.
pub fn window_maxima_from_trace(trace: &[TraceRecord], origin: SimTime, window: SimTime) -> Vec<u64> {
    let mut maxima: Vec<u64> = Vec::new();
    for r in trace.iter().filter(|r| r.t >= origin) {
        let idx = ((r.t - origin).as_nanos() / window.as_nanos()) as usize;
        if maxima.len() <= idx {
            maxima.resize(idx + 1, 0);
        }
        maxima[idx] = maxima[idx].max(r.switch_queue);
    }
    maxima
}

/// Classifies a queue trace sampled at a fixed interval, using windows of
/// `window` (normally the VBR period).
pub fn detect_divergence(trace: &[TraceRecord], window: SimTime, rtt_cells: f64) -> Divergence {
    let origin = trace.first().map(|r| r.t).unwrap_or(SimTime::ZERO);
    let maxima = window_maxima_from_trace(trace, origin, window);
    classify_window_maxima(&maxima, rtt_cells)
}

/// One periodic trace sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: SimTime,
    pub switch_queue: u64,
    pub vbr_on: bool,
    /// Per-VC (ACR in cells/s, source queue in cells); empty unless enabled.
    pub per_vc: Vec<(f64, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub scenario_id: String,
    pub n_sources: usize,
    pub source_buffer: BufferSize,
    pub vbr_duty_cycle: Option<f64>,
    pub vbr_period_ms: Option<f64>,
    pub feedback_delay_ms: f64,
    pub scheme: String,
    pub max_source_queue: Vec<u64>,
    pub max_switch_queue: u64,
    pub rtt_report_cells: f64,
    pub max_switch_queue_rtt_fraction: f64,
    pub total_tcp_goodput_mbps: f64,
    pub drops_source: u64,
    pub drops_switch: u64,
    pub divergence: Divergence,
    /// Time-averaged switch queue over the final third of the run.
    pub steady_state_switch_queue: f64,
}

impl RunMetrics {
    pub fn max_source_queue_overall(&self) -> u64 {
        self.max_source_queue.iter().copied().max().unwrap_or(0)
    }

    pub fn min_source_queue_peak(&self) -> u64 {
        self.max_source_queue.iter().copied().min().unwrap_or(0)
    }
}

pub const METRICS_HEADER: &str = "scenario_id,n_sources,source_buffer_cells,vbr_d,vbr_p_ms,feedback_delay_ms,scheme,max_source_queue_cells,max_switch_queue_cells,max_switch_queue_rtt_frac,goodput_mbps,drops_source,drops_switch,divergence";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One metrics CSV row (no trailing newline).
pub fn metrics_row(m: &RunMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{:.4},{:.3},{},{},{}",
        m.scenario_id,
        m.n_sources,
        m.source_buffer,
        opt(m.vbr_duty_cycle),
        opt(m.vbr_period_ms),
        m.feedback_delay_ms,
        m.scheme,
        m.max_source_queue_overall(),
        m.max_switch_queue,
        m.max_switch_queue_rtt_fraction,
        m.total_tcp_goodput_mbps,
        m.drops_source,
        m.drops_switch,
        m.divergence
    )
}

pub fn trace_header(n_vcs: usize) -> String {
    let mut h = String::from("t_us,switch_queue_cells,vbr_on");
    for i in 0..n_vcs {
        h.push_str(&format!(",vc{i}_acr_cps,vc{i}_srcq_cells"));
    }
    h
}

pub fn trace_row(r: &TraceRecord) -> String {
    let mut s = format!("{},{},{}", r.t.as_nanos() / 1_000, r.switch_queue, u8::from(r.vbr_on));
    for (acr, q) in &r.per_vc {
        s.push_str(&format!(",{acr:.1},{q}"));
    }
    s
}

#[derive(Debug, Error)]
#[error("{path}: {source}")]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<(), OutputError> {
    let wrap = |source| OutputError {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    for line in lines {
        w.write_all(line.as_bytes()).map_err(wrap)?;
        w.write_all(b"\n").map_err(wrap)?;
    }
    w.flush().map_err(wrap)
}

pub fn write_metrics_csv(path: &Path, rows: &[RunMetrics]) -> Result<(), OutputError> {
    let lines = std::iter::once(METRICS_HEADER.to_string()).chain(rows.iter().map(metrics_row));
    write_lines(path, lines)
}

/// Writes a trace; per-VC columns are included when the records carry them.
pub fn write_trace_csv(path: &Path, trace: &[TraceRecord], n_vcs: usize) -> Result<(), OutputError> {
    let with_vcs = trace.first().is_some_and(|r| !r.per_vc.is_empty());
    let header = trace_header(if with_vcs { n_vcs } else { 0 });
    let lines = std::iter::once(header).chain(trace.iter().map(trace_row));
    write_lines(path, lines)
}

/// Static metadata columns for a configuration.
pub(crate) fn describe(cfg: &ScenarioConfig) -> (Option<f64>, Option<f64>, f64, String) {
    (
        cfg.vbr.map(|v| v.duty_cycle),
        cfg.vbr.map(|v| v.period.as_millis_f64()),
        cfg.delays().feedback_delay.as_millis_f64(),
        cfg.erica.scheme.to_string(),
    )
}
