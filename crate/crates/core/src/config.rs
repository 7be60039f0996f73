//! Scenario configuration for the "N sources + VBR" topology.
//!
//! Sources connect to Switch1, Switch1 to Switch2, and Switch2 to the
//! destinations, over three links of equal length. Switch1's output toward
//! Switch2 is the shared bottleneck.
//!
//! Scenario files are line-oriented `key = value` text with `#` comments.
//! Every key is optional; see [`KEYS`] for the full table.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::abr::DEFAULT_NRM;
use crate::erica::{EricaParams, Scheme, ZAveraging};
use crate::tcp::{segment_to_cells, TcpParams};
use crate::time::{mbps_to_cells_per_sec, SimTime, NS_PER_KM};
use crate::vbr::VbrParams;

/// Cells per millisecond used when reporting queues as RTT fractions.
pub const REPORT_CELLS_PER_MS: f64 = 368.0;

pub const DEFAULT_LINK_RATE_MBPS: f64 = 155.52;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: `{key}`: {reason}")]
    BadValue { key: String, line: usize, reason: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { key: String, line: usize },
}

/// Per-VC or switch buffer size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferSize {
    Cells(usize),
    Infinite,
}

impl BufferSize {
    pub fn limit(self) -> Option<usize> {
        match self {
            BufferSize::Cells(n) => Some(n),
            BufferSize::Infinite => None,
        }
    }
}

impl fmt::Display for BufferSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BufferSize::Cells(n) => write!(f, "{n}"),
            BufferSize::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for BufferSize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "unlimited" => Ok(BufferSize::Infinite),
            _ => s
                .parse::<usize>()
                .map(BufferSize::Cells)
                .map_err(|_| format!("expected a cell count or `inf`, got {s:?}")),
        }
    }
}

/// What drives the ABR sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Traffic {
    /// One bulk TCP transfer per VC.
    Tcp,
    /// Sources that always have cells queued; TCP is bypassed.
    Infinite,
}

impl FromStr for Traffic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "tcp" => Ok(Traffic::Tcp),
            "infinite" | "greedy" => Ok(Traffic::Infinite),
            _ => Err(format!("expected tcp or infinite, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub n_sources: usize,
    pub link_length_km: f64,
    pub link_rate_mbps: f64,
    pub traffic: Traffic,
    pub source_buffer: BufferSize,
    pub switch_buffer: BufferSize,
    /// Initial cell rate; `None` means link rate / n_sources.
    pub icr_mbps: Option<f64>,
    pub nrm: u32,
    pub vbr: Option<VbrParams>,
    pub erica: EricaParams,
    pub tcp: TcpParams,
    pub duration: SimTime,
    pub trace_interval: SimTime,
    pub trace_per_vc: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario_id: "scenario".to_string(),
            n_sources: 15,
            link_length_km: 1000.0,
            link_rate_mbps: DEFAULT_LINK_RATE_MBPS,
            traffic: Traffic::Tcp,
            source_buffer: BufferSize::Infinite,
            switch_buffer: BufferSize::Infinite,
            icr_mbps: None,
            nrm: DEFAULT_NRM,
            vbr: None,
            erica: EricaParams::erica_plus(),
            tcp: TcpParams::default(),
            duration: SimTime::from_secs(10),
            trace_interval: SimTime::from_millis(1),
            trace_per_vc: false,
        }
    }
}

/// Delay quantities implied by the topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedDelays {
    pub one_way_prop: SimTime,
    pub rtt_prop: SimTime,
    pub feedback_delay: SimTime,
    /// Round trip in cell times at the link rate.
    pub rtt_cells: u64,
}

/// Propagation delay over `length_km` of fibre (5 µs per km).
pub fn propagation_delay(length_km: f64) -> SimTime {
    SimTime::from_nanos_f64(length_km * NS_PER_KM as f64)
}

/// Switch1 to source and back: twice the first link's delay.
pub fn feedback_delay(config: &ScenarioConfig) -> SimTime {
    let hop = propagation_delay(config.link_length_km);
    hop + hop
}

/// Upper bound on aggregate TCP goodput in Mbps: link rate scaled by target
/// utilization, cell payload, protocol headers and RM overhead.
pub fn max_throughput_bound(config: &ScenarioConfig) -> f64 {
    let u = match config.erica.scheme {
        Scheme::Erica => config.erica.target_utilization,
        Scheme::EricaPlus => 1.0,
    };
    throughput_bound(config.link_rate_mbps, u, config.tcp.mss(), config.nrm)
}

pub fn throughput_bound(link_rate_mbps: f64, utilization: f64, mss: u64, nrm: u32) -> f64 {
    let mss = mss as f64;
    link_rate_mbps * utilization * (48.0 / 53.0) * (mss / (mss + 56.0)) * ((nrm as f64 - 1.0) / nrm as f64)
}

impl ScenarioConfig {
    pub fn link_cell_rate(&self) -> f64 {
        mbps_to_cells_per_sec(self.link_rate_mbps)
    }

    pub fn delays(&self) -> DerivedDelays {
        let hop = propagation_delay(self.link_length_km);
        let one_way = SimTime(hop.as_nanos() * 3);
        let rtt = one_way + one_way;
        DerivedDelays {
            one_way_prop: one_way,
            rtt_prop: rtt,
            feedback_delay: feedback_delay(self),
            rtt_cells: (rtt.as_secs_f64() * self.link_cell_rate()).round() as u64,
        }
    }

    /// RTT in cells by the reporting convention (368 cells per ms).
    pub fn rtt_report_cells(&self) -> f64 {
        self.delays().rtt_prop.as_millis_f64() * REPORT_CELLS_PER_MS
    }

    pub fn window_cells(&self) -> u64 {
        self.tcp.max_rcv_window() / self.tcp.mss() * segment_to_cells(self.tcp.mss())
    }

    pub fn icr_cells_per_sec(&self) -> f64 {
        match self.icr_mbps {
            Some(mbps) => mbps_to_cells_per_sec(mbps),
            None => self.link_cell_rate() / self.n_sources as f64,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: &str| {
            Err(ConfigError::BadValue {
                key: key.to_string(),
                line: 0,
                reason: reason.to_string(),
            })
        };
        if self.n_sources == 0 {
            return bad("n_sources", "must be at least 1");
        }
        if !(self.link_length_km.is_finite() && self.link_length_km > 0.0) {
            return bad("link_length_km", "must be positive");
        }
        if !(self.link_rate_mbps.is_finite() && self.link_rate_mbps > 0.0) {
            return bad("link_rate_mbps", "must be positive");
        }
        if self.duration == SimTime::ZERO {
            return bad("duration_s", "must be positive");
        }
        if self.trace_interval == SimTime::ZERO {
            return bad("trace.interval_ms", "must be positive");
        }
        if self.nrm < 2 {
            return bad("abr.nrm", "must be at least 2");
        }
        if let Some(icr) = self.icr_mbps {
            if !(icr > 0.0 && icr <= self.link_rate_mbps) {
                return bad("abr.icr_mbps", "must be in (0, link rate]");
            }
        }
        if let Some(v) = &self.vbr {
            if !(v.duty_cycle > 0.0 && v.duty_cycle <= 1.0) {
                return bad("vbr.duty_cycle", "must be in (0, 1]");
            }
            if v.period == SimTime::ZERO {
                return bad("vbr.period_ms", "must be positive");
            }
            if !(v.amplitude_mbps > 0.0 && v.amplitude_mbps <= self.link_rate_mbps) {
                return bad("vbr.amplitude_mbps", "must be in (0, link rate]");
            }
        }
        if self.tcp.mss_bytes == 0 {
            return bad("tcp.mss_bytes", "must be positive");
        }
        if self.tcp.window_scale > 14 {
            return bad("tcp.window_scale", "must be at most 14");
        }
        if self.tcp.timer_granularity == SimTime::ZERO {
            return bad("tcp.timer_granularity_ms", "must be positive");
        }
        if let Err((key, reason)) = self.erica.validate() {
            return bad(key, &reason);
        }
        Ok(())
    }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("scenario_id", "label copied into metrics output"),
    ("n_sources", "number of ABR VCs (default 15)"),
    ("link_length_km", "length of each of the three links (default 1000)"),
    ("link_rate_mbps", "rate of every link (default 155.52)"),
    ("duration_s", "simulated time in seconds (default 10)"),
    ("traffic", "tcp | infinite (default tcp)"),
    ("trace.interval_ms", "trace sampling period (default 1)"),
    (
        "trace.per_vc",
        "include per-VC ACR and source queue columns (default false)",
    ),
    (
        "abr.source_buffer_cells",
        "per-VC source buffer, count or inf (default inf); alias source_buffer_cells",
    ),
    ("abr.icr_mbps", "initial cell rate (default link rate / n_sources)"),
    ("abr.nrm", "cells per forward RM cell (default 32)"),
    (
        "switch.buffer_cells",
        "bottleneck buffer, count or inf (default inf); alias switch_buffer_cells",
    ),
    (
        "vbr.enabled",
        "attach the ON-OFF VBR source (default false; implied by other vbr keys)",
    ),
    (
        "vbr.duty_cycle",
        "fraction of the period spent ON, in (0, 1] (default 0.8)",
    ),
    ("vbr.period_ms", "ON-OFF period (default 10)"),
    ("vbr.amplitude_mbps", "rate while ON (default 124.41)"),
    ("vbr.start_ms", "start of the first ON window (default 2)"),
    ("erica.scheme", "erica | erica+ (default erica+)"),
    ("erica.u", "ERICA target utilization (default 0.9)"),
    ("erica.interval_ms", "averaging interval length (default 1)"),
    ("erica.interval_cells", "averaging interval cell count (default 100)"),
    ("erica.t0_us", "ERICA+ target queueing delay (default 500)"),
    ("erica.a", "ERICA+ curve parameter above the target (default 1.15)"),
    ("erica.b", "ERICA+ curve parameter below the target (default 1.05)"),
    ("erica.qdlf", "ERICA+ queue drain limit factor (default 0.5)"),
    (
        "erica.na_averaging",
        "decay per-VC activity instead of counting (default false)",
    ),
    ("erica.alpha_n", "activity decay factor (default 0.9)"),
    ("erica.z_averaging", "none | scheme1 | scheme2 (default none)"),
    ("erica.alpha_z", "overload averaging weight (default 0.2)"),
    ("tcp.mss_bytes", "maximum segment size (default 512)"),
    ("tcp.window_scale", "receiver window = 64 kB << scale (default 4)"),
    ("tcp.timer_granularity_ms", "retransmission timer tick (default 100)"),
    ("tcp.initial_rto_ms", "RTO before the first RTT sample (default 1000)"),
];

fn canonical_key(key: &str) -> Option<&'static str> {
    let key = match key {
        "source_buffer_cells" => "abr.source_buffer_cells",
        "switch_buffer_cells" => "switch.buffer_cells",
        k => k,
    };
    KEYS.iter().map(|(k, _)| *k).find(|k| *k == key)
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got {s:?}")),
    }
}

fn parse_num<T: FromStr>(s: &str) -> Result<T, String> {
    s.parse::<T>().map_err(|_| format!("cannot parse {s:?} as a number"))
}

fn parse_pos_f64(s: &str) -> Result<f64, String> {
    let v: f64 = parse_num(s)?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {s}"))
    }
}

fn ms(v: f64) -> SimTime {
    SimTime::from_millis_f64(v)
}

/// Parses a scenario document. Absent keys keep their defaults.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut vbr = VbrParams::default();
    let mut vbr_enabled: Option<bool> = None;
    let mut vbr_touched = false;
    let mut seen: Vec<&'static str> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        let key = canonical_key(key).ok_or_else(|| ConfigError::UnknownKey {
            key: key.to_string(),
            line,
        })?;
        if seen.contains(&key) {
            return Err(ConfigError::Duplicate {
                key: key.to_string(),
                line,
            });
        }
        seen.push(key);

        let result: Result<(), String> = (|| {
            match key {
                "scenario_id" => cfg.scenario_id = value.to_string(),
                "n_sources" => {
                    let n: usize = parse_num(value)?;
                    if n == 0 {
                        return Err("must be at least 1".into());
                    }
                    cfg.n_sources = n;
                }
                "link_length_km" => cfg.link_length_km = parse_pos_f64(value)?,
                "link_rate_mbps" => cfg.link_rate_mbps = parse_pos_f64(value)?,
                "duration_s" => cfg.duration = SimTime::from_secs_f64(parse_pos_f64(value)?),
                "traffic" => cfg.traffic = value.parse()?,
                "trace.interval_ms" => cfg.trace_interval = ms(parse_pos_f64(value)?),
                "trace.per_vc" => cfg.trace_per_vc = parse_bool(value)?,
                "abr.source_buffer_cells" => cfg.source_buffer = value.parse()?,
                "abr.icr_mbps" => cfg.icr_mbps = Some(parse_pos_f64(value)?),
                "abr.nrm" => {
                    let n: u32 = parse_num(value)?;
                    if n < 2 {
                        return Err("must be at least 2".into());
                    }
                    cfg.nrm = n;
                }
                "switch.buffer_cells" => cfg.switch_buffer = value.parse()?,
                "vbr.enabled" => vbr_enabled = Some(parse_bool(value)?),
                "vbr.duty_cycle" => {
                    let d: f64 = parse_num(value)?;
                    if !(d > 0.0 && d <= 1.0) {
                        return Err(format!("duty cycle must be in (0, 1], got {d}"));
                    }
                    vbr.duty_cycle = d;
                    vbr_touched = true;
                }
                "vbr.period_ms" => {
                    vbr.period = ms(parse_pos_f64(value)?);
                    vbr_touched = true;
                }
                "vbr.amplitude_mbps" => {
                    vbr.amplitude_mbps = parse_pos_f64(value)?;
                    vbr_touched = true;
                }
                "vbr.start_ms" => {
                    let v: f64 = parse_num(value)?;
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err("must be non-negative".into());
                    }
                    vbr.start = ms(v);
                    vbr_touched = true;
                }
                "erica.scheme" => cfg.erica.scheme = value.parse()?,
                "erica.u" => cfg.erica.target_utilization = parse_num(value)?,
                "erica.interval_ms" => cfg.erica.interval = ms(parse_pos_f64(value)?),
                "erica.interval_cells" => cfg.erica.interval_cells = parse_num(value)?,
                "erica.t0_us" => cfg.erica.t0 = SimTime::from_nanos_f64(parse_pos_f64(value)? * 1e3),
                "erica.a" => cfg.erica.a = parse_num(value)?,
                "erica.b" => cfg.erica.b = parse_num(value)?,
                "erica.qdlf" => cfg.erica.qdlf = parse_num(value)?,
                "erica.na_averaging" => cfg.erica.na_averaging = parse_bool(value)?,
                "erica.alpha_n" => cfg.erica.alpha_n = parse_num(value)?,
                "erica.z_averaging" => cfg.erica.z_averaging = value.parse::<ZAveraging>()?,
                "erica.alpha_z" => cfg.erica.alpha_z = parse_num(value)?,
                "tcp.mss_bytes" => cfg.tcp.mss_bytes = parse_num(value)?,
                "tcp.window_scale" => cfg.tcp.window_scale = parse_num(value)?,
                "tcp.timer_granularity_ms" => cfg.tcp.timer_granularity = ms(parse_pos_f64(value)?),
                "tcp.initial_rto_ms" => cfg.tcp.initial_rto = ms(parse_pos_f64(value)?),
                other => unreachable!("key table out of sync: {other}"),
            }
            Ok(())
        })();
        result.map_err(|reason| ConfigError::BadValue {
            key: key.to_string(),
            line,
            reason,
        })?;
    }

    if vbr_enabled.unwrap_or(vbr_touched) {
        cfg.vbr = Some(vbr);
    }

    // Range checks that span keys; report them against the defining line.
    cfg.validate().map_err(|e| match e {
        ConfigError::BadValue { key, reason, .. } => {
            let line = text
                .lines()
                .position(|l| {
                    l.split('#')
                        .next()
                        .and_then(|c| c.split_once('='))
                        .and_then(|(k, _)| canonical_key(k.trim()))
                        == Some(key.as_str())
                })
                .map(|i| i + 1)
                .unwrap_or(0);
            ConfigError::BadValue { key, line, reason }
        }
        other => other,
    })?;
    Ok(cfg)
}

impl ScenarioConfig {
    /// Renders the configuration back into scenario-file form.
    pub fn to_scenario_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("scenario_id", self.scenario_id.clone());
        kv("n_sources", self.n_sources.to_string());
        kv("link_length_km", self.link_length_km.to_string());
        kv("link_rate_mbps", self.link_rate_mbps.to_string());
        kv("duration_s", self.duration.as_secs_f64().to_string());
        kv(
            "traffic",
            match self.traffic {
                Traffic::Tcp => "tcp".into(),
                Traffic::Infinite => "infinite".into(),
            },
        );
        kv("trace.interval_ms", self.trace_interval.as_millis_f64().to_string());
        kv("trace.per_vc", self.trace_per_vc.to_string());
        kv("abr.source_buffer_cells", self.source_buffer.to_string());
        if let Some(icr) = self.icr_mbps {
            kv("abr.icr_mbps", icr.to_string());
        }
        kv("abr.nrm", self.nrm.to_string());
        kv("switch.buffer_cells", self.switch_buffer.to_string());
        kv("vbr.enabled", self.vbr.is_some().to_string());
        if let Some(v) = &self.vbr {
            kv("vbr.duty_cycle", v.duty_cycle.to_string());
            kv("vbr.period_ms", v.period.as_millis_f64().to_string());
            kv("vbr.amplitude_mbps", v.amplitude_mbps.to_string());
            kv("vbr.start_ms", v.start.as_millis_f64().to_string());
        }
        let e = &self.erica;
        kv(
            "erica.scheme",
            match e.scheme {
                Scheme::Erica => "erica".into(),
                Scheme::EricaPlus => "erica+".into(),
            },
        );
        kv("erica.u", e.target_utilization.to_string());
        kv("erica.interval_ms", e.interval.as_millis_f64().to_string());
        kv("erica.interval_cells", e.interval_cells.to_string());
        kv("erica.t0_us", e.t0.as_micros_f64().to_string());
        kv("erica.a", e.a.to_string());
        kv("erica.b", e.b.to_string());
        kv("erica.qdlf", e.qdlf.to_string());
        kv("erica.na_averaging", e.na_averaging.to_string());
        kv("erica.alpha_n", e.alpha_n.to_string());
        kv("erica.z_averaging", e.z_averaging.to_string());
        kv("erica.alpha_z", e.alpha_z.to_string());
        kv("tcp.mss_bytes", self.tcp.mss_bytes.to_string());
        kv("tcp.window_scale", self.tcp.window_scale.to_string());
        kv(
            "tcp.timer_granularity_ms",
            self.tcp.timer_granularity.as_millis_f64().to_string(),
        );
        kv("tcp.initial_rto_ms", self.tcp.initial_rto.as_millis_f64().to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagation_is_five_us_per_km() {
        assert_eq!(propagation_delay(1000.0), SimTime::from_millis(5));
        assert_eq!(propagation_delay(3000.0), SimTime::from_millis(15));
        assert_eq!(propagation_delay(1.0), SimTime::from_micros(5));
    }

    #[test]
    fn feedback_delay_follows_first_link() {
        let mut c = ScenarioConfig::default();
        assert_eq!(feedback_delay(&c), SimTime::from_millis(10));
        c.link_length_km = 100.0;
        assert_eq!(feedback_delay(&c), SimTime::from_millis(1));
        c.link_length_km = 500.0;
        assert_eq!(feedback_delay(&c), SimTime::from_millis(5));
    }

    #[test]
    fn default_round_trip() {
        let d = ScenarioConfig::default().delays();
        assert_eq!(d.one_way_prop, SimTime::from_millis(15));
        assert_eq!(d.rtt_prop, SimTime::from_millis(30));
        assert!(d.feedback_delay >= SimTime(2 * propagation_delay(1000.0).as_nanos()));
        assert_eq!(d.rtt_cells, 11_004);
        assert_eq!(ScenarioConfig::default().rtt_report_cells(), 11_040.0);
    }

    #[test]
    fn throughput_bound_for_modified_erica() {
        let c = ScenarioConfig {
            erica: EricaParams::modified_erica(),
            ..ScenarioConfig::default()
        };
        let b = max_throughput_bound(&c);
        let hand = 155.52 * 0.9 * (48.0 / 53.0) * (512.0 / 568.0) * (31.0 / 32.0);
        assert!((b - hand).abs() < 1e-9, "{b}");
        // the published figure rounds this product generously
        assert!((b - 110.9).abs() < 0.25, "{b}");
        let plus = ScenarioConfig::default();
        assert!((max_throughput_bound(&plus) - hand / 0.9).abs() < 1e-9);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_scenario("").unwrap();
        assert_eq!(c, ScenarioConfig::default());
        assert_eq!(c.n_sources, 15);
        assert_eq!(c.link_length_km, 1000.0);
        assert_eq!(c.erica.scheme, Scheme::EricaPlus);
        assert!(c.vbr.is_none());
    }

    #[test]
    fn duty_cycle_out_of_range() {
        let e = parse_scenario("vbr.duty_cycle = 1.5").unwrap_err();
        assert!(
            matches!(e, ConfigError::BadValue { ref key, line: 1, .. } if key == "vbr.duty_cycle"),
            "{e}"
        );
    }

    #[test]
    fn source_buffer_alias() {
        let c = parse_scenario("source_buffer_cells = 100000").unwrap();
        assert_eq!(c.source_buffer, BufferSize::Cells(100_000));
        let c = parse_scenario("abr.source_buffer_cells = inf").unwrap();
        assert_eq!(c.source_buffer, BufferSize::Infinite);
    }

    #[test]
    fn zero_sources_rejected() {
        let e = parse_scenario("\n\nn_sources = 0").unwrap_err();
        assert!(matches!(e, ConfigError::BadValue { line: 3, .. }), "{e}");
    }

    #[test]
    fn unknown_key_names_line() {
        let e = parse_scenario("# hi\nbogus = 1").unwrap_err();
        assert_eq!(
            e,
            ConfigError::UnknownKey {
                key: "bogus".into(),
                line: 2
            }
        );
    }

    #[test]
    fn syntax_and_duplicates() {
        assert_eq!(
            parse_scenario("n_sources").unwrap_err(),
            ConfigError::Syntax { line: 1 }
        );
        assert!(matches!(
            parse_scenario("n_sources = 3\nn_sources = 4").unwrap_err(),
            ConfigError::Duplicate { line: 2, .. }
        ));
    }

    #[test]
    fn vbr_keys_imply_enabled() {
        let c = parse_scenario("vbr.duty_cycle = 0.7\nvbr.period_ms = 20 # formerly divergent").unwrap();
        let v = c.vbr.unwrap();
        assert_eq!(v.duty_cycle, 0.7);
        assert_eq!(v.period, SimTime::from_millis(20));
        let c = parse_scenario("vbr.duty_cycle = 0.7\nvbr.enabled = false").unwrap();
        assert!(c.vbr.is_none());
    }

    #[test]
    fn cross_key_validation_reports_line() {
        let e = parse_scenario("link_rate_mbps = 100\nvbr.amplitude_mbps = 124.41").unwrap_err();
        assert!(
            matches!(e, ConfigError::BadValue { ref key, line: 2, .. } if key == "vbr.amplitude_mbps"),
            "{e}"
        );
        let e = parse_scenario("erica.a = 0.9").unwrap_err();
        assert!(matches!(e, ConfigError::BadValue { line: 1, .. }), "{e}");
    }

    #[test]
    fn rendered_text_parses_back() {
        let c = ScenarioConfig {
            vbr: Some(VbrParams::default()),
            erica: EricaParams::modified_erica(),
            source_buffer: BufferSize::Cells(1000),
            ..ScenarioConfig::default()
        };
        assert_eq!(parse_scenario(&c.to_scenario_text()).unwrap(), c);
    }
}
