//! Canned reproduction suites: source buffer sweep, VBR ON-OFF matrix,
//! feedback delay sweep and the averaging enhancements.

use std::fmt::Write as _;
use std::thread;

use crate::config::{BufferSize, ScenarioConfig};
use crate::erica::{EricaParams, ZAveraging};
use crate::metrics::Divergence;
use crate::sim::{run_scenario, RunOutput};
use crate::time::SimTime;
use crate::vbr::VbrParams;

/// Published aggregate goodput for the unconstrained source buffer run.
pub const REFERENCE_GOODPUT_MBPS: f64 = 110.9;
pub const GOODPUT_TOLERANCE: f64 = 0.03;
/// Queues in the VBR tables are judged against a 30 ms round trip.
pub const REFERENCE_RTT_CELLS: f64 = 11_040.0;
pub const ENHANCED_QUEUE_RANGE: (u64, u64) = (2_500, 11_040);

#[derive(Debug, Clone)]
pub struct Row {
    pub label: String,
    pub config: ScenarioConfig,
    /// What the published table lists for this row.
    pub published: &'static str,
    pub expect: Expect,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expect {
    /// Short source buffer: losses, goodput below the next larger buffer.
    Lossy,
    /// Full window of source buffering.
    Lossless,
    /// Bounded switch queue, max below `max_cells`.
    Convergent {
        max_cells: f64,
    },
    /// Bounded switch queue with max inside a range.
    ConvergentIn {
        lo: u64,
        hi: u64,
    },
    Divergent,
}

#[derive(Debug, Clone)]
pub struct RowResult {
    pub row: Row,
    pub output: RunOutput,
    pub pass: bool,
    pub diagnostic: String,
}

#[derive(Debug, Clone)]
pub struct TableReport {
    pub table: u8,
    pub rows: Vec<RowResult>,
}

impl TableReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Side-by-side text: published value, simulated value, verdict.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "table {}", self.table);
        let _ = writeln!(
            s,
            "{:<28} {:<22} {:>9} {:>9} {:>10} {:>8} {:<10} verdict",
            "row", "published", "max_srcq", "max_swq", "goodput", "drops", "queue"
        );
        for r in &self.rows {
            let m = &r.output.metrics;
            let _ = writeln!(
                s,
                "{:<28} {:<22} {:>9} {:>9} {:>10.3} {:>8} {:<10} {}{}",
                r.row.label,
                r.row.published,
                m.max_source_queue_overall(),
                m.max_switch_queue,
                m.total_tcp_goodput_mbps,
                m.drops_source + m.drops_switch,
                m.divergence.to_string(),
                if r.pass { "PASS" } else { "FAIL" },
                if r.diagnostic.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", r.diagnostic)
                }
            );
        }
        s
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("no such table: {0} (expected 1, 2, 3 or 4)")]
pub struct UnknownTable(pub u8);

fn vbr(d: f64, p_ms: u64) -> Option<VbrParams> {
    Some(VbrParams {
        duty_cycle: d,
        period: SimTime::from_millis(p_ms),
        ..VbrParams::default()
    })
}

fn vbr_base(id: String) -> ScenarioConfig {
    ScenarioConfig {
        scenario_id: id,
        erica: EricaParams::erica_plus(),
        duration: SimTime::from_secs(10),
        ..ScenarioConfig::default()
    }
}

/// Source buffer sweep with modified ERICA and no VBR.
pub fn table1_config(source_buffer: usize) -> ScenarioConfig {
    ScenarioConfig {
        scenario_id: format!("t1_buf{source_buffer}"),
        source_buffer: BufferSize::Cells(source_buffer),
        erica: EricaParams::modified_erica(),
        duration: SimTime::from_secs(20),
        ..ScenarioConfig::default()
    }
}

/// ERICA+ (1 ms, 100 cells) without averaging under ON-OFF VBR.
pub fn vbr_config(d: f64, p_ms: u64, link_km: f64) -> ScenarioConfig {
    ScenarioConfig {
        link_length_km: link_km,
        vbr: vbr(d, p_ms),
        ..vbr_base(format!("vbr_d{d}_p{p_ms}_{link_km}km"))
    }
}

pub fn table4_config(row: usize) -> ScenarioConfig {
    let mut c = vbr_config(0.7, 20, 1000.0);
    match row {
        1 => {
            c.scenario_id = "t4_1ms_na_z1".into();
            c.erica.na_averaging = true;
            c.erica.z_averaging = ZAveraging::Scheme1;
            c.erica.alpha_z = 0.2;
        }
        2 => {
            c.scenario_id = "t4_5ms_na".into();
            c.erica.interval = SimTime::from_millis(5);
            c.erica.interval_cells = 500;
            c.erica.na_averaging = true;
        }
        _ => c.scenario_id = "t4_baseline".into(),
    }
    c
}

pub fn table_rows(table: u8) -> Result<Vec<Row>, UnknownTable> {
    let conv = Expect::Convergent {
        max_cells: REFERENCE_RTT_CELLS,
    };
    let rows = match table {
        1 => [
            (100, "73.27 Mbps"),
            (1_000, "83.79 Mbps"),
            (10_000, "95.48 Mbps"),
            (100_000, "110.90 Mbps"),
        ]
        .into_iter()
        .map(|(b, pubd)| Row {
            label: format!("buffer {b} cells"),
            config: table1_config(b),
            published: pubd,
            expect: if b >= 24_576 { Expect::Lossless } else { Expect::Lossy },
        })
        .collect(),
        2 => [
            (0.95, 100, "2588 (0.23xRTT)"),
            (0.8, 100, "5217 (0.47xRTT)"),
            (0.7, 100, "5688 (0.52xRTT)"),
            (0.95, 10, "2709 (0.25xRTT)"),
            (0.8, 10, "DIVERGENT"),
            (0.7, 10, "DIVERGENT"),
            (0.95, 1, "2589 (0.23xRTT)"),
            (0.8, 1, "4077 (0.37xRTT)"),
            (0.7, 1, "2928 (0.26xRTT)"),
        ]
        .into_iter()
        .map(|(d, p, pubd)| Row {
            label: format!("d={d} p={p}ms"),
            config: vbr_config(d, p, 1000.0),
            published: pubd,
            expect: if pubd == "DIVERGENT" { Expect::Divergent } else { conv },
        })
        .collect(),
        3 => [(100.0, "4176 (0.4xRTT)"), (500.0, "DIVERGES"), (1000.0, "DIVERGES")]
            .into_iter()
            .map(|(km, pubd)| {
                let config = vbr_config(0.8, 10, km);
                Row {
                    label: format!("feedback {}ms", crate::config::feedback_delay(&config).as_millis_f64()),
                    config,
                    published: pubd,
                    expect: if pubd == "DIVERGES" { Expect::Divergent } else { conv },
                }
            })
            .collect(),
        4 => {
            let (lo, hi) = ENHANCED_QUEUE_RANGE;
            vec![
                Row {
                    label: "(1,100) Na+z averaging".into(),
                    config: table4_config(1),
                    published: "5223",
                    expect: Expect::ConvergentIn { lo, hi },
                },
                Row {
                    label: "(5,500) Na averaging".into(),
                    config: table4_config(2),
                    published: "5637",
                    expect: Expect::ConvergentIn { lo, hi },
                },
                Row {
                    label: "(1,100) no averaging".into(),
                    config: table4_config(0),
                    published: "formerly divergent",
                    expect: Expect::Divergent,
                },
            ]
        }
        t => return Err(UnknownTable(t)),
    };
    Ok(rows)
}

/// Runs every config on its own thread; results come back in input order.
pub fn run_parallel(configs: &[ScenarioConfig]) -> Vec<RunOutput> {
    thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run_scenario(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    })
}

fn judge(expect: Expect, out: &RunOutput, larger: Option<&RunOutput>, lossless: Option<&RunOutput>) -> (bool, String) {
    let m = &out.metrics;
    let mut fails = Vec::new();
    if !out.conservation.holds() {
        fails.push("cell or byte conservation violated".to_string());
    }
    match expect {
        Expect::Lossless => {
            let lo = REFERENCE_GOODPUT_MBPS * (1.0 - GOODPUT_TOLERANCE);
            let hi = REFERENCE_GOODPUT_MBPS * (1.0 + GOODPUT_TOLERANCE);
            if !(lo..=hi).contains(&m.total_tcp_goodput_mbps) {
                fails.push(format!(
                    "goodput {:.3} outside [{lo:.2}, {hi:.2}]",
                    m.total_tcp_goodput_mbps
                ));
            }
            if m.drops_source + m.drops_switch != 0 {
                fails.push("drops with a full window of buffering".into());
            }
            let win = out_window_cells(out);
            for (vc, &q) in m.max_source_queue.iter().enumerate() {
                if !(0.90 * win..=win).contains(&(q as f64)) {
                    fails.push(format!("vc{vc} max source queue {q} outside [0.90, 1.00] x {win}"));
                    break;
                }
            }
            let limit = 0.05 * m.rtt_report_cells;
            if m.steady_state_switch_queue >= limit {
                fails.push(format!(
                    "steady switch queue {:.1} >= {limit:.0}",
                    m.steady_state_switch_queue
                ));
            }
        }
        Expect::Lossy => {
            if m.drops_source + m.drops_switch == 0 {
                fails.push("no drops with a short source buffer".into());
            }
            if let Some(next) = larger {
                if m.total_tcp_goodput_mbps >= next.metrics.total_tcp_goodput_mbps {
                    fails.push("goodput not below the next larger buffer".into());
                }
            }
            if let Some(full) = lossless {
                if m.total_tcp_goodput_mbps >= full.metrics.total_tcp_goodput_mbps {
                    fails.push("goodput not below the full-window run".into());
                }
            }
        }
        Expect::Convergent { max_cells } => {
            if m.divergence != Divergence::Convergent {
                fails.push(format!("classified {}", m.divergence));
            }
            if m.max_switch_queue as f64 >= max_cells {
                fails.push(format!("max switch queue {} >= {max_cells:.0}", m.max_switch_queue));
            }
        }
        Expect::ConvergentIn { lo, hi } => {
            if m.divergence != Divergence::Convergent {
                fails.push(format!("classified {}", m.divergence));
            }
            if !(lo..=hi).contains(&m.max_switch_queue) {
                fails.push(format!("max switch queue {} outside [{lo}, {hi}]", m.max_switch_queue));
            }
        }
        Expect::Divergent => {
            if m.divergence != Divergence::Divergent {
                fails.push(format!("classified {}", m.divergence));
            }
        }
    }
    (fails.is_empty(), fails.join("; "))
}

fn out_window_cells(out: &RunOutput) -> f64 {
    out.window_cells as f64
}

/// Switch buffering under 3 RTT whenever the source holds at least 1000 cells.
pub fn switch_bound_holds(out: &RunOutput) -> bool {
    let big_enough = match out.metrics.source_buffer {
        BufferSize::Cells(n) => n >= 1_000,
        BufferSize::Infinite => true,
    };
    !big_enough || (out.metrics.max_switch_queue as f64) < 3.0 * out.metrics.rtt_report_cells
}

/// Runs a table's rows (in parallel) and judges each one.
pub fn reproduce_table(table: u8) -> Result<TableReport, UnknownTable> {
    let rows = table_rows(table)?;
    let configs: Vec<_> = rows.iter().map(|r| r.config.clone()).collect();
    let outputs = run_parallel(&configs);
    Ok(judge_rows(table, rows, outputs))
}

pub fn judge_rows(table: u8, rows: Vec<Row>, outputs: Vec<RunOutput>) -> TableReport {
    let lossless = rows.iter().position(|r| r.expect == Expect::Lossless);
    let mut results = Vec::with_capacity(rows.len());
    for (i, (row, out)) in rows.iter().zip(&outputs).enumerate() {
        let larger = outputs.get(i + 1).filter(|_| table == 1);
        let full = lossless.map(|j| &outputs[j]);
        let (mut pass, mut diagnostic) = judge(row.expect, out, larger, full);
        if table == 1 && !switch_bound_holds(out) {
            pass = false;
            if !diagnostic.is_empty() {
                diagnostic.push_str("; ");
            }
            diagnostic.push_str("switch queue not under 3xRTT");
        }
        results.push(RowResult {
            row: row.clone(),
            output: out.clone(),
            pass,
            diagnostic,
        });
    }
    TableReport { table, rows: results }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_counts() {
        assert_eq!(table_rows(1).unwrap().len(), 4);
        assert_eq!(table_rows(2).unwrap().len(), 9);
        assert_eq!(table_rows(3).unwrap().len(), 3);
        assert_eq!(table_rows(4).unwrap().len(), 3);
        assert_eq!(table_rows(5).unwrap_err(), UnknownTable(5));
    }

    #[test]
    fn sweep_parameters() {
        let t1 = table_rows(1).unwrap();
        let bufs: Vec<_> = t1.iter().map(|r| r.config.source_buffer).collect();
        assert_eq!(bufs, [100, 1_000, 10_000, 100_000].map(BufferSize::Cells).to_vec());
        let t3 = table_rows(3).unwrap();
        let fb: Vec<_> = t3
            .iter()
            .map(|r| crate::config::feedback_delay(&r.config).as_millis_f64())
            .collect();
        assert_eq!(fb, vec![1.0, 5.0, 10.0]);
        for r in table_rows(4).unwrap() {
            let v = r.config.vbr.unwrap();
            assert_eq!((v.duty_cycle, v.period), (0.7, SimTime::from_millis(20)));
        }
    }
}
