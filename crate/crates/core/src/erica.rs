//! ERICA and ERICA+ explicit-rate computation for one switch output port.
//!
//! The port measures, over successive averaging intervals, the ABR input
//! rate, the VBR rate and which VCs were active. An interval ends after
//! `interval` time or `interval_cells` ABR input cells, whichever comes first.
//! At the end of each interval it derives
//!
//! ```text
//! target capacity  C_t = factor × (link rate − VBR rate)
//!                  factor = U (ERICA) or f(queue) (ERICA+)
//! overload         z   = ABR input rate / C_t
//! fair share           = C_t / N_a
//! VC share             = CCR_vc / z
//! ER                   = min(max(fair share, VC share), C_t)
//! ```
//!
//! Three variance-reduction options sit on top of the basic scheme: decaying
//! per-VC activity levels for `N_a`, exponential averaging of `z` (either
//! averaging `z` itself with resets on outliers, or averaging input rate and
//! capacity separately and taking the ratio), and clamping `N_a` to at least
//! one.

use std::fmt;
use std::str::FromStr;

use crate::abr::VcId;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Erica,
    EricaPlus,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Erica => "ERICA",
            Scheme::EricaPlus => "ERICA+",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "erica" => Ok(Scheme::Erica),
            "erica+" | "erica_plus" | "ericaplus" => Ok(Scheme::EricaPlus),
            _ => Err(format!("expected erica or erica+, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZAveraging {
    None,
    /// Exponential average of z, reset whenever z is measured as 0 or ∞.
    Scheme1,
    /// Ratio of separately averaged input rate and capacity.
    Scheme2,
}

impl fmt::Display for ZAveraging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZAveraging::None => "none",
            ZAveraging::Scheme1 => "scheme1",
            ZAveraging::Scheme2 => "scheme2",
        })
    }
}

impl FromStr for ZAveraging {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "off" => Ok(ZAveraging::None),
            "scheme1" | "1" => Ok(ZAveraging::Scheme1),
            "scheme2" | "2" => Ok(ZAveraging::Scheme2),
            _ => Err(format!("expected none, scheme1 or scheme2, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EricaParams {
    pub scheme: Scheme,
    /// Target utilization; ERICA+ ignores it and uses the queue-control curve.
    pub target_utilization: f64,
    pub interval: SimTime,
    pub interval_cells: u32,
    /// Target queueing delay.
    pub t0: SimTime,
    pub a: f64,
    pub b: f64,
    /// Queue drain limit factor: floor of the queue-control curve.
    pub qdlf: f64,
    pub na_averaging: bool,
    pub alpha_n: f64,
    pub z_averaging: ZAveraging,
    pub alpha_z: f64,
}

impl Default for EricaParams {
    fn default() -> Self {
        EricaParams {
            scheme: Scheme::EricaPlus,
            target_utilization: 0.9,
            interval: SimTime::from_millis(1),
            interval_cells: 100,
            t0: SimTime::from_micros(500),
            a: 1.15,
            b: 1.05,
            qdlf: 0.5,
            na_averaging: false,
            alpha_n: 0.9,
            z_averaging: ZAveraging::None,
            alpha_z: 0.2,
        }
    }
}

impl EricaParams {
    /// Plain ERICA with the usual 90% target.
    pub fn erica() -> Self {
        EricaParams {
            scheme: Scheme::Erica,
            ..Self::default()
        }
    }

    /// The source-queue study variant: ERICA, N_a averaging, (5 ms, 500 cells).
    pub fn modified_erica() -> Self {
        EricaParams {
            scheme: Scheme::Erica,
            interval: SimTime::from_millis(5),
            interval_cells: 500,
            na_averaging: true,
            ..Self::default()
        }
    }

    pub fn erica_plus() -> Self {
        Self::default()
    }

    /// Checks parameter ranges; returns the offending key on failure.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let bad = |k: &'static str, why: &str| Err((k, why.to_string()));
        if !(self.target_utilization > 0.0 && self.target_utilization <= 1.0) {
            return bad("erica.u", "must be in (0, 1]");
        }
        if self.interval == SimTime::ZERO {
            return bad("erica.interval_ms", "must be positive");
        }
        if self.interval_cells == 0 {
            return bad("erica.interval_cells", "must be positive");
        }
        if self.t0 == SimTime::ZERO {
            return bad("erica.t0_us", "must be positive");
        }
        if !(self.a.is_finite() && self.a > 1.0) {
            return bad("erica.a", "must be > 1");
        }
        if !(self.b.is_finite() && self.b > 1.0) {
            return bad("erica.b", "must be > 1");
        }
        if !(self.qdlf > 0.0 && self.qdlf < 1.0) {
            return bad("erica.qdlf", "must be in (0, 1)");
        }
        if !(self.alpha_n > 0.0 && self.alpha_n < 1.0) {
            return bad("erica.alpha_n", "must be in (0, 1)");
        }
        if !(self.alpha_z > 0.0 && self.alpha_z <= 1.0) {
            return bad("erica.alpha_z", "must be in (0, 1]");
        }
        Ok(())
    }
}

/// ERICA+ queue-control factor for a queue of `q` cells.
///
/// With `q0 = t0 × link cell rate` the curve is the two-branch hyperbola
/// `b·q0 / ((b−1)·q + q0)` below `q0` and `a·q0 / ((a−1)·q + q0)` above it,
/// floored at `qdlf`. It equals `b` at zero, one at `q0`, and never rises
/// with `q`.
pub fn queue_control_factor(q: f64, params: &EricaParams, link_cell_rate: f64) -> f64 {
    let q0 = params.t0.as_secs_f64() * link_cell_rate;
    let q = q.max(0.0);
    let f = if q <= q0 {
        params.b * q0 / ((params.b - 1.0) * q + q0)
    } else {
        params.a * q0 / ((params.a - 1.0) * q + q0)
    };
    f.max(params.qdlf)
}

fn is_outlier(z: f64) -> bool {
    z == 0.0 || z.is_infinite() || z.is_nan()
}

/// One step of the resetting exponential average of z.
///
/// An outlier (0 or ∞) clears the average; the next finite sample seeds it.
pub fn average_overload_scheme1(z_avg: Option<f64>, z_inst: f64, alpha_z: f64) -> Option<f64> {
    if is_outlier(z_inst) {
        return None;
    }
    Some(match z_avg {
        Some(avg) => alpha_z * z_inst + (1.0 - alpha_z) * avg,
        None => z_inst,
    })
}

/// Separate exponential averages of ABR input rate and target capacity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RatioAverager {
    pub avg_in: Option<f64>,
    pub avg_cap: Option<f64>,
}

impl RatioAverager {
    /// Folds in one interval (outliers included) and returns the averaged
    /// overload. A capacity average of zero yields +∞.
    pub fn update(&mut self, in_inst: f64, cap_inst: f64, alpha_z: f64) -> f64 {
        let blend = |avg: Option<f64>, x: f64| match avg {
            Some(a) => alpha_z * x + (1.0 - alpha_z) * a,
            None => x,
        };
        self.avg_in = Some(blend(self.avg_in, in_inst));
        self.avg_cap = Some(blend(self.avg_cap, cap_inst.max(0.0)));
        self.z()
    }

    pub fn z(&self) -> f64 {
        match (self.avg_in, self.avg_cap) {
            (Some(i), Some(c)) if c > 0.0 => i / c,
            (Some(i), Some(_)) if i > 0.0 => f64::INFINITY,
            _ => 0.0,
        }
    }
}

/// Per-VC activity after one interval: reset to one if seen, else decayed.
pub fn update_activity(activity: f64, seen: bool, alpha_n: f64) -> f64 {
    if seen {
        1.0
    } else {
        activity * alpha_n
    }
}

/// Effective number of active sources, clamped below at one.
pub fn clamp_active_sources(n_a: f64) -> f64 {
    n_a.max(1.0)
}

/// Quantities derived at the end of an averaging interval. Rates in cells/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalMetrics {
    pub end: SimTime,
    pub duration: SimTime,
    pub abr_input_rate: f64,
    pub vbr_rate: f64,
    pub capacity_factor: f64,
    pub target_capacity: f64,
    /// Overload measured in this interval alone (may be 0 or ∞).
    pub z_inst: f64,
    /// Overload used for feedback after averaging.
    pub z_eff: f64,
    pub n_a: f64,
    pub queue_len: usize,
}

/// ER for a VC given the latest interval metrics and its last known CCR.
pub fn compute_er(ccr: Option<f64>, m: &IntervalMetrics) -> f64 {
    let target = m.target_capacity.max(0.0);
    let fairshare = target / clamp_active_sources(m.n_a);
    let er = match ccr {
        None => fairshare,
        Some(ccr) => {
            let vcshare = if m.z_eff > 0.0 { ccr / m.z_eff } else { f64::INFINITY };
            fairshare.max(vcshare)
        }
    };
    er.min(target)
}

/// Measurement and feedback state of one output port.
#[derive(Debug, Clone)]
pub struct PortMeasurement {
    params: EricaParams,
    link_cell_rate: f64,
    abr_cells_in: u32,
    vbr_cells_in: u64,
    interval_start: SimTime,
    seen: Vec<bool>,
    ccr: Vec<Option<f64>>,
    activity: Vec<f64>,
    z_avg: Option<f64>,
    /// Last defined scheme-1 average, used while the average is reset.
    z_held: Option<f64>,
    ratio: RatioAverager,
    last: Option<IntervalMetrics>,
    intervals: u64,
}

impl PortMeasurement {
    pub fn new(params: EricaParams, link_cell_rate: f64, n_vcs: usize) -> Self {
        PortMeasurement {
            params,
            link_cell_rate,
            abr_cells_in: 0,
            vbr_cells_in: 0,
            interval_start: SimTime::ZERO,
            seen: vec![false; n_vcs],
            ccr: vec![None; n_vcs],
            activity: vec![0.0; n_vcs],
            z_avg: None,
            z_held: None,
            ratio: RatioAverager::default(),
            last: None,
            intervals: 0,
        }
    }

    pub fn params(&self) -> &EricaParams {
        &self.params
    }

    pub fn interval_start(&self) -> SimTime {
        self.interval_start
    }

    pub fn abr_cells_in(&self) -> u32 {
        self.abr_cells_in
    }

    pub fn intervals_completed(&self) -> u64 {
        self.intervals
    }

    pub fn last_metrics(&self) -> Option<&IntervalMetrics> {
        self.last.as_ref()
    }

    pub fn activity(&self, vc: VcId) -> f64 {
        self.activity[vc as usize]
    }

    pub fn ccr(&self, vc: VcId) -> Option<f64> {
        self.ccr[vc as usize]
    }

    /// Records a forward ABR cell (data or FRM). Returns true once the
    /// interval's cell budget is used up and the interval should end now.
    pub fn on_abr_cell(&mut self, vc: VcId, frm_ccr: Option<f64>) -> bool {
        self.abr_cells_in += 1;
        self.seen[vc as usize] = true;
        if let Some(ccr) = frm_ccr {
            self.ccr[vc as usize] = Some(ccr);
        }
        self.abr_cells_in >= self.params.interval_cells
    }

    pub fn add_vbr_cells(&mut self, n: u64) {
        self.vbr_cells_in += n;
    }

    fn capacity_factor(&self, queue_len: usize) -> f64 {
        match self.params.scheme {
            Scheme::Erica => self.params.target_utilization,
            Scheme::EricaPlus => queue_control_factor(queue_len as f64, &self.params, self.link_cell_rate),
        }
    }

    /// Closes the current interval at `now` with the instantaneous queue
    /// length, and starts the next one.
    pub fn end_interval(&mut self, now: SimTime, queue_len: usize) -> IntervalMetrics {
        let duration = now.saturating_sub(self.interval_start);
        assert!(duration > SimTime::ZERO, "zero-length averaging interval at {now}");
        let secs = duration.as_secs_f64();
        let abr_input_rate = self.abr_cells_in as f64 / secs;
        let vbr_rate = self.vbr_cells_in as f64 / secs;
        let capacity_factor = self.capacity_factor(queue_len);
        let target_capacity = (capacity_factor * (self.link_cell_rate - vbr_rate)).max(0.0);

        let z_inst = if target_capacity > 0.0 {
            abr_input_rate / target_capacity
        } else if abr_input_rate > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };

        let z_eff = match self.params.z_averaging {
            ZAveraging::None => z_inst,
            ZAveraging::Scheme1 => {
                self.z_avg = average_overload_scheme1(self.z_avg, z_inst, self.params.alpha_z);
                if self.z_avg.is_some() {
                    self.z_held = self.z_avg;
                }
                self.z_held.unwrap_or(z_inst)
            }
            ZAveraging::Scheme2 => self.ratio.update(abr_input_rate, target_capacity, self.params.alpha_z),
        };

        let alpha_n = self.params.alpha_n;
        let averaging = self.params.na_averaging;
        for (act, seen) in self.activity.iter_mut().zip(self.seen.iter_mut()) {
            *act = if averaging {
                update_activity(*act, *seen, alpha_n)
            } else if *seen {
                1.0
            } else {
                0.0
            };
            *seen = false;
        }
        let n_a = clamp_active_sources(self.activity.iter().sum());

        let m = IntervalMetrics {
            end: now,
            duration,
            abr_input_rate,
            vbr_rate,
            capacity_factor,
            target_capacity,
            z_inst,
            z_eff,
            n_a,
            queue_len,
        };
        self.last = Some(m);
        self.intervals += 1;
        self.abr_cells_in = 0;
        self.vbr_cells_in = 0;
        self.interval_start = now;
        m
    }

    /// Explicit rate for `vc` from the most recent interval. Before any
    /// interval completes, every VC gets an equal split of the nominal
    /// target capacity.
    pub fn compute_er(&self, vc: VcId) -> f64 {
        match &self.last {
            Some(m) => compute_er(self.ccr[vc as usize], m),
            None => {
                let factor = match self.params.scheme {
                    Scheme::Erica => self.params.target_utilization,
                    Scheme::EricaPlus => 1.0,
                };
                factor * self.link_cell_rate / self.seen.len().max(1) as f64
            }
        }
    }
}
