//! Output-buffered switch port with strict VBR priority.
//!
//! ABR cells wait in a FIFO; VBR cells are always sent first when one is
//! pending at a transmission opportunity. A cell that has started on the
//! wire always completes. The port also owns the ERICA measurement state and
//! stamps explicit rates into backward RM cells passing the other way.

use std::collections::VecDeque;

use crate::abr::{Cell, CellKind, RmDirection, RmFields};
use crate::erica::{EricaParams, IntervalMetrics, PortMeasurement};
use crate::time::{cell_time_ns, mbps_to_cells_per_sec, SimTime};
use crate::vbr::VbrSchedule;

/// Outcome of offering a cell to the port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arrival {
    pub accepted: bool,
    /// The ERICA interval's cell budget is exhausted and should end now.
    pub interval_full: bool,
    /// The link was idle and should begin serving now.
    pub start_service: bool,
}

/// What the link does at a transmission opportunity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Service {
    /// A VBR cell occupies the link until `end_ns`.
    Vbr { end_ns: f64 },
    /// An ABR cell occupies the link until `end_ns`.
    Abr { cell: Cell, end_ns: f64 },
    /// Nothing to send; wake at the next VBR emission, if any.
    Idle { wake: Option<SimTime> },
}

/// Tracks the running maximum of a quantity over fixed-length windows,
/// carrying the level across windows with no updates.
#[derive(Debug, Clone)]
pub struct WindowMax {
    origin: SimTime,
    window: SimTime,
    level: u64,
    maxima: Vec<u64>,
}

impl WindowMax {
    pub fn new(origin: SimTime, window: SimTime) -> Self {
        assert!(window > SimTime::ZERO);
        WindowMax {
            origin,
            window,
            level: 0,
            maxima: Vec::new(),
        }
    }

    fn roll_to(&mut self, t: SimTime) {
        if t < self.origin {
            return;
        }
        let idx = ((t - self.origin).as_nanos() / self.window.as_nanos()) as usize;
        while self.maxima.len() <= idx {
            self.maxima.push(self.level);
        }
    }

    pub fn record(&mut self, t: SimTime, level: u64) {
        self.roll_to(t);
        self.level = level;
        if let Some(last) = self.maxima.last_mut() {
            *last = (*last).max(level);
        }
    }

    /// Maxima of every window that has fully elapsed by `end`.
    pub fn complete_windows(&mut self, end: SimTime) -> Vec<u64> {
        self.roll_to(end);
        if end < self.origin {
            return Vec::new();
        }
        let full = ((end - self.origin).as_nanos() / self.window.as_nanos()) as usize;
        self.maxima[..full.min(self.maxima.len())].to_vec()
    }
}

/// Time-weighted mean of a level over `[from, ..)`.
#[derive(Debug, Clone)]
pub struct TimeAverage {
    from: SimTime,
    last_t: SimTime,
    level: u64,
    area: f64,
}

impl TimeAverage {
    pub fn new(from: SimTime) -> Self {
        TimeAverage {
            from,
            last_t: from,
            level: 0,
            area: 0.0,
        }
    }

    pub fn record(&mut self, t: SimTime, level: u64) {
        if t > self.last_t {
            self.area += self.level as f64 * (t - self.last_t).as_nanos() as f64;
            self.last_t = t;
        }
        self.level = level;
    }

    pub fn mean(&mut self, end: SimTime) -> f64 {
        self.record(end, self.level);
        let span = end.saturating_sub(self.from).as_nanos();
        if span == 0 {
            self.level as f64
        } else {
            self.area / span as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct BottleneckPort {
    abr_queue: VecDeque<Cell>,
    capacity: Option<usize>,
    cell_time_ns: f64,
    busy: bool,
    busy_until_ns: f64,
    vbr: Option<VbrSchedule>,
    vbr_served: u64,
    /// VBR cells already credited to the ERICA measurement.
    vbr_counted: u64,
    pub erica: PortMeasurement,
    pub max_queue_seen: usize,
    pub arrived: u64,
    pub departed: u64,
    pub dropped: u64,
    pub brm_stamped: u64,
    window_max: Option<WindowMax>,
    steady: Option<TimeAverage>,
}

impl BottleneckPort {
    pub fn new(
        link_rate_mbps: f64,
        capacity: Option<usize>,
        vbr: Option<VbrSchedule>,
        erica: EricaParams,
        n_vcs: usize,
    ) -> Self {
        BottleneckPort {
            abr_queue: VecDeque::new(),
            capacity,
            cell_time_ns: cell_time_ns(link_rate_mbps),
            busy: false,
            busy_until_ns: 0.0,
            vbr,
            vbr_served: 0,
            vbr_counted: 0,
            erica: PortMeasurement::new(erica, mbps_to_cells_per_sec(link_rate_mbps), n_vcs),
            max_queue_seen: 0,
            arrived: 0,
            departed: 0,
            dropped: 0,
            brm_stamped: 0,
            window_max: None,
            steady: None,
        }
    }

    /// Track per-window queue maxima (for divergence detection).
    pub fn track_window_maxima(&mut self, origin: SimTime, window: SimTime) {
        self.window_max = Some(WindowMax::new(origin, window));
    }

    /// Track the time-averaged queue from `from` onwards.
    pub fn track_mean_from(&mut self, from: SimTime) {
        self.steady = Some(TimeAverage::new(from));
    }

    pub fn queue_len(&self) -> usize {
        self.abr_queue.len()
    }

    pub fn is_busy(&self) -> bool {
        self.busy
    }

    pub fn vbr_schedule(&self) -> Option<&VbrSchedule> {
        self.vbr.as_ref()
    }

    fn note_queue(&mut self, now: SimTime) {
        let q = self.abr_queue.len();
        self.max_queue_seen = self.max_queue_seen.max(q);
        if let Some(w) = &mut self.window_max {
            w.record(now, q as u64);
        }
        if let Some(s) = &mut self.steady {
            if now >= s.from {
                s.record(now, q as u64);
            } else {
                s.level = q as u64;
            }
        }
    }

    /// Accepts a forward ABR cell (data or FRM) from an input link.
    pub fn on_cell(&mut self, cell: Cell, now: SimTime) -> Arrival {
        let frm_ccr = match cell.kind {
            CellKind::Rm(rm) => {
                debug_assert_eq!(rm.direction, RmDirection::Forward);
                Some(rm.ccr)
            }
            _ => None,
        };
        let interval_full = self.erica.on_abr_cell(cell.vc, frm_ccr);
        self.arrived += 1;
        let full = self.capacity.is_some_and(|cap| self.abr_queue.len() >= cap);
        if full {
            self.dropped += 1;
        } else {
            self.abr_queue.push_back(cell);
            self.note_queue(now);
        }
        Arrival {
            accepted: !full,
            interval_full,
            start_service: !full && !self.busy,
        }
    }

    fn vbr_pending(&self, now: SimTime) -> bool {
        self.vbr
            .as_ref()
            .is_some_and(|v| v.generated_through(now) > self.vbr_served)
    }

    /// Picks the next cell for the link at `now`: VBR first, then the ABR
    /// FIFO head. Marks the link busy for one cell time when something is sent.
    pub fn serve_link(&mut self, now: SimTime) -> Service {
        let start = self.busy_until_ns.max(now.as_nanos() as f64);
        if self.vbr_pending(now) {
            self.vbr_served += 1;
            self.busy = true;
            self.busy_until_ns = start + self.cell_time_ns;
            return Service::Vbr {
                end_ns: self.busy_until_ns,
            };
        }
        if let Some(cell) = self.abr_queue.pop_front() {
            self.departed += 1;
            self.note_queue(now);
            self.busy = true;
            self.busy_until_ns = start + self.cell_time_ns;
            return Service::Abr {
                cell,
                end_ns: self.busy_until_ns,
            };
        }
        self.busy = false;
        let wake = self.vbr.as_ref().map(|v| v.cell_time(self.vbr_served).max(now));
        Service::Idle { wake }
    }

    /// Ends the ERICA averaging interval at `now`.
    pub fn end_interval(&mut self, now: SimTime) -> IntervalMetrics {
        if let Some(v) = &self.vbr {
            let generated = v.generated_through(now);
            self.erica.add_vbr_cells(generated - self.vbr_counted);
            self.vbr_counted = generated;
        }
        self.erica.end_interval(now, self.abr_queue.len())
    }

    /// Stamps a backward RM cell: ER := min(ER in cell, computed ER).
    pub fn stamp_brm(&mut self, vc: u32, rm: RmFields) -> RmFields {
        debug_assert_eq!(rm.direction, RmDirection::Backward);
        self.brm_stamped += 1;
        RmFields {
            er: rm.er.min(self.erica.compute_er(vc)),
            ..rm
        }
    }

    /// Per-window queue maxima for windows fully elapsed by `end`.
    pub fn window_maxima(&mut self, end: SimTime) -> Vec<u64> {
        self.window_max
            .as_mut()
            .map(|w| w.complete_windows(end))
            .unwrap_or_default()
    }

    pub fn mean_queue(&mut self, end: SimTime) -> Option<f64> {
        self.steady.as_mut().map(|s| s.mean(end))
    }

    /// Switch cell conservation: arrived = departed + queued + dropped.
    pub fn conserves_cells(&self) -> bool {
        self.arrived == self.departed + self.abr_queue.len() as u64 + self.dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vbr::VbrParams;

    fn data(vc: u32) -> Cell {
        Cell {
            vc,
            kind: CellKind::Data,
        }
    }

    fn port(vbr: Option<VbrParams>) -> BottleneckPort {
        BottleneckPort::new(155.52, None, vbr.map(VbrSchedule::new), EricaParams::erica_plus(), 15)
    }

    #[test]
    fn idle_port_serves_arrival_in_one_cell_time() {
        let mut p = port(None);
        let a = p.on_cell(data(0), SimTime::ZERO);
        assert!(a.start_service);
        match p.serve_link(SimTime::ZERO) {
            Service::Abr { end_ns, .. } => assert!((end_ns - 2726.337).abs() < 1e-3),
            s => panic!("{s:?}"),
        }
        assert!(!p.on_cell(data(1), SimTime(10)).start_service);
    }

    #[test]
    fn vbr_goes_first() {
        let mut p = port(Some(VbrParams {
            start: SimTime::ZERO,
            ..VbrParams::default()
        }));
        p.on_cell(data(0), SimTime::ZERO);
        assert!(matches!(p.serve_link(SimTime::ZERO), Service::Vbr { .. }));
        assert!(matches!(p.serve_link(SimTime(2727)), Service::Abr { .. }));
    }

    #[test]
    fn empty_port_idles_until_next_vbr_cell() {
        let mut p = port(Some(VbrParams::default()));
        assert_eq!(
            p.serve_link(SimTime::ZERO),
            Service::Idle {
                wake: Some(SimTime::from_millis(2))
            }
        );
        let mut p = port(None);
        assert_eq!(p.serve_link(SimTime::ZERO), Service::Idle { wake: None });
    }

    #[test]
    fn fifo_order_within_abr() {
        let mut p = port(None);
        for vc in 0..5 {
            p.on_cell(data(vc), SimTime::ZERO);
        }
        let mut order = Vec::new();
        let mut t = SimTime::ZERO;
        while let Service::Abr { cell, end_ns } = p.serve_link(t) {
            order.push(cell.vc);
            t = SimTime::from_nanos_f64(end_ns);
        }
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
        assert!(p.conserves_cells());
    }

    #[test]
    fn drains_one_rtt_of_cells_in_thirty_ms() {
        let mut p = port(None);
        for _ in 0..11_040 {
            p.on_cell(data(0), SimTime::ZERO);
        }
        let mut t = SimTime::ZERO;
        let mut last_end = 0.0;
        while let Service::Abr { end_ns, .. } = p.serve_link(t) {
            last_end = end_ns;
            t = SimTime::from_nanos_f64(end_ns);
        }
        let ms = last_end / 1e6;
        assert!((ms - 30.1).abs() < 0.1, "{ms}");
    }

    #[test]
    fn abr_gets_residual_slots_under_vbr() {
        let mut p = port(Some(VbrParams {
            duty_cycle: 1.0,
            start: SimTime::ZERO,
            ..VbrParams::default()
        }));
        for _ in 0..100_000 {
            p.on_cell(data(0), SimTime::ZERO);
        }
        let mut t = SimTime::ZERO;
        let (mut vbr, mut abr) = (0u32, 0u32);
        while t < SimTime::from_millis(100) {
            let end = match p.serve_link(t) {
                Service::Vbr { end_ns } => {
                    vbr += 1;
                    end_ns
                }
                Service::Abr { end_ns, .. } => {
                    abr += 1;
                    end_ns
                }
                Service::Idle { .. } => unreachable!(),
            };
            t = SimTime::from_nanos_f64(end);
        }
        let share = abr as f64 / (abr + vbr) as f64;
        assert!((share - 0.2).abs() < 0.01, "{share}");
    }

    #[test]
    fn brm_stamping_takes_minimum() {
        let mut p = port(None);
        let link = mbps_to_cells_per_sec(155.52);
        let rm = RmFields {
            direction: RmDirection::Backward,
            er: link,
            ccr: 0.0,
        };
        let computed = p.erica.compute_er(0);
        assert_eq!(p.stamp_brm(0, rm).er, computed);
        let low = RmFields { er: 10.0, ..rm };
        assert_eq!(p.stamp_brm(0, low).er, 10.0);
    }

    #[test]
    fn finite_buffer_drops() {
        let mut p = BottleneckPort::new(155.52, Some(2), None, EricaParams::erica(), 1);
        p.on_cell(data(0), SimTime::ZERO);
        p.on_cell(data(0), SimTime::ZERO);
        assert!(!p.on_cell(data(0), SimTime::ZERO).accepted);
        assert_eq!(p.dropped, 1);
        assert!(p.conserves_cells());
    }

    #[test]
    fn window_max_carries_level() {
        let mut w = WindowMax::new(SimTime::ZERO, SimTime(10));
        w.record(SimTime(1), 5);
        w.record(SimTime(2), 3);
        w.record(SimTime(35), 7);
        assert_eq!(w.complete_windows(SimTime(40)), vec![5, 3, 3, 7]);
    }

    #[test]
    fn time_average() {
        let mut a = TimeAverage::new(SimTime(10));
        a.record(SimTime(10), 4);
        a.record(SimTime(15), 0);
        assert!((a.mean(SimTime(20)) - 2.0).abs() < 1e-12);
    }
}
