//! The "N sources + VBR" network driven by the event engine.
//!
//! Forward path: source → (link 1) → Switch1 bottleneck port → (link 2) →
//! Switch2 → (link 3) → destination. Only Switch1's output toward Switch2 is
//! ever congested, so Switch2 contributes one cell time of serialization and
//! nothing else. Backward RM cells and TCP ACKs return over uncongested
//! links with propagation delay only (ACKs also pay their two cell times);
//! BRMs are stamped as they pass Switch1.

use crate::abr::{turnaround, AbrSource, AbrSourceParams, Cell, CellKind, RmFields, VcId, ACR_FLOOR_FRACTION};
use crate::config::{propagation_delay, ScenarioConfig, Traffic};
use crate::engine::{Engine, EventHandle};
use crate::metrics::{classify_window_maxima, describe, Divergence, RunMetrics, TraceRecord};
use crate::switch::{BottleneckPort, Service};
use crate::tcp::{segment_to_cells, AckEffect, TcpReceiver, TcpSender, TimerCmd, ACK_CELLS};
use crate::time::{cell_time_ns, SimTime};
use crate::vbr::{vbr_active, VbrSchedule};

/// Window used to classify queue growth when there is no VBR period.
pub const NO_VBR_WINDOW: SimTime = SimTime::from_millis(100);

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ev {
    SourceSend(VcId),
    SwitchArrival(Cell),
    LinkReady,
    IntervalTimer,
    BrmAtSwitch(VcId, RmFields),
    BrmAtSource(VcId, RmFields),
    SegmentAtDest { vc: VcId, seq: u64, len: u32 },
    AckAtSource { vc: VcId, ack: u64 },
    TcpTimeout(VcId),
    Trace,
}

struct VcHost {
    source: AbrSource,
    sender: Option<TcpSender>,
    receiver: TcpReceiver,
    send_event: Option<EventHandle>,
    rto_timer: Option<EventHandle>,
}

/// Cell and byte accounting at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Conservation {
    pub sources_ok: bool,
    pub switch_ok: bool,
    /// Every VC has delivered ≤ bytes ever sent and ≥ bytes acknowledged.
    pub tcp_bytes_ok: bool,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.sources_ok && self.switch_ok && self.tcp_bytes_ok
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: Vec<TraceRecord>,
    /// Per-window switch queue maxima used for the divergence verdict.
    pub window_maxima: Vec<u64>,
    pub window: SimTime,
    /// Receiver window expressed in cells.
    pub window_cells: u64,
    pub conservation: Conservation,
    pub final_acr: Vec<f64>,
    pub events: u64,
    pub timeouts: u64,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    engine: Engine<Ev>,
    hop: SimTime,
    cell_ns: f64,
    cells_per_segment: u64,
    vcs: Vec<VcHost>,
    port: BottleneckPort,
    link_wake: Option<EventHandle>,
    interval_timer: Option<EventHandle>,
    trace: Vec<TraceRecord>,
    vbr: Option<VbrSchedule>,
    window: SimTime,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        let cfg = cfg.clone();
        let link_cps = cfg.link_cell_rate();
        let vbr = cfg.vbr.map(VbrSchedule::new);
        let mut port = BottleneckPort::new(
            cfg.link_rate_mbps,
            cfg.switch_buffer.limit(),
            vbr.clone(),
            cfg.erica,
            cfg.n_sources,
        );
        let (origin, window) = match &cfg.vbr {
            Some(v) => (v.start, v.period),
            None => (SimTime::ZERO, NO_VBR_WINDOW),
        };
        port.track_window_maxima(origin, window);
        port.track_mean_from(SimTime(cfg.duration.as_nanos() / 3 * 2));

        let source_params = AbrSourceParams {
            pcr: link_cps,
            icr: cfg.icr_cells_per_sec(),
            acr_floor: link_cps * ACR_FLOOR_FRACTION,
            nrm: cfg.nrm,
            capacity: cfg.source_buffer.limit(),
            greedy: cfg.traffic == Traffic::Infinite,
        };
        let vcs = (0..cfg.n_sources as VcId)
            .map(|vc| VcHost {
                source: AbrSource::new(vc, source_params),
                sender: (cfg.traffic == Traffic::Tcp).then(|| TcpSender::new(cfg.tcp)),
                receiver: TcpReceiver::new(),
                send_event: None,
                rto_timer: None,
            })
            .collect();

        let mut sim = Simulation {
            hop: propagation_delay(cfg.link_length_km),
            cell_ns: cell_time_ns(cfg.link_rate_mbps),
            cells_per_segment: segment_to_cells(cfg.tcp.mss()),
            engine: Engine::new(),
            vcs,
            port,
            link_wake: None,
            interval_timer: None,
            trace: Vec::new(),
            vbr,
            window,
            cfg,
        };
        sim.start();
        sim
    }

    fn start(&mut self) {
        let interval = self.cfg.erica.interval;
        self.interval_timer = Some(self.engine.schedule(interval, Ev::IntervalTimer));
        self.engine.schedule(SimTime::ZERO, Ev::Trace);
        self.serve(SimTime::ZERO);
        for vc in 0..self.vcs.len() as VcId {
            if self.vcs[vc as usize].sender.is_some() {
                self.tcp_send(vc, SimTime::ZERO);
            }
            self.ensure_source_scheduled(vc, SimTime::ZERO);
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    pub fn port(&self) -> &BottleneckPort {
        &self.port
    }

    pub fn acrs(&self) -> Vec<f64> {
        self.vcs.iter().map(|h| h.source.acr()).collect()
    }

    pub fn source(&self, vc: VcId) -> &AbrSource {
        &self.vcs[vc as usize].source
    }

    pub fn sender(&self, vc: VcId) -> Option<&TcpSender> {
        self.vcs[vc as usize].sender.as_ref()
    }

    pub fn receiver(&self, vc: VcId) -> &TcpReceiver {
        &self.vcs[vc as usize].receiver
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn events_processed(&self) -> u64 {
        self.engine.processed()
    }

    /// Advances the simulation to `end`, delivering every event up to it.
    pub fn run_until(&mut self, end: SimTime) {
        while let Some((t, ev)) = self.engine.pop_until(end) {
            self.handle(t, ev);
        }
        self.engine.advance_to(end);
    }

    fn handle(&mut self, now: SimTime, ev: Ev) {
        match ev {
            Ev::SourceSend(vc) => self.on_source_send(vc, now),
            Ev::SwitchArrival(cell) => self.on_switch_arrival(cell, now),
            Ev::LinkReady => {
                self.link_wake = None;
                self.serve(now);
            }
            Ev::IntervalTimer => {
                self.interval_timer = None;
                self.end_interval(now);
            }
            Ev::BrmAtSwitch(vc, rm) => {
                let stamped = self.port.stamp_brm(vc, rm);
                self.engine.schedule(now + self.hop, Ev::BrmAtSource(vc, stamped));
            }
            Ev::BrmAtSource(vc, rm) => self.on_brm(vc, rm, now),
            Ev::SegmentAtDest { vc, seq, len } => {
                let ack = self.vcs[vc as usize].receiver.on_segment_arrival(seq, len);
                let back = self.three_hops_ns() + ACK_CELLS as f64 * self.cell_ns;
                let at = SimTime::from_nanos_f64(now.as_nanos() as f64 + back);
                self.engine.schedule(at, Ev::AckAtSource { vc, ack });
            }
            Ev::AckAtSource { vc, ack } => self.on_ack(vc, ack, now),
            Ev::TcpTimeout(vc) => self.on_timeout(vc, now),
            Ev::Trace => {
                self.record_trace(now);
                self.engine.schedule(now + self.cfg.trace_interval, Ev::Trace);
            }
        }
    }

    fn three_hops_ns(&self) -> f64 {
        3.0 * self.hop.as_nanos() as f64
    }

    fn ensure_source_scheduled(&mut self, vc: VcId, now: SimTime) {
        let host = &mut self.vcs[vc as usize];
        if host.send_event.is_none() && host.source.has_work() {
            let at = host.source.next_departure(now);
            host.send_event = Some(self.engine.schedule(at, Ev::SourceSend(vc)));
        }
    }

    fn on_source_send(&mut self, vc: VcId, now: SimTime) {
        let host = &mut self.vcs[vc as usize];
        host.send_event = None;
        if let Some(cell) = host.source.next_cell_departure(now) {
            // Access link: serialization plus propagation, never queued since
            // the source is paced at or below the link rate.
            let at = SimTime::from_nanos_f64(now.as_nanos() as f64 + self.cell_ns + self.hop.as_nanos() as f64);
            self.engine.schedule(at, Ev::SwitchArrival(cell));
        }
        self.ensure_source_scheduled(vc, now);
    }

    fn on_brm(&mut self, vc: VcId, rm: RmFields, now: SimTime) {
        let host = &mut self.vcs[vc as usize];
        host.source.on_brm(rm);
        if let Some(pending) = host.send_event {
            let earliest = host.source.next_departure(now);
            if earliest < pending.fire_time {
                self.engine.cancel(pending);
                host.send_event = Some(self.engine.schedule(earliest, Ev::SourceSend(vc)));
            }
        }
    }

    fn on_switch_arrival(&mut self, cell: Cell, now: SimTime) {
        let arrival = self.port.on_cell(cell, now);
        if arrival.interval_full && now > self.port.erica.interval_start() {
            if let Some(h) = self.interval_timer.take() {
                self.engine.cancel(h);
            }
            self.end_interval(now);
        }
        if arrival.start_service {
            if let Some(h) = self.link_wake.take() {
                self.engine.cancel(h);
            }
            self.serve(now);
        }
    }

    fn end_interval(&mut self, now: SimTime) {
        self.port.end_interval(now);
        self.interval_timer = Some(self.engine.schedule(now + self.cfg.erica.interval, Ev::IntervalTimer));
    }

    fn serve(&mut self, now: SimTime) {
        match self.port.serve_link(now) {
            Service::Vbr { end_ns } => {
                self.engine.schedule(SimTime::from_nanos_f64(end_ns), Ev::LinkReady);
            }
            Service::Abr { cell, end_ns } => {
                self.engine.schedule(SimTime::from_nanos_f64(end_ns), Ev::LinkReady);
                self.forward_to_destination(cell, end_ns);
            }
            Service::Idle { wake } => {
                if let Some(at) = wake {
                    self.link_wake = Some(self.engine.schedule(at, Ev::LinkReady));
                }
            }
        }
    }

    /// Delivers a cell that just left the bottleneck at `end_ns`.
    fn forward_to_destination(&mut self, cell: Cell, end_ns: f64) {
        let hop = self.hop.as_nanos() as f64;
        let at_dest = end_ns + hop + self.cell_ns + hop;
        match cell.kind {
            CellKind::Data => {}
            CellKind::SegmentEnd { seq, len } => {
                self.engine.schedule(
                    SimTime::from_nanos_f64(at_dest),
                    Ev::SegmentAtDest { vc: cell.vc, seq, len },
                );
            }
            CellKind::Rm(rm) => {
                let brm = turnaround(rm);
                let at_switch = at_dest + 2.0 * hop;
                self.engine
                    .schedule(SimTime::from_nanos_f64(at_switch), Ev::BrmAtSwitch(cell.vc, brm));
            }
        }
    }

    fn tcp_send(&mut self, vc: VcId, now: SimTime) {
        let cells = self.cells_per_segment;
        let host = &mut self.vcs[vc as usize];
        let Some(sender) = host.sender.as_mut() else {
            return;
        };
        for seg in sender.on_send_opportunity(now) {
            host.source.enqueue_segment(seg.seq, seg.len, cells);
        }
        if host.rto_timer.is_none() && sender.has_outstanding() {
            let rto = sender.rto;
            host.rto_timer = Some(self.engine.schedule(now + rto, Ev::TcpTimeout(vc)));
        }
        self.ensure_source_scheduled(vc, now);
    }

    fn on_ack(&mut self, vc: VcId, ack: u64, now: SimTime) {
        let host = &mut self.vcs[vc as usize];
        let Some(sender) = host.sender.as_mut() else {
            return;
        };
        if let AckEffect::NewData { timer, .. } = sender.on_ack(ack, now) {
            if let Some(h) = host.rto_timer.take() {
                self.engine.cancel(h);
            }
            if timer == TimerCmd::Restart {
                let rto = sender.rto;
                host.rto_timer = Some(self.engine.schedule(now + rto, Ev::TcpTimeout(vc)));
            }
            self.tcp_send(vc, now);
        }
    }

    fn on_timeout(&mut self, vc: VcId, now: SimTime) {
        let host = &mut self.vcs[vc as usize];
        host.rto_timer = None;
        let Some(sender) = host.sender.as_mut() else {
            return;
        };
        if !sender.has_outstanding() {
            return;
        }
        sender.on_timeout();
        self.tcp_send(vc, now);
    }

    fn record_trace(&mut self, now: SimTime) {
        let per_vc = if self.cfg.trace_per_vc {
            self.vcs
                .iter()
                .map(|h| (h.source.acr(), h.source.queue_len() as u64))
                .collect()
        } else {
            Vec::new()
        };
        self.trace.push(TraceRecord {
            t: now,
            switch_queue: self.port.queue_len() as u64,
            vbr_on: self.cfg.vbr.as_ref().is_some_and(|v| vbr_active(now, v)),
            per_vc,
        });
    }

    pub fn conservation(&self) -> Conservation {
        Conservation {
            sources_ok: self.vcs.iter().all(|h| h.source.conserves_cells()),
            switch_ok: self.port.conserves_cells(),
            tcp_bytes_ok: self.vcs.iter().all(|h| match &h.sender {
                Some(s) => h.receiver.delivered() <= s.snd_max && h.receiver.delivered() >= s.snd_una,
                None => true,
            }),
        }
    }

    /// Runs to the configured duration and collects results.
    pub fn finish(mut self) -> RunOutput {
        let end = self.cfg.duration;
        self.run_until(end);

        let window_maxima = self.port.window_maxima(end);
        let rtt_cells = self.cfg.rtt_report_cells();
        let divergence = if window_maxima.len() >= crate::metrics::MIN_WINDOWS {
            classify_window_maxima(&window_maxima, rtt_cells)
        } else {
            Divergence::Unknown
        };
        let delivered: u64 = self.vcs.iter().map(|h| h.receiver.delivered()).sum();
        let goodput = delivered as f64 * 8.0 / end.as_secs_f64() / 1e6;
        let (vbr_d, vbr_p, fb_ms, scheme) = describe(&self.cfg);
        let max_switch = self.port.max_queue_seen as u64;
        let metrics = RunMetrics {
            scenario_id: self.cfg.scenario_id.clone(),
            n_sources: self.cfg.n_sources,
            source_buffer: self.cfg.source_buffer,
            vbr_duty_cycle: vbr_d,
            vbr_period_ms: vbr_p,
            feedback_delay_ms: fb_ms,
            scheme,
            max_source_queue: self.vcs.iter().map(|h| h.source.max_queue_seen as u64).collect(),
            max_switch_queue: max_switch,
            rtt_report_cells: rtt_cells,
            max_switch_queue_rtt_fraction: max_switch as f64 / rtt_cells,
            total_tcp_goodput_mbps: goodput,
            drops_source: self.vcs.iter().map(|h| h.source.dropped).sum(),
            drops_switch: self.port.dropped,
            divergence,
            steady_state_switch_queue: self.port.mean_queue(end).unwrap_or(0.0),
        };
        RunOutput {
            conservation: self.conservation(),
            final_acr: self.acrs(),
            events: self.engine.processed(),
            timeouts: self
                .vcs
                .iter()
                .filter_map(|h| h.sender.as_ref())
                .map(|s| s.timeouts)
                .sum(),
            window: self.window,
            window_cells: self.cfg.window_cells(),
            window_maxima,
            trace: std::mem::take(&mut self.trace),
            metrics,
        }
    }

    pub fn vbr_schedule(&self) -> Option<&VbrSchedule> {
        self.vbr.as_ref()
    }
}

/// Runs one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> RunOutput {
    Simulation::new(cfg).finish()
}
