//! Bulk-transfer TCP sender and receiver.
//!
//! Slow start, congestion avoidance, coarse-grained retransmission timeout
//! with exponential backoff, and go-back-N recovery. There is no fast
//! retransmit, no delayed ACK and no handshake: connections exist at t = 0
//! and the application always has data.

use std::collections::BTreeMap;

use crate::time::SimTime;

/// TCP, IP, LLC/SNAP and AAL5 overhead added to every segment.
pub const ENCAP_OVERHEAD_BYTES: u64 = 56;
pub const CELL_PAYLOAD_BYTES: u64 = 48;
/// Cells occupied by one ACK on the reverse path.
pub const ACK_CELLS: u64 = 2;

/// Cells needed to carry a segment with `payload_bytes` of TCP data.
pub fn segment_to_cells(payload_bytes: u64) -> u64 {
    (payload_bytes + ENCAP_OVERHEAD_BYTES).div_ceil(CELL_PAYLOAD_BYTES)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpParams {
    pub mss_bytes: u32,
    pub window_scale: u8,
    pub timer_granularity: SimTime,
    /// RTO used before the first RTT sample.
    pub initial_rto: SimTime,
    pub max_rto: SimTime,
}

impl Default for TcpParams {
    fn default() -> Self {
        TcpParams {
            mss_bytes: 512,
            window_scale: 4,
            timer_granularity: SimTime::from_millis(100),
            initial_rto: SimTime::from_secs(1),
            max_rto: SimTime::from_secs(64),
        }
    }
}

impl TcpParams {
    pub fn mss(&self) -> u64 {
        self.mss_bytes as u64
    }

    /// Largest advertisable receive window: 2^scale × 64 kB.
    pub fn max_rcv_window(&self) -> u64 {
        65_536u64 << self.window_scale
    }

    pub fn max_window_cells(&self) -> u64 {
        self.max_rcv_window() / self.mss() * segment_to_cells(self.mss())
    }
}

/// `srtt + 4·rttvar`, rounded up to whole timer ticks and clamped to
/// `[2 ticks, max]`.
pub fn rto_from_estimates(srtt: SimTime, rttvar: SimTime, granularity: SimTime, max: SimTime) -> SimTime {
    let raw = srtt.as_nanos() + 4 * rttvar.as_nanos();
    let tick = granularity.as_nanos().max(1);
    let ticks = raw.div_ceil(tick).max(2);
    SimTime(ticks * tick).min(max)
}

/// A data segment on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub seq: u64,
    pub len: u32,
    pub sent_at: SimTime,
    pub retransmission: bool,
}

impl Segment {
    pub fn end(&self) -> u64 {
        self.seq + self.len as u64
    }
}

/// What the retransmission timer should do after a sender state change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerCmd {
    Keep,
    Restart,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckEffect {
    /// Cumulative ACK did not advance `snd_una`.
    Stale,
    NewData {
        bytes: u64,
        timer: TimerCmd,
    },
}

#[derive(Debug, Clone)]
pub struct TcpSender {
    params: TcpParams,
    pub snd_una: u64,
    pub snd_nxt: u64,
    pub snd_max: u64,
    pub cwnd: u64,
    pub ssthresh: u64,
    /// Window advertised by the peer.
    pub rcv_window: u64,
    srtt: Option<SimTime>,
    rttvar: SimTime,
    pub rto: SimTime,
    /// Segment currently timed for an RTT sample: (end sequence, send time).
    timing: Option<(u64, SimTime)>,
    pub timeouts: u64,
    pub retransmitted_segments: u64,
}

impl TcpSender {
    pub fn new(params: TcpParams) -> Self {
        TcpSender {
            params,
            snd_una: 0,
            snd_nxt: 0,
            snd_max: 0,
            cwnd: params.mss(),
            ssthresh: params.max_rcv_window(),
            rcv_window: params.max_rcv_window(),
            srtt: None,
            rttvar: SimTime::ZERO,
            rto: params.initial_rto,
            timing: None,
            timeouts: 0,
            retransmitted_segments: 0,
        }
    }

    pub fn params(&self) -> &TcpParams {
        &self.params
    }

    pub fn in_flight(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    pub fn srtt(&self) -> Option<SimTime> {
        self.srtt
    }

    pub fn rttvar(&self) -> SimTime {
        self.rttvar
    }

    pub fn usable_window(&self) -> u64 {
        self.cwnd.min(self.rcv_window).saturating_sub(self.in_flight())
    }

    pub fn has_outstanding(&self) -> bool {
        self.snd_una < self.snd_max
    }

    /// Emits every full-sized segment the window currently allows.
    pub fn on_send_opportunity(&mut self, now: SimTime) -> Vec<Segment> {
        let mss = self.params.mss();
        let mut out = Vec::new();
        while self.usable_window() >= mss {
            let seq = self.snd_nxt;
            let retransmission = seq < self.snd_max;
            if retransmission {
                self.retransmitted_segments += 1;
            } else if self.timing.is_none() {
                self.timing = Some((seq + mss, now));
            }
            out.push(Segment {
                seq,
                len: self.params.mss_bytes,
                sent_at: now,
                retransmission,
            });
            self.snd_nxt += mss;
            self.snd_max = self.snd_max.max(self.snd_nxt);
        }
        out
    }

    pub fn on_ack(&mut self, ack: u64, now: SimTime) -> AckEffect {
        if ack <= self.snd_una || ack > self.snd_max {
            return AckEffect::Stale;
        }
        let acked = ack - self.snd_una;
        self.snd_una = ack;
        if self.snd_nxt < ack {
            // The receiver already held data we were about to resend.
            self.snd_nxt = ack;
        }

        if let Some((end, sent)) = self.timing {
            if ack >= end {
                self.timing = None;
                self.rtt_sample(now - sent);
            }
        }

        let mss = self.params.mss();
        if self.cwnd < self.ssthresh {
            self.cwnd += mss;
        } else {
            self.cwnd += (mss * mss / self.cwnd).max(1);
        }
        self.cwnd = self.cwnd.min(self.params.max_rcv_window());

        let timer = if self.snd_una == self.snd_max {
            TimerCmd::Stop
        } else {
            TimerCmd::Restart
        };
        AckEffect::NewData { bytes: acked, timer }
    }

    fn rtt_sample(&mut self, rtt: SimTime) {
        match self.srtt {
            None => {
                self.srtt = Some(rtt);
                self.rttvar = SimTime(rtt.as_nanos() / 2);
            }
            Some(srtt) => {
                let s = srtt.as_nanos() as i64;
                let r = rtt.as_nanos() as i64;
                let err = r - s;
                let var = self.rttvar.as_nanos() as i64;
                self.rttvar = SimTime((var + (err.abs() - var) / 4) as u64);
                self.srtt = Some(SimTime((s + err / 8) as u64));
            }
        }
        self.rto = rto_from_estimates(
            self.srtt.expect("set above"),
            self.rttvar,
            self.params.timer_granularity,
            self.params.max_rto,
        );
    }

    /// Retransmission timeout: collapse the window and go back to `snd_una`.
    pub fn on_timeout(&mut self) {
        let mss = self.params.mss();
        self.timeouts += 1;
        self.ssthresh = (self.cwnd / 2).max(2 * mss);
        self.cwnd = mss;
        self.snd_nxt = self.snd_una;
        self.timing = None;
        self.rto = SimTime(self.rto.as_nanos() * 2).min(self.params.max_rto);
    }
}

#[derive(Debug, Clone, Default)]
pub struct TcpReceiver {
    pub rcv_nxt: u64,
    /// Out-of-order data held for reassembly: start -> end.
    held: BTreeMap<u64, u64>,
    pub segments_received: u64,
    pub duplicate_segments: u64,
}

impl TcpReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bytes delivered in order to the application.
    pub fn delivered(&self) -> u64 {
        self.rcv_nxt
    }

    pub fn held_ranges(&self) -> usize {
        self.held.len()
    }

    /// Accepts a data segment and returns the cumulative ACK to send back.
    pub fn on_segment_arrival(&mut self, seq: u64, len: u32) -> u64 {
        self.segments_received += 1;
        let end = seq + len as u64;
        if end <= self.rcv_nxt {
            self.duplicate_segments += 1;
            return self.rcv_nxt;
        }
        if seq <= self.rcv_nxt {
            self.rcv_nxt = end;
            // Absorb held ranges that are now contiguous.
            while let Some((&start, &stop)) = self.held.first_key_value() {
                if start > self.rcv_nxt {
                    break;
                }
                self.held.pop_first();
                self.rcv_nxt = self.rcv_nxt.max(stop);
            }
        } else {
            let slot = self.held.entry(seq).or_insert(end);
            *slot = (*slot).max(end);
        }
        self.rcv_nxt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MSS: u64 = 512;

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    #[test]
    fn encapsulation() {
        assert_eq!(segment_to_cells(512), 12);
        assert_eq!(segment_to_cells(0), 2);
        let p = TcpParams::default();
        assert_eq!(p.max_rcv_window(), 1_048_576);
        assert_eq!(p.max_window_cells(), 24_576);
    }

    #[test]
    fn first_opportunity_sends_one_segment() {
        let mut s = TcpSender::new(TcpParams::default());
        let segs = s.on_send_opportunity(SimTime::ZERO);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].seq, 0);
        assert!(s.on_send_opportunity(SimTime::ZERO).is_empty());
    }

    #[test]
    fn window_arithmetic() {
        let mut s = TcpSender::new(TcpParams::default());
        s.cwnd = 4 * MSS;
        s.snd_nxt = MSS;
        s.snd_max = MSS;
        assert_eq!(s.on_send_opportunity(SimTime::ZERO).len(), 3);
        assert_eq!(s.usable_window(), 0);
    }

    #[test]
    fn slow_start_grows_one_mss_per_ack() {
        let mut s = TcpSender::new(TcpParams::default());
        s.cwnd = 2 * MSS;
        s.on_send_opportunity(SimTime::ZERO);
        let eff = s.on_ack(MSS, ms(30));
        assert_eq!(
            eff,
            AckEffect::NewData {
                bytes: MSS,
                timer: TimerCmd::Restart
            }
        );
        assert_eq!(s.cwnd, 3 * MSS);
    }

    #[test]
    fn congestion_avoidance_increment() {
        let mut s = TcpSender::new(TcpParams::default());
        s.cwnd = 100 * MSS;
        s.ssthresh = 100 * MSS;
        s.on_send_opportunity(SimTime::ZERO);
        s.on_ack(MSS, ms(30));
        assert_eq!(s.cwnd, 100 * MSS + MSS / 100);
    }

    #[test]
    fn stale_ack_changes_nothing() {
        let mut s = TcpSender::new(TcpParams::default());
        s.cwnd = 4 * MSS;
        s.on_send_opportunity(SimTime::ZERO);
        s.on_ack(MSS, ms(30));
        let before = s.clone();
        assert_eq!(s.on_ack(MSS, ms(31)), AckEffect::Stale);
        assert_eq!(s.cwnd, before.cwnd);
        assert_eq!(s.snd_una, before.snd_una);
    }

    #[test]
    fn all_acked_stops_timer() {
        let mut s = TcpSender::new(TcpParams::default());
        s.on_send_opportunity(SimTime::ZERO);
        assert_eq!(
            s.on_ack(MSS, ms(30)),
            AckEffect::NewData {
                bytes: MSS,
                timer: TimerCmd::Stop
            }
        );
    }

    #[test]
    fn timeout_halves_into_ssthresh() {
        let mut s = TcpSender::new(TcpParams::default());
        s.cwnd = 24 * MSS;
        s.on_send_opportunity(SimTime::ZERO);
        s.rto = ms(200);
        s.on_timeout();
        assert_eq!(s.ssthresh, 12 * MSS);
        assert_eq!(s.cwnd, MSS);
        assert_eq!(s.snd_nxt, s.snd_una);
        assert_eq!(s.rto, ms(400));
    }

    #[test]
    fn timeout_floor_is_two_segments() {
        let mut s = TcpSender::new(TcpParams::default());
        s.on_send_opportunity(SimTime::ZERO);
        s.on_timeout();
        assert_eq!(s.ssthresh, 2 * MSS);
    }

    #[test]
    fn backoff_caps_at_64_seconds() {
        let mut s = TcpSender::new(TcpParams::default());
        s.on_send_opportunity(SimTime::ZERO);
        for _ in 0..20 {
            s.on_timeout();
        }
        assert_eq!(s.rto, SimTime::from_secs(64));
    }

    #[test]
    fn go_back_n_resends_from_snd_una() {
        let mut s = TcpSender::new(TcpParams::default());
        s.cwnd = 4 * MSS;
        s.on_send_opportunity(SimTime::ZERO);
        s.on_timeout();
        let again = s.on_send_opportunity(ms(1000));
        assert_eq!(again.len(), 1);
        assert_eq!(again[0].seq, 0);
        assert!(again[0].retransmission);
        // Receiver already had segments 1..4; the cumulative ACK jumps.
        s.on_ack(4 * MSS, ms(1030));
        assert_eq!(s.snd_nxt, 4 * MSS);
        assert_eq!(s.snd_una, 4 * MSS);
    }

    #[test]
    fn karn_skips_retransmitted_samples() {
        let mut s = TcpSender::new(TcpParams::default());
        s.on_send_opportunity(SimTime::ZERO);
        s.on_timeout();
        s.on_send_opportunity(ms(1000));
        s.on_ack(MSS, ms(1030));
        assert!(s.srtt().is_none());
    }

    #[test]
    fn first_sample_sets_estimates() {
        let mut s = TcpSender::new(TcpParams::default());
        s.on_send_opportunity(SimTime::ZERO);
        s.on_ack(MSS, ms(30));
        assert_eq!(s.srtt(), Some(ms(30)));
        assert_eq!(s.rttvar(), ms(15));
        // 30 + 60 = 90 ms -> one tick -> clamped to two ticks
        assert_eq!(s.rto, ms(200));
    }

    #[test]
    fn rto_clamp_chain() {
        let g = ms(100);
        let max = SimTime::from_secs(64);
        assert_eq!(rto_from_estimates(ms(30), ms(5), g, max), ms(200));
        assert_eq!(rto_from_estimates(ms(350), ms(50), g, max), ms(600));
        assert_eq!(rto_from_estimates(ms(120), ms(20), g, max), ms(200));
        assert_eq!(
            rto_from_estimates(SimTime::from_secs(60), SimTime::from_secs(10), g, max),
            max
        );
    }

    #[test]
    fn receiver_in_order() {
        let mut r = TcpReceiver::new();
        assert_eq!(r.on_segment_arrival(0, 512), 512);
        assert_eq!(r.delivered(), 512);
    }

    #[test]
    fn receiver_gap_then_fill() {
        let mut r = TcpReceiver::new();
        assert_eq!(r.on_segment_arrival(512, 512), 0);
        assert_eq!(r.on_segment_arrival(1024, 512), 0);
        assert_eq!(r.held_ranges(), 2);
        assert_eq!(r.on_segment_arrival(0, 512), 1536);
        assert_eq!(r.held_ranges(), 0);
    }

    #[test]
    fn receiver_duplicate() {
        let mut r = TcpReceiver::new();
        r.on_segment_arrival(0, 512);
        assert_eq!(r.on_segment_arrival(0, 512), 512);
        assert_eq!(r.duplicate_segments, 1);
        assert_eq!(r.delivered(), 512);
    }
}
