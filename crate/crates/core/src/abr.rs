//! ABR source and destination end-system behaviour.
//!
//! The source owns a per-VC FIFO (the edge-router buffer), shapes departures
//! to the allowed cell rate, inserts one forward RM cell per `nrm` cells, and
//! adopts the explicit rate carried back in backward RM cells. There is no
//! additive increase or binary feedback: the rate is purely ER-driven.

use std::collections::VecDeque;

use crate::time::SimTime;

pub const DEFAULT_NRM: u32 = 32;

/// Fraction of the link rate used as the ACR floor.
pub const ACR_FLOOR_FRACTION: f64 = 1e-4;

pub type VcId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmDirection {
    Forward,
    Backward,
}

/// Resource-management fields carried in an RM cell. Rates are in cells/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmFields {
    pub direction: RmDirection,
    pub er: f64,
    pub ccr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellKind {
    Data,
    /// Last cell of an AAL5 frame whose cells were all accepted at the source.
    SegmentEnd {
        seq: u64,
        len: u32,
    },
    Rm(RmFields),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub vc: VcId,
    pub kind: CellKind,
}

impl Cell {
    pub fn is_rm(&self) -> bool {
        matches!(self.kind, CellKind::Rm(_))
    }
}

/// Destination behaviour: forward RM cells are reflected unchanged.
pub fn turnaround(rm: RmFields) -> RmFields {
    debug_assert_eq!(rm.direction, RmDirection::Forward);
    RmFields {
        direction: RmDirection::Backward,
        ..rm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbrSourceParams {
    pub pcr: f64,
    pub icr: f64,
    pub acr_floor: f64,
    pub nrm: u32,
    /// `None` is an unbounded buffer.
    pub capacity: Option<usize>,
    /// Always has data to send; used to drive the switch without TCP.
    pub greedy: bool,
}

#[derive(Debug, Clone)]
pub struct AbrSource {
    pub vc: VcId,
    params: AbrSourceParams,
    acr: f64,
    queue: VecDeque<Cell>,
    cells_since_frm: u32,
    /// Earliest exact time (ns) the next cell may leave.
    next_send_ns: f64,
    last_send_ns: Option<f64>,
    pub max_queue_seen: usize,
    pub offered: u64,
    pub dropped: u64,
    pub departed_data: u64,
    pub frm_sent: u64,
}

impl AbrSource {
    pub fn new(vc: VcId, params: AbrSourceParams) -> Self {
        AbrSource {
            vc,
            params,
            acr: params.icr.clamp(params.acr_floor, params.pcr),
            queue: VecDeque::new(),
            // The first cell a source sends is an FRM.
            cells_since_frm: params.nrm - 1,
            next_send_ns: 0.0,
            last_send_ns: None,
            max_queue_seen: 0,
            offered: 0,
            dropped: 0,
            departed_data: 0,
            frm_sent: 0,
        }
    }

    pub fn params(&self) -> &AbrSourceParams {
        &self.params
    }

    pub fn acr(&self) -> f64 {
        self.acr
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    fn frm_due(&self) -> bool {
        self.cells_since_frm + 1 >= self.params.nrm
    }

    /// Whether a departure should be scheduled.
    pub fn has_work(&self) -> bool {
        self.params.greedy || !self.queue.is_empty() || self.frm_due()
    }

    fn room(&self) -> usize {
        match self.params.capacity {
            Some(cap) => cap.saturating_sub(self.queue.len()),
            None => usize::MAX,
        }
    }

    /// Appends cells with tail drop. Returns how many were accepted.
    pub fn enqueue_from_tcp<I: IntoIterator<Item = Cell>>(&mut self, cells: I) -> usize {
        let mut accepted = 0;
        for cell in cells {
            self.offered += 1;
            if self.room() == 0 {
                self.dropped += 1;
                continue;
            }
            self.queue.push_back(cell);
            accepted += 1;
        }
        self.max_queue_seen = self.max_queue_seen.max(self.queue.len());
        accepted
    }

    /// Segments a TCP segment into `cells` cells and enqueues them. The frame
    /// marker is only attached when the whole frame fits; a partial frame is
    /// garbage the receiver will discard. Returns whether the frame survived.
    pub fn enqueue_segment(&mut self, seq: u64, len: u32, cells: u64) -> bool {
        let fits = (cells as usize) <= self.room();
        let vc = self.vc;
        let frame = (0..cells).map(|i| Cell {
            vc,
            kind: if fits && i + 1 == cells {
                CellKind::SegmentEnd { seq, len }
            } else {
                CellKind::Data
            },
        });
        self.enqueue_from_tcp(frame);
        fits
    }

    /// Time the next cell may depart, given the current clock.
    pub fn next_departure(&self, now: SimTime) -> SimTime {
        let at = SimTime::from_nanos_f64(self.next_send_ns);
        at.max(now)
    }

    /// Emits the next cell at `now`. Every `nrm`-th in-rate cell is a
    /// forward RM cell stamped with the current ACR.
    pub fn next_cell_departure(&mut self, now: SimTime) -> Option<Cell> {
        let cell = if self.frm_due() {
            self.cells_since_frm = 0;
            self.frm_sent += 1;
            Cell {
                vc: self.vc,
                kind: CellKind::Rm(RmFields {
                    direction: RmDirection::Forward,
                    er: self.params.pcr,
                    ccr: self.acr,
                }),
            }
        } else {
            let cell = match self.queue.pop_front() {
                Some(c) => c,
                None if self.params.greedy => Cell {
                    vc: self.vc,
                    kind: CellKind::Data,
                },
                None => return None,
            };
            self.cells_since_frm += 1;
            self.departed_data += 1;
            cell
        };
        let sent = self.next_send_ns.max(now.as_nanos() as f64);
        self.last_send_ns = Some(sent);
        self.next_send_ns = sent + 1e9 / self.acr;
        Some(cell)
    }

    /// Adopts the explicit rate from a backward RM cell and returns the new
    /// ACR. A higher rate may pull the next departure earlier; callers holding
    /// a scheduled departure should compare against [`Self::next_departure`].
    pub fn on_brm(&mut self, rm: RmFields) -> f64 {
        debug_assert_eq!(rm.direction, RmDirection::Backward);
        self.acr = rm.er.min(self.params.pcr).max(self.params.acr_floor);
        if let Some(last) = self.last_send_ns {
            let earliest = last + 1e9 / self.acr;
            if earliest < self.next_send_ns {
                self.next_send_ns = earliest;
            }
        }
        self.acr
    }

    /// Cell conservation for this VC: offered = departed + queued + dropped.
    pub fn conserves_cells(&self) -> bool {
        self.params.greedy || self.offered == self.departed_data + self.queue.len() as u64 + self.dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINK: f64 = 366_792.452_830_188_7;

    fn source(capacity: Option<usize>) -> AbrSource {
        AbrSource::new(
            0,
            AbrSourceParams {
                pcr: LINK,
                icr: LINK,
                acr_floor: LINK * ACR_FLOOR_FRACTION,
                nrm: DEFAULT_NRM,
                capacity,
                greedy: false,
            },
        )
    }

    fn data(n: usize) -> Vec<Cell> {
        vec![
            Cell {
                vc: 0,
                kind: CellKind::Data
            };
            n
        ]
    }

    #[test]
    fn tail_drop_arithmetic() {
        let mut s = source(Some(100));
        s.enqueue_from_tcp(data(95));
        assert_eq!(s.enqueue_from_tcp(data(12)), 5);
        assert_eq!(s.dropped, 7);
        assert_eq!(s.queue_len(), 100);
        assert_eq!(s.max_queue_seen, 100);
        assert!(s.conserves_cells());
    }

    #[test]
    fn unbounded_buffer_accepts_everything() {
        let mut s = source(None);
        assert_eq!(s.enqueue_from_tcp(data(24_000)), 24_000);
        assert_eq!(s.dropped, 0);
    }

    #[test]
    fn empty_arrival_changes_nothing() {
        let mut s = source(Some(10));
        assert_eq!(s.enqueue_from_tcp(Vec::new()), 0);
        assert_eq!(s.offered, 0);
    }

    #[test]
    fn partial_frame_loses_marker() {
        let mut s = source(Some(20));
        assert!(s.enqueue_segment(0, 512, 12));
        assert!(!s.enqueue_segment(512, 512, 12));
        assert_eq!(s.queue_len(), 20);
        assert_eq!(s.dropped, 4);
        let ends = s
            .queue
            .iter()
            .filter(|c| matches!(c.kind, CellKind::SegmentEnd { .. }))
            .count();
        assert_eq!(ends, 1);
    }

    #[test]
    fn spacing_follows_acr() {
        let mut s = source(None);
        s.enqueue_from_tcp(data(10));
        let t0 = s.next_departure(SimTime::ZERO);
        s.next_cell_departure(t0);
        let t1 = s.next_departure(t0);
        // 1 / 366,792 cells/s = 2726.34 ns
        assert_eq!((t1 - t0).as_nanos(), 2726);
    }

    #[test]
    fn one_frm_per_nrm_cells() {
        let mut s = source(None);
        s.enqueue_from_tcp(data(31 * 3));
        let mut kinds = Vec::new();
        let mut now = SimTime::ZERO;
        while let Some(c) = s.next_cell_departure(now) {
            kinds.push(c.is_rm());
            now = s.next_departure(now);
            if !s.has_work() {
                break;
            }
        }
        assert!(kinds[0], "first cell is an FRM");
        let rm_positions: Vec<usize> = kinds.iter().enumerate().filter(|(_, r)| **r).map(|(i, _)| i).collect();
        assert_eq!(rm_positions, vec![0, 32, 64, 96]);
    }

    #[test]
    fn frm_carries_current_acr() {
        let mut s = source(None);
        s.on_brm(RmFields {
            direction: RmDirection::Backward,
            er: 1000.0,
            ccr: 0.0,
        });
        match s.next_cell_departure(SimTime::ZERO).unwrap().kind {
            CellKind::Rm(rm) => {
                assert_eq!(rm.ccr, 1000.0);
                assert_eq!(rm.er, LINK);
                assert_eq!(rm.direction, RmDirection::Forward);
            }
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn halving_acr_doubles_spacing() {
        let mut s = source(None);
        s.enqueue_from_tcp(data(10));
        let t0 = SimTime::ZERO;
        s.next_cell_departure(t0);
        s.on_brm(RmFields {
            direction: RmDirection::Backward,
            er: LINK / 2.0,
            ccr: 0.0,
        });
        let t1 = s.next_departure(t0);
        s.next_cell_departure(t1);
        let t2 = s.next_departure(t1);
        assert_eq!((t2 - t1).as_nanos(), 5453);
    }

    #[test]
    fn brm_rate_rules() {
        let mut s = source(None);
        assert_eq!(
            s.on_brm(RmFields {
                direction: RmDirection::Backward,
                er: LINK,
                ccr: 0.0
            }),
            LINK
        );
        assert_eq!(
            s.on_brm(RmFields {
                direction: RmDirection::Backward,
                er: 2.0 * LINK,
                ccr: 0.0
            }),
            LINK
        );
        let ten_mbps = 10e6 / 424.0;
        assert_eq!(
            s.on_brm(RmFields {
                direction: RmDirection::Backward,
                er: ten_mbps,
                ccr: 0.0
            }),
            ten_mbps
        );
        let floor = LINK * ACR_FLOOR_FRACTION;
        assert_eq!(
            s.on_brm(RmFields {
                direction: RmDirection::Backward,
                er: 0.0,
                ccr: 0.0
            }),
            floor
        );
    }

    #[test]
    fn raised_acr_pulls_next_departure_earlier() {
        let mut s = source(None);
        s.on_brm(RmFields {
            direction: RmDirection::Backward,
            er: 100.0,
            ccr: 0.0,
        });
        s.enqueue_from_tcp(data(5));
        s.next_cell_departure(SimTime::ZERO);
        assert_eq!(s.next_departure(SimTime::ZERO), SimTime::from_millis(10));
        s.on_brm(RmFields {
            direction: RmDirection::Backward,
            er: LINK,
            ccr: 0.0,
        });
        assert_eq!(s.next_departure(SimTime::ZERO).as_nanos(), 2726);
    }

    #[test]
    fn turnaround_is_identity_on_rates() {
        let f = RmFields {
            direction: RmDirection::Forward,
            er: LINK,
            ccr: 1234.0,
        };
        let b = turnaround(f);
        assert_eq!(b.direction, RmDirection::Backward);
        assert_eq!((b.er, b.ccr), (f.er, f.ccr));
    }
}
