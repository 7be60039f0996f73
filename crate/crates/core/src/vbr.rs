//! Deterministic ON-OFF VBR background source.
//!
//! The source is silent before `start`, then alternates an ON window of
//! `d × p` and an OFF window of `(1 − d) × p`, starting ON. While ON it emits
//! cells back to back at its amplitude. Cell emission times are a closed-form
//! function of the cell index, so the switch can ask "how many VBR cells have
//! arrived by `t`" without one event per cell.

use crate::time::{cell_time_ns, SimTime};

pub const DEFAULT_AMPLITUDE_MBPS: f64 = 124.41;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VbrParams {
    pub duty_cycle: f64,
    pub period: SimTime,
    pub amplitude_mbps: f64,
    pub start: SimTime,
}

impl Default for VbrParams {
    fn default() -> Self {
        VbrParams {
            duty_cycle: 0.8,
            period: SimTime::from_millis(10),
            amplitude_mbps: DEFAULT_AMPLITUDE_MBPS,
            start: SimTime::from_millis(2),
        }
    }
}

impl VbrParams {
    pub fn on_duration_ns(&self) -> f64 {
        self.duty_cycle * self.period.as_nanos() as f64
    }

    pub fn off_duration_ns(&self) -> f64 {
        (1.0 - self.duty_cycle) * self.period.as_nanos() as f64
    }

    /// Spacing between consecutive cells while ON.
    pub fn cell_gap_ns(&self) -> f64 {
        cell_time_ns(self.amplitude_mbps)
    }
}

/// True while the source is in an ON window at `t`.
pub fn vbr_active(t: SimTime, params: &VbrParams) -> bool {
    if t < params.start {
        return false;
    }
    let rel = (t - params.start).as_nanos() % params.period.as_nanos();
    (rel as f64) < params.on_duration_ns()
}

/// Cell-level realization of a [`VbrParams`] pulse train.
#[derive(Debug, Clone)]
pub struct VbrSchedule {
    params: VbrParams,
    gap_ns: f64,
    per_window: u64,
}

impl VbrSchedule {
    pub fn new(params: VbrParams) -> Self {
        let gap_ns = params.cell_gap_ns();
        // Cells sit at k·gap for every k with k·gap < ON duration.
        let mut sched = VbrSchedule {
            params,
            gap_ns,
            per_window: (params.on_duration_ns() / gap_ns).ceil().max(1.0) as u64,
        };
        // Rounding to whole nanoseconds can push the last offset onto the
        // window edge.
        let on = params.on_duration_ns();
        while sched.per_window > 1 && sched.offset(sched.per_window - 1) as f64 >= on {
            sched.per_window -= 1;
        }
        sched
    }

    pub fn params(&self) -> &VbrParams {
        &self.params
    }

    pub fn cells_per_period(&self) -> u64 {
        self.per_window
    }

    fn offset(&self, k: u64) -> u64 {
        SimTime::from_nanos_f64(k as f64 * self.gap_ns).as_nanos()
    }

    /// Emission time of the `index`-th VBR cell (0-based).
    pub fn cell_time(&self, index: u64) -> SimTime {
        let window = index / self.per_window;
        let k = index % self.per_window;
        SimTime(self.params.start.as_nanos() + window * self.params.period.as_nanos() + self.offset(k))
    }

    /// Number of cells emitted at or before `t`.
    pub fn generated_through(&self, t: SimTime) -> u64 {
        if t < self.params.start {
            return 0;
        }
        let period = self.params.period.as_nanos();
        let rel = (t - self.params.start).as_nanos();
        let window = rel / period;
        let within = rel % period;
        // First guess from the continuous relation, then settle against the
        // rounded offsets so this agrees exactly with `cell_time`.
        let mut k = (((within as f64) + 0.5) / self.gap_ns).ceil() as u64;
        k = k.min(self.per_window);
        while k > 0 && self.offset(k - 1) > within {
            k -= 1;
        }
        while k < self.per_window && self.offset(k) <= within {
            k += 1;
        }
        window * self.per_window + k
    }

    /// Earliest VBR emission at or after `t`.
    pub fn next_cell_time(&self, t: SimTime) -> SimTime {
        if t <= self.params.start {
            return self.params.start;
        }
        let before = self.generated_through(SimTime(t.as_nanos() - 1));
        self.cell_time(before)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: f64, p_ms: u64) -> VbrParams {
        VbrParams {
            duty_cycle: d,
            period: SimTime::from_millis(p_ms),
            ..VbrParams::default()
        }
    }

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    #[test]
    fn silent_before_start() {
        let p = params(0.8, 10);
        assert!(!vbr_active(ms(1), &p));
        assert!(vbr_active(ms(2), &p));
        let s = VbrSchedule::new(p);
        assert_eq!(s.generated_through(ms(1)), 0);
        assert_eq!(s.next_cell_time(SimTime::ZERO), ms(2));
    }

    #[test]
    fn off_window_of_two_ms() {
        let p = params(0.8, 10);
        assert!(vbr_active(ms(2 + 7), &p));
        assert!(!vbr_active(ms(2 + 8), &p));
        assert!(!vbr_active(ms(2 + 9), &p));
        assert!(vbr_active(ms(2 + 10), &p));
    }

    #[test]
    fn long_on_window() {
        let p = params(0.95, 100);
        assert!(vbr_active(ms(2 + 94), &p));
        assert!(!vbr_active(ms(2 + 96), &p));
    }

    #[test]
    fn gap_at_default_amplitude() {
        // 424 bits / 124.41e6 b/s = 3408.086 ns
        let s = VbrSchedule::new(params(0.8, 10));
        let gap = s.cell_time(1) - s.cell_time(0);
        assert!((gap.as_nanos() as i64 - 3408).abs() <= 1, "{gap:?}");
    }

    #[test]
    fn saturated_amplitude_matches_link_cell_time() {
        let p = VbrParams {
            amplitude_mbps: 155.52,
            ..params(0.5, 10)
        };
        let s = VbrSchedule::new(p);
        let gap = (s.cell_time(1000) - s.cell_time(0)).as_nanos() as f64 / 1000.0;
        assert!((gap - cell_time_ns(155.52)).abs() < 0.01);
    }

    #[test]
    fn next_cell_in_off_window_is_next_on_boundary() {
        let s = VbrSchedule::new(params(0.8, 10));
        assert_eq!(s.next_cell_time(ms(2 + 9)), ms(2 + 10));
    }

    #[test]
    fn counting_agrees_with_cell_times() {
        let s = VbrSchedule::new(params(0.7, 1));
        for i in 0..2_000 {
            let t = s.cell_time(i);
            assert_eq!(s.generated_through(t), i + 1, "cell {i}");
            assert_eq!(s.generated_through(SimTime(t.as_nanos() - 1)), i);
            assert_eq!(s.next_cell_time(t), t);
        }
    }

    #[test]
    fn long_run_rate_within_one_cell_per_period() {
        for (d, p) in [(0.95, 100), (0.8, 10), (0.7, 1), (0.7, 20)] {
            let prm = params(d, p);
            let s = VbrSchedule::new(prm);
            let periods = 50u64;
            let n = s.generated_through(prm.start + SimTime(prm.period.as_nanos() * periods) - SimTime(1));
            let fluid = d * prm.period.as_nanos() as f64 / prm.cell_gap_ns() * periods as f64;
            assert!(
                (n as f64 - fluid).abs() <= periods as f64,
                "d={d} p={p}: {n} vs {fluid}"
            );
        }
    }
}
