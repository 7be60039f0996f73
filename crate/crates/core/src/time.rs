//! Simulation clock units.
//!
//! Time is kept in integer nanoseconds. Physical quantities (km, Mbps) are
//! converted once, rounding half up, so replaying a scenario never drifts.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

/// Bits on the wire per ATM cell (53 bytes).
pub const CELL_BITS: f64 = 424.0;

/// Signal propagation delay per kilometre of fibre.
pub const NS_PER_KM: u64 = 5_000;

/// Nanoseconds since the start of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    /// Converts a fractional nanosecond count, rounding half up.
    pub fn from_nanos_f64(ns: f64) -> Self {
        debug_assert!(ns >= 0.0 && ns.is_finite(), "bad time {ns}");
        SimTime((ns + 0.5).floor() as u64)
    }

    pub fn from_millis_f64(ms: f64) -> Self {
        Self::from_nanos_f64(ms * 1e6)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        Self::from_nanos_f64(s * 1e9)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_micros_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}ms", self.as_millis_f64())
    }
}

/// Cells per second carried by a link of `mbps` megabits per second.
pub fn mbps_to_cells_per_sec(mbps: f64) -> f64 {
    mbps * 1e6 / CELL_BITS
}

pub fn cells_per_sec_to_mbps(cps: f64) -> f64 {
    cps * CELL_BITS / 1e6
}

/// Exact (fractional) time to serialize one cell at `mbps`, in nanoseconds.
pub fn cell_time_ns(mbps: f64) -> f64 {
    CELL_BITS * 1e3 / mbps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(SimTime::from_nanos_f64(2.4), SimTime(2));
        assert_eq!(SimTime::from_nanos_f64(2.5), SimTime(3));
        assert_eq!(SimTime::from_nanos_f64(2726.337), SimTime(2726));
    }

    #[test]
    fn cell_time_at_oc3() {
        let ns = cell_time_ns(155.52);
        assert!((ns - 2726.337).abs() < 1e-3, "{ns}");
        let cps = mbps_to_cells_per_sec(155.52);
        assert!((cps - 366_792.45).abs() < 0.01, "{cps}");
        assert!((cells_per_sec_to_mbps(cps) - 155.52).abs() < 1e-9);
    }
}
