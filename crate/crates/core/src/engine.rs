//! Deterministic discrete-event engine.
//!
//! Events are ordered by `(fire_time, sequence)`; the sequence is a global
//! insertion counter, so simultaneous events fire in the order they were
//! scheduled. Nothing in the engine is random.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::time::SimTime;

/// Handle returned by [`Engine::schedule`], used to cancel a pending event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle {
    pub fire_time: SimTime,
    pub sequence: u64,
}

struct Scheduled<E> {
    fire_time: SimTime,
    sequence: u64,
    payload: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_time == other.fire_time && self.sequence == other.sequence
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> Ord for Scheduled<E> {
    // BinaryHeap is a max-heap; invert so the earliest event is on top.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_time
            .cmp(&self.fire_time)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct Engine<E> {
    now: SimTime,
    next_sequence: u64,
    /// Sequence of the event most recently delivered at `now`.
    current_sequence: Option<u64>,
    queue: BinaryHeap<Scheduled<E>>,
    cancelled: HashSet<u64>,
    processed: u64,
}

impl<E> Default for Engine<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Engine<E> {
    pub fn new() -> Self {
        Engine {
            now: SimTime::ZERO,
            next_sequence: 0,
            current_sequence: None,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            processed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Total events delivered since construction.
    pub fn processed(&self) -> u64 {
        self.processed
    }

    /// Events waiting to fire, cancelled ones included until they surface.
    pub fn pending(&self) -> usize {
        self.queue.len() - self.cancelled.len()
    }

    /// Enqueues `payload` to fire at `at`.
    ///
    /// Panics if `at` lies before the current clock: that is a bug in the
    /// caller, and continuing would silently reorder causality.
    pub fn schedule(&mut self, at: SimTime, payload: E) -> EventHandle {
        assert!(
            at >= self.now,
            "event scheduled in the past: at {} < now {}",
            at,
            self.now
        );
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(Scheduled {
            fire_time: at,
            sequence,
            payload,
        });
        EventHandle {
            fire_time: at,
            sequence,
        }
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> EventHandle {
        self.schedule(self.now + delay, payload)
    }

    fn has_fired(&self, handle: EventHandle) -> bool {
        handle.fire_time < self.now
            || (handle.fire_time == self.now && self.current_sequence.is_some_and(|cur| handle.sequence <= cur))
    }

    /// Cancels a pending event. Cancelling one that already fired (or was
    /// already cancelled) does nothing.
    pub fn cancel(&mut self, handle: EventHandle) {
        if handle.sequence >= self.next_sequence || self.has_fired(handle) {
            return;
        }
        self.cancelled.insert(handle.sequence);
    }

    /// Pops the next live event with `fire_time <= end`, advancing the clock.
    pub fn pop_until(&mut self, end: SimTime) -> Option<(SimTime, E)> {
        loop {
            let top = self.queue.peek()?;
            if top.fire_time > end {
                return None;
            }
            let ev = self.queue.pop().expect("peeked");
            if !self.cancelled.is_empty() && self.cancelled.remove(&ev.sequence) {
                continue;
            }
            if ev.fire_time != self.now {
                self.current_sequence = None;
            }
            self.now = ev.fire_time;
            self.current_sequence = Some(ev.sequence);
            self.processed += 1;
            return Some((ev.fire_time, ev.payload));
        }
    }

    /// Moves the clock forward to `to` without delivering anything.
    pub fn advance_to(&mut self, to: SimTime) {
        if to > self.now {
            self.now = to;
            self.current_sequence = None;
        }
    }

    /// Delivers every event with `fire_time <= end` to `handler`, then parks
    /// the clock at `end`. Returns the number of events delivered.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Engine<E>, SimTime, E),
    {
        let mut count = 0;
        while let Some((t, ev)) = self.pop_until(end) {
            handler(self, t, ev);
            count += 1;
        }
        self.advance_to(end);
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    #[test]
    fn schedule_at_now_is_accepted() {
        let mut e: Engine<u32> = Engine::new();
        e.schedule(SimTime::ZERO, 1);
        assert_eq!(e.run_until(SimTime::ZERO, |_, _, _| {}), 1);
    }

    #[test]
    fn ties_fire_in_insertion_order() {
        let mut e = Engine::new();
        e.schedule(SimTime(5), 'A');
        e.schedule(SimTime(5), 'B');
        let mut seen = Vec::new();
        e.run_until(SimTime(10), |_, _, c| seen.push(c));
        assert_eq!(seen, vec!['A', 'B']);
    }

    #[test]
    #[should_panic(expected = "scheduled in the past")]
    fn scheduling_in_the_past_aborts() {
        let mut e: Engine<()> = Engine::new();
        e.advance_to(SimTime(5));
        e.schedule(SimTime(3), ());
    }

    #[test]
    fn empty_queue_parks_clock_at_end() {
        let mut e: Engine<()> = Engine::new();
        assert_eq!(e.run_until(ms(10), |_, _, _| {}), 0);
        assert_eq!(e.now(), ms(10));
    }

    #[test]
    fn events_after_end_stay_queued() {
        let mut e = Engine::new();
        e.schedule(ms(2), ());
        assert_eq!(e.run_until(ms(1), |_, _, _| {}), 0);
        assert_eq!(e.pending(), 1);
    }

    #[test]
    fn run_until_is_inclusive() {
        let mut e = Engine::new();
        for t in [1, 2, 3] {
            e.schedule(ms(t), t);
        }
        assert_eq!(e.run_until(ms(2), |_, _, _| {}), 2);
        assert_eq!(e.now(), ms(2));
    }

    #[test]
    fn cancelled_events_never_fire() {
        let mut e = Engine::new();
        let h = e.schedule(ms(1), 1);
        e.schedule(ms(2), 2);
        e.cancel(h);
        let mut seen = Vec::new();
        e.run_until(ms(5), |_, _, v| seen.push(v));
        assert_eq!(seen, vec![2]);
    }

    #[test]
    fn cancelling_fired_event_is_noop() {
        let mut e = Engine::new();
        let h = e.schedule(ms(1), 1);
        e.run_until(ms(1), |_, _, _| {});
        e.cancel(h);
        assert!(e.cancelled.is_empty());
        e.schedule(ms(2), 2);
        assert_eq!(e.run_until(ms(3), |_, _, _| {}), 1);
    }

    #[test]
    fn cancel_from_inside_handler_at_same_instant() {
        let mut e = Engine::new();
        e.schedule(ms(1), 0u32);
        let victim = e.schedule(ms(1), 1);
        let mut seen = Vec::new();
        e.run_until(ms(1), |eng, _, v| {
            if v == 0 {
                eng.cancel(victim);
            }
            seen.push(v);
        });
        assert_eq!(seen, vec![0]);
    }

    #[test]
    fn handler_can_schedule_at_current_time() {
        let mut e = Engine::new();
        e.schedule(ms(1), 0u32);
        let mut seen = Vec::new();
        e.run_until(ms(1), |eng, t, v| {
            seen.push(v);
            if v < 3 {
                eng.schedule(t, v + 1);
            }
        });
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }
}
