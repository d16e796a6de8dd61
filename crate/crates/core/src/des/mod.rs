//! Deterministic discrete-event engine.
//!
//! Events are ordered by `(time, seq)` where `seq` is the insertion
//! counter, so simultaneous events fire in the order they were scheduled.

mod cpu;
mod link;
mod queue;

pub use cpu::{CpuOps, NodeCpu};
pub use link::{Link, LinkChannel, Transmission};
pub use queue::{Dequeued, Dropped, EmptyQueue, FifoQueue};

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("event scheduled at {at} but the clock is already at {now}")]
pub struct SchedulingError {
    pub at: SimTime,
    pub now: SimTime,
}

struct Entry<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Clock plus pending-event queue.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<E>>,
    dispatched: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Returns the sequence number assigned to the event.
    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<u64, SchedulingError> {
        if at < self.now {
            return Err(SchedulingError { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { time: at, seq, event });
        Ok(seq)
    }

    /// Schedules relative to the current clock; never fails.
    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> u64 {
        let at = self.now + delay;
        self.schedule(at, event)
            .expect("relative schedule is never in the past")
    }

    /// Pops the next event if it fires no later than `t_end`, advancing
    /// the clock to it.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, u64, E)> {
        if self.heap.peek()?.time > t_end {
            return None;
        }
        let e = self.heap.pop()?;
        debug_assert!(e.time >= self.now);
        self.now = e.time;
        self.dispatched += 1;
        Some((e.time, e.seq, e.event))
    }

    /// Dispatches every event with time `<= t_end` to `handler`, then parks
    /// the clock at `t_end`. Returns the number of events dispatched.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        let start = self.dispatched;
        while let Some((t, _, ev)) = self.pop_until(t_end) {
            handler(self, t, ev);
        }
        if t_end > self.now {
            self.now = t_end;
        }
        self.dispatched - start
    }

    /// Like [`run_until`](Self::run_until) but also returns the dispatch
    /// trace as `(time, seq)` pairs.
    pub fn run_traced<F>(&mut self, t_end: SimTime, mut handler: F) -> Vec<(SimTime, u64)>
    where
        F: FnMut(&mut Self, SimTime, E),
    {
        let mut trace = Vec::new();
        while let Some((t, seq, ev)) = self.pop_until(t_end) {
            trace.push((t, seq));
            handler(self, t, ev);
        }
        if t_end > self.now {
            self.now = t_end;
        }
        trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispatches_in_time_order() {
        let mut s = Scheduler::new();
        for t in [3u64, 1, 2] {
            s.schedule(SimTime::from_secs(t), t).unwrap();
        }
        let mut seen = Vec::new();
        s.run_until(SimTime::from_secs(10), |_, _, e| seen.push(e));
        assert_eq!(seen, vec![1, 2, 3]);
    }

    #[test]
    fn ties_break_by_schedule_order() {
        let mut s = Scheduler::new();
        for name in ["a", "b", "c"] {
            s.schedule(SimTime::from_secs(5), name).unwrap();
        }
        let mut seen = Vec::new();
        s.run_until(SimTime::from_secs(5), |_, _, e| seen.push(e));
        assert_eq!(seen, vec!["a", "b", "c"]);
    }

    #[test]
    fn empty_run_parks_clock() {
        let mut s: Scheduler<()> = Scheduler::new();
        assert_eq!(s.run_until(SimTime::from_secs(7), |_, _, _| {}), 0);
        assert_eq!(s.now(), SimTime::from_secs(7));
    }

    #[test]
    fn stops_before_later_events() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(1), 1).unwrap();
        s.schedule(SimTime::from_secs(9), 9).unwrap();
        let n = s.run_until(SimTime::from_secs(5), |_, _, _| {});
        assert_eq!(n, 1);
        assert_eq!(s.pending(), 1);
        assert_eq!(s.now(), SimTime::from_secs(5));
    }

    #[test]
    fn past_scheduling_is_an_error() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(2), ()).unwrap();
        s.run_until(SimTime::from_secs(2), |_, _, _| {});
        let err = s.schedule(SimTime::from_secs(1), ()).unwrap_err();
        assert_eq!(err.now, SimTime::from_secs(2));
    }

    #[test]
    fn handler_can_schedule_follow_ups() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::ZERO, 0u32).unwrap();
        let mut fired = Vec::new();
        s.run_until(SimTime::from_secs(10), |s, t, n| {
            fired.push((t, n));
            if n < 3 {
                s.schedule_in(SimTime::from_secs(2), n + 1);
            }
        });
        assert_eq!(
            fired,
            vec![
                (SimTime::from_secs(0), 0),
                (SimTime::from_secs(2), 1),
                (SimTime::from_secs(4), 2),
                (SimTime::from_secs(6), 3)
            ]
        );
    }

    #[test]
    fn replay_is_identical() {
        let build = || {
            let mut s = Scheduler::new();
            for (i, t) in [5u64, 1, 5, 3, 1, 8].into_iter().enumerate() {
                s.schedule(SimTime::from_millis(t), i).unwrap();
            }
            s
        };
        let a = build().run_traced(SimTime::from_secs(1), |_, _, _| {});
        let b = build().run_traced(SimTime::from_secs(1), |_, _, _| {});
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }
}
