use std::collections::VecDeque;

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("queue full")]
pub struct Dropped<T>(pub T);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("dequeue from empty queue")]
pub struct EmptyQueue;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dequeued<T> {
    pub item: T,
    pub wait: SimTime,
}

/// Finite FIFO with tail drop. Tracks drops and cumulative waiting time,
/// plus the time-integral of its length for mean-occupancy estimates.
#[derive(Debug, Clone)]
pub struct FifoQueue<T> {
    capacity: usize,
    contents: VecDeque<(T, SimTime)>,
    pub drop_count: u64,
    pub enqueued: u64,
    pub dequeued: u64,
    pub cumulative_wait: SimTime,
    area_ns: u128,
    last_change: SimTime,
}

impl<T> FifoQueue<T> {
    pub fn new(capacity: usize) -> Self {
        FifoQueue {
            capacity,
            contents: VecDeque::new(),
            drop_count: 0,
            enqueued: 0,
            dequeued: 0,
            cumulative_wait: SimTime::ZERO,
            area_ns: 0,
            last_change: SimTime::ZERO,
        }
    }

    pub fn unbounded() -> Self {
        Self::new(usize::MAX)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    fn account(&mut self, now: SimTime) {
        let dt = now.saturating_sub(self.last_change).as_nanos();
        self.area_ns += u128::from(dt) * self.contents.len() as u128;
        self.last_change = self.last_change.max(now);
    }

    pub fn enqueue(&mut self, item: T, now: SimTime) -> Result<(), Dropped<T>> {
        if self.contents.len() >= self.capacity {
            self.drop_count += 1;
            return Err(Dropped(item));
        }
        self.account(now);
        self.contents.push_back((item, now));
        self.enqueued += 1;
        Ok(())
    }

    pub fn dequeue(&mut self, now: SimTime) -> Result<Dequeued<T>, EmptyQueue> {
        self.account(now);
        let (item, at) = self.contents.pop_front().ok_or(EmptyQueue)?;
        let wait = now.saturating_sub(at);
        self.cumulative_wait += wait;
        self.dequeued += 1;
        Ok(Dequeued { item, wait })
    }

    pub fn mean_wait(&self) -> Option<f64> {
        (self.dequeued > 0).then(|| self.cumulative_wait.as_secs_f64() / self.dequeued as f64)
    }

    /// Time-average number of queued items over `[0, now]`.
    pub fn mean_length(&mut self, now: SimTime) -> f64 {
        self.account(now);
        if now == SimTime::ZERO {
            return 0.0;
        }
        self.area_ns as f64 / now.as_nanos() as f64
    }

    /// enqueued = dequeued + resident; drops never enter the queue.
    pub fn is_conserved(&self) -> bool {
        self.enqueued == self.dequeued + self.contents.len() as u64
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.contents.iter().map(|(t, _)| t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tail_drop_counts() {
        let mut q = FifoQueue::new(2);
        q.enqueue(1, SimTime::ZERO).unwrap();
        q.enqueue(2, SimTime::ZERO).unwrap();
        assert_eq!(q.enqueue(3, SimTime::ZERO), Err(Dropped(3)));
        assert_eq!(q.drop_count, 1);
        assert_eq!(q.len(), 2);
        assert!(q.is_conserved());
    }

    #[test]
    fn wait_accounting() {
        let mut q = FifoQueue::new(10);
        q.enqueue('a', SimTime::from_secs(1)).unwrap();
        let d = q.dequeue(SimTime::from_secs(3)).unwrap();
        assert_eq!(d.wait, SimTime::from_secs(2));
        assert_eq!(q.cumulative_wait, SimTime::from_secs(2));
        assert_eq!(q.dequeue(SimTime::from_secs(3)), Err(EmptyQueue));
    }

    #[test]
    fn immediate_service_waits_zero() {
        let mut q = FifoQueue::new(1);
        q.enqueue((), SimTime::from_secs(4)).unwrap();
        assert_eq!(q.dequeue(SimTime::from_secs(4)).unwrap().wait, SimTime::ZERO);
    }

    #[test]
    fn mean_length_integrates() {
        let mut q = FifoQueue::unbounded();
        q.enqueue(0, SimTime::from_secs(0)).unwrap();
        q.enqueue(1, SimTime::from_secs(1)).unwrap();
        q.dequeue(SimTime::from_secs(2)).unwrap();
        q.dequeue(SimTime::from_secs(3)).unwrap();
        // 1 item for 1s, 2 items for 1s, 1 item for 1s, then empty to t=4
        assert!((q.mean_length(SimTime::from_secs(4)) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn drains_in_arrival_order(ops in proptest::collection::vec(any::<bool>(), 0..300), cap in 1usize..20) {
            let mut q = FifoQueue::new(cap);
            let mut reference = std::collections::VecDeque::new();
            let mut drops = 0u64;
            for (i, push) in ops.into_iter().enumerate() {
                let now = SimTime::from_micros(i as u64);
                if push {
                    match q.enqueue(i, now) {
                        Ok(()) => reference.push_back(i),
                        Err(Dropped(x)) => { prop_assert_eq!(x, i); drops += 1; }
                    }
                } else {
                    match q.dequeue(now) {
                        Ok(d) => prop_assert_eq!(Some(d.item), reference.pop_front()),
                        Err(EmptyQueue) => prop_assert!(reference.is_empty()),
                    }
                }
                prop_assert!(q.len() <= cap);
                prop_assert!(q.is_conserved());
            }
            prop_assert_eq!(q.drop_count, drops);
            prop_assert_eq!(q.iter().copied().collect::<Vec<_>>(), reference.into_iter().collect::<Vec<_>>());
        }
    }
}
