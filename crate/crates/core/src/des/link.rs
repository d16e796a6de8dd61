use crate::time::SimTime;

/// Point-to-point link parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub bandwidth_bps: u64,
    pub propagation: SimTime,
}

impl Link {
    /// `bandwidth_bps` must be positive.
    pub fn new(bandwidth_bps: u64, propagation: SimTime) -> Self {
        assert!(bandwidth_bps > 0, "link bandwidth must be positive");
        Link {
            bandwidth_bps,
            propagation,
        }
    }

    /// Time to clock `bytes` onto the wire, rounded to the nearest ns.
    pub fn serialization_time(&self, bytes: u32) -> SimTime {
        let bits = u128::from(bytes) * 8;
        let bw = u128::from(self.bandwidth_bps);
        let ns = (bits * 1_000_000_000 + bw / 2) / bw;
        SimTime::from_nanos(ns.min(u64::MAX as u128) as u64)
    }

    /// Arrival time at the far end for a packet whose first bit leaves at
    /// `departure`.
    pub fn arrival(&self, departure: SimTime, bytes: u32) -> SimTime {
        departure + self.serialization_time(bytes) + self.propagation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transmission {
    pub start: SimTime,
    /// when the transmitter is free again
    pub done: SimTime,
    pub arrival: SimTime,
}

/// One direction of a link: a transmitter that serializes one packet at a
/// time.
#[derive(Debug, Clone)]
pub struct LinkChannel {
    pub link: Link,
    busy_until: SimTime,
    pub bytes_sent: u64,
    pub packets_sent: u64,
}

impl LinkChannel {
    pub fn new(link: Link) -> Self {
        LinkChannel {
            link,
            busy_until: SimTime::ZERO,
            bytes_sent: 0,
            packets_sent: 0,
        }
    }

    pub fn is_idle(&self, now: SimTime) -> bool {
        self.busy_until <= now
    }

    pub fn busy_until(&self) -> SimTime {
        self.busy_until
    }

    /// Starts serializing at `max(now, busy_until)`.
    pub fn transmit(&mut self, now: SimTime, bytes: u32) -> Transmission {
        let start = now.max(self.busy_until);
        let done = start + self.link.serialization_time(bytes);
        self.busy_until = done;
        self.bytes_sent += u64::from(bytes);
        self.packets_sent += 1;
        Transmission {
            start,
            done,
            arrival: done + self.link.propagation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialization_arithmetic() {
        let l = Link::new(1_000_000, SimTime::ZERO);
        assert_eq!(l.serialization_time(1500), SimTime::from_millis(12));
        let ds3 = Link::new(44_736_000, SimTime::ZERO);
        // 12000 bits / 44.736 Mbps = 268.240343... us
        assert_eq!(ds3.serialization_time(1500).as_nanos(), 268_240);
    }

    #[test]
    fn propagation_adds() {
        let l = Link::new(1_000_000, SimTime::from_millis(5));
        assert_eq!(l.arrival(SimTime::from_secs(1), 1500), SimTime::from_millis(1017));
    }

    #[test]
    fn very_fast_link_is_near_instant() {
        let l = Link::new(u64::MAX, SimTime::ZERO);
        assert_eq!(l.arrival(SimTime::from_secs(3), 1500), SimTime::from_secs(3));
    }

    #[test]
    fn back_to_back_packets_serialize() {
        let mut ch = LinkChannel::new(Link::new(1_000_000, SimTime::from_millis(1)));
        let a = ch.transmit(SimTime::ZERO, 1500);
        let b = ch.transmit(SimTime::ZERO, 1500);
        assert_eq!(b.start, a.done);
        assert!(b.arrival - a.arrival >= SimTime::from_millis(12));
        assert!(!ch.is_idle(SimTime::from_millis(20)));
        assert!(ch.is_idle(SimTime::from_millis(24)));
        assert_eq!(ch.packets_sent, 2);
    }

    #[test]
    #[should_panic]
    fn zero_bandwidth_rejected() {
        Link::new(0, SimTime::ZERO);
    }
}
