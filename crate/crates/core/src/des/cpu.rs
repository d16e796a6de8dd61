use crate::time::SimTime;

/// Work a router performs on one packet.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct CpuOps {
    pub forward: bool,
    pub encap: bool,
    pub decap: bool,
    pub translate: bool,
    /// recursive route lookup for a configured (manual) tunnel endpoint
    pub tunnel_lookup: bool,
}

impl CpuOps {
    pub const FORWARD: CpuOps = CpuOps {
        forward: true,
        encap: false,
        decap: false,
        translate: false,
        tunnel_lookup: false,
    };

    pub fn with_encap(mut self) -> Self {
        self.encap = true;
        self
    }

    pub fn with_decap(mut self) -> Self {
        self.decap = true;
        self
    }

    pub fn with_translate(mut self) -> Self {
        self.translate = true;
        self
    }

    pub fn with_tunnel_lookup(mut self) -> Self {
        self.tunnel_lookup = true;
        self
    }
}

/// Single-server processor. Packets are served one at a time in arrival
/// order; each costs the base service time plus a surcharge per extra op.
#[derive(Debug, Clone)]
pub struct NodeCpu {
    pub base_service: SimTime,
    pub tunnel_surcharge: SimTime,
    pub translate_surcharge: SimTime,
    pub lookup_surcharge: SimTime,
    busy_time: SimTime,
    free_at: SimTime,
    pub packets: u64,
}

impl NodeCpu {
    pub fn new(
        base_service: SimTime,
        tunnel_surcharge: SimTime,
        translate_surcharge: SimTime,
        lookup_surcharge: SimTime,
    ) -> Self {
        NodeCpu {
            base_service,
            tunnel_surcharge,
            translate_surcharge,
            lookup_surcharge,
            busy_time: SimTime::ZERO,
            free_at: SimTime::ZERO,
            packets: 0,
        }
    }

    pub fn service_time(&self, ops: CpuOps) -> SimTime {
        let mut t = SimTime::ZERO;
        if ops.forward {
            t += self.base_service;
        }
        if ops.encap {
            t += self.tunnel_surcharge;
        }
        if ops.decap {
            t += self.tunnel_surcharge;
        }
        if ops.translate {
            t += self.translate_surcharge;
        }
        if ops.tunnel_lookup {
            t += self.lookup_surcharge;
        }
        t
    }

    /// Queues one packet. Returns `(service start, completion)`.
    pub fn process(&mut self, now: SimTime, ops: CpuOps) -> (SimTime, SimTime) {
        let start = now.max(self.free_at);
        let done = start + self.service_time(ops);
        self.busy_time += done - start;
        self.free_at = done;
        self.packets += 1;
        (start, done)
    }

    /// Busy time accumulated within `[0, t]`. Valid for any `t` at or after
    /// the most recent `process` call.
    pub fn busy_within(&self, t: SimTime) -> SimTime {
        self.busy_time - self.free_at.saturating_sub(t)
    }

    pub fn utilization_percent(&self, t: SimTime) -> f64 {
        if t == SimTime::ZERO {
            return 0.0;
        }
        100.0 * self.busy_within(t).as_secs_f64() / t.as_secs_f64()
    }

    pub fn free_at(&self) -> SimTime {
        self.free_at
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cpu() -> NodeCpu {
        NodeCpu::new(
            SimTime::from_micros(5),
            SimTime::from_micros(5),
            SimTime::from_micros(5),
            SimTime::from_micros(1),
        )
    }

    #[test]
    fn service_times() {
        let c = cpu();
        assert_eq!(c.service_time(CpuOps::FORWARD), SimTime::from_micros(5));
        assert_eq!(c.service_time(CpuOps::FORWARD.with_encap()), SimTime::from_micros(10));
        assert_eq!(c.service_time(CpuOps::FORWARD.with_decap()), SimTime::from_micros(10));
        assert_eq!(
            c.service_time(CpuOps::FORWARD.with_translate()),
            SimTime::from_micros(10)
        );
        assert_eq!(
            c.service_time(CpuOps::FORWARD.with_encap().with_tunnel_lookup()),
            SimTime::from_micros(11)
        );
    }

    #[test]
    fn serial_service_and_utilization() {
        let mut c = cpu();
        let (s1, d1) = c.process(SimTime::ZERO, CpuOps::FORWARD);
        let (s2, d2) = c.process(SimTime::ZERO, CpuOps::FORWARD);
        assert_eq!((s1, d1), (SimTime::ZERO, SimTime::from_micros(5)));
        assert_eq!((s2, d2), (SimTime::from_micros(5), SimTime::from_micros(10)));
        assert_eq!(c.busy_within(SimTime::from_micros(7)), SimTime::from_micros(7));
        assert!((c.utilization_percent(SimTime::from_micros(20)) - 50.0).abs() < 1e-9);
        assert!(c.busy_within(SimTime::from_micros(100)) <= SimTime::from_micros(100));
    }

    #[test]
    fn utilization_grows_with_load() {
        let horizon = SimTime::from_millis(10);
        let mut last = 0.0;
        for load in [10u64, 50, 100, 500, 1000, 4000] {
            let mut c = cpu();
            let gap = horizon.as_nanos() / load;
            for i in 0..load {
                c.process(SimTime::from_nanos(i * gap), CpuOps::FORWARD);
            }
            let u = c.utilization_percent(horizon);
            assert!((0.0..=100.0).contains(&u));
            assert!(u >= last);
            last = u;
        }
    }
}
