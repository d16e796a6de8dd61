use proptest::prelude::*;

use transim::addressing::{
    derive_6to4_prefix, extract_6to4_v4, make_isatap_address, natpt_embed, natpt_strip, siit_mapped_prefix,
    siit_translated_prefix, siit_v4_mapped, siit_v4_translated, strip_prefix96,
};
use transim::des::{CpuOps, Link, LinkChannel, NodeCpu, Scheduler};
use transim::metrics::format_sig6;
use transim::packet::{FlowMeta, IpHeader, Ipv4Address, Ipv6Address, Ipv6Header, Ipv6Prefix, Packet, PROTO_TCP};
use transim::scenario::{parse_scenario, serialize_scenario, ScenarioConfig};
use transim::transition::{decapsulate, encapsulate, MechanismPhase};
use transim::SimTime;

fn phase() -> impl Strategy<Value = MechanismPhase> {
    prop::sample::select(MechanismPhase::ALL.to_vec())
}

proptest! {
    #[test]
    fn address_mappings_invert(raw in any::<u32>(), subnet in any::<u16>(), iid in any::<u64>()) {
        let v4 = Ipv4Address::new(raw);
        prop_assert_eq!(extract_6to4_v4(derive_6to4_prefix(v4).address(subnet, iid)), Ok(v4));
        prop_assert_eq!(strip_prefix96(siit_v4_mapped(v4), siit_mapped_prefix()), Ok(v4));
        prop_assert_eq!(strip_prefix96(siit_v4_translated(v4), siit_translated_prefix()), Ok(v4));
        let p: Ipv6Prefix = "64:ff9b::/96".parse().unwrap();
        prop_assert_eq!(natpt_strip(natpt_embed(v4, p).unwrap(), p), Ok(v4));
        prop_assert_eq!(make_isatap_address(v4).value() >> 118, 0xfe80 >> 6);
    }

    #[test]
    fn tunnel_round_trip_adds_twenty_bytes(payload in 0u32..65_000, src in any::<u128>(), dst in any::<u128>(), a in any::<u32>(), b in any::<u32>()) {
        let hdr = Ipv6Header::new(Ipv6Address::new(src), Ipv6Address::new(dst), PROTO_TCP, 64, payload);
        let p = Packet::new(IpHeader::V6(hdr), payload, FlowMeta::default(), SimTime::ZERO);
        let t = encapsulate(p.clone(), Ipv4Address::new(a), Ipv4Address::new(b)).unwrap();
        prop_assert_eq!(t.on_wire_size(), p.on_wire_size() + 20);
        prop_assert!(t.is_encapsulated());
        prop_assert_eq!(decapsulate(t).unwrap(), p);
    }

    #[test]
    fn scheduler_dispatches_in_time_then_seq_order(times in prop::collection::vec(0u64..1_000, 1..200)) {
        let mut s = Scheduler::new();
        for (i, &t) in times.iter().enumerate() {
            s.schedule(SimTime::from_nanos(t), i).unwrap();
        }
        let mut last: Option<(SimTime, u64)> = None;
        let mut seen = 0;
        while let Some((t, seq, i)) = s.pop_until(SimTime::MAX) {
            prop_assert_eq!(SimTime::from_nanos(times[i]), t);
            if let Some(prev) = last {
                prop_assert!(prev < (t, seq));
            }
            last = Some((t, seq));
            seen += 1;
        }
        prop_assert_eq!(seen, times.len());
    }

    #[test]
    fn back_to_back_arrivals_spaced_by_serialization(sizes in prop::collection::vec(20u32..1600, 2..50), bps in 1_000u64..1_000_000_000, prop_us in 0u64..10_000) {
        let link = Link::new(bps, SimTime::from_micros(prop_us));
        let mut ch = LinkChannel::new(link);
        let mut prev: Option<SimTime> = None;
        for &s in &sizes {
            let tx = ch.transmit(SimTime::ZERO, s);
            if let Some(p) = prev {
                prop_assert!(tx.arrival >= p + link.serialization_time(s));
            }
            prev = Some(tx.arrival);
        }
    }

    #[test]
    fn utilization_bounded_and_monotone_in_load(gaps in prop::collection::vec(1u64..200, 1..300), extra in 1usize..50) {
        let mk = || NodeCpu::new(SimTime::from_micros(20), SimTime::from_micros(20), SimTime::from_micros(20), SimTime::from_micros(5));
        let horizon = SimTime::from_micros(gaps.iter().sum::<u64>() + 1_000);
        let (mut light, mut heavy) = (mk(), mk());
        let mut t = 0;
        for (i, &g) in gaps.iter().enumerate() {
            t += g;
            let now = SimTime::from_micros(t);
            light.process(now, CpuOps::FORWARD);
            heavy.process(now, CpuOps::FORWARD);
            if i % extra == 0 {
                heavy.process(now, CpuOps::FORWARD.with_encap());
            }
        }
        let (u1, u2) = (light.utilization_percent(horizon), heavy.utilization_percent(horizon));
        prop_assert!((0.0..=100.0).contains(&u1) && (0.0..=100.0).contains(&u2));
        prop_assert!(u2 >= u1);
    }

    #[test]
    fn six_digit_formatting_is_close(x in -1e9f64..1e9) {
        let s = format_sig6(x);
        prop_assert!(!s.contains('e') && !s.contains('E'));
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= x.abs() * 5e-6 + 1e-12, "{} -> {}", x, s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn scenario_files_round_trip(p in phase(), seed in any::<u64>(), hosts in 1u32..200, q in 1usize..500, page in 1000u64..1_000_000, rate in prop::option::of(1u64..100)) {
        let mut cfg = ScenarioConfig::reference(p);
        cfg.run.seed = seed;
        cfg.run.data_rate = rate.map(|r| r * 1_000_000);
        cfg.topology.hosts = hosts;
        cfg.des.queue_capacity = q;
        if let transim::transport::Workload::Http(h) = &mut cfg.workload {
            h.page_size = page;
        }
        let text = serialize_scenario(&cfg);
        let back = parse_scenario(&text).unwrap();
        prop_assert_eq!(back, cfg);
        prop_assert_eq!(serialize_scenario(&back), text);
    }
}
