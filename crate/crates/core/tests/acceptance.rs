//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! and then asserts. The line goes straight to stdout, past the test
//! harness capture, so a plain `cargo test` shows the full table.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use transim::addressing::{
    derive_6to4_prefix, extract_6to4_v4, make_isatap_address, natpt_embed, natpt_strip, siit_mapped_prefix,
    siit_translated_prefix, siit_v4_mapped, siit_v4_translated, strip_prefix96,
};
use transim::des::{FifoQueue, Link, LinkChannel, Scheduler};
use transim::metrics::{self, MetricsReport, CPU_UTILIZATION, PAGE_RESPONSE, QUEUE_DELAY, TCP_DELAY};
use transim::packet::{Ipv4Address, Ipv4Header, Ipv6Prefix};
use transim::scenario::{NodeId, NodeKind, ScenarioConfig, Topology};
use transim::sim::{ProbeOutcome, RunResult, Simulation};
use transim::transition::{IpVersion, MechanismPhase};
use transim::transport::{FtpTransfer, Workload};
use transim::SimTime;

const SEED: u64 = 7;

fn report_line(n: u8, name: &str, pass: bool, detail: impl std::fmt::Display) {
    let line = format!("[{n:>2}] {} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes())
        .and_then(|()| out.flush())
        .expect("stdout");
}

/// The reference web-browsing runs, one per phase, shared by several checks.
fn reference_runs() -> &'static [(RunResult, MetricsReport)] {
    static RUNS: OnceLock<Vec<(RunResult, MetricsReport)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        MechanismPhase::ALL
            .iter()
            .map(|&p| {
                let mut cfg = ScenarioConfig::reference(p);
                cfg.run.seed = SEED;
                let t = Instant::now();
                let run = Simulation::new(cfg).unwrap().run();
                println!("     {p} reference run: {:.1} s wall", t.elapsed().as_secs_f64());
                let rep = metrics::aggregate(&run, true);
                (run, rep)
            })
            .collect()
    })
}

fn phase_mean(phase: MechanismPhase, metric: &str) -> f64 {
    reference_runs()
        .iter()
        .find(|(r, _)| r.phase == phase)
        .and_then(|(_, rep)| rep.mean(metric))
        .unwrap_or_else(|| panic!("{phase} has no {metric} samples"))
}

const NATIVE: [MechanismPhase; 3] = [MechanismPhase::Ipv4, MechanismPhase::Ipv6, MechanismPhase::DualStack];

fn means(metric: &str) -> String {
    MechanismPhase::ALL
        .iter()
        .map(|&p| format!("{p}={:.6}", phase_mean(p, metric)))
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------------------

/// Ones'-complement sum taken one byte at a time, high and low lanes kept
/// apart until the end.
fn reference_checksum(bytes: &[u8]) -> u16 {
    let (mut hi, mut lo) = (0u64, 0u64);
    for (i, &b) in bytes.iter().enumerate() {
        if i % 2 == 0 {
            hi += u64::from(b);
        } else {
            lo += u64::from(b);
        }
    }
    let mut sum = (hi << 8) + lo;
    while sum >> 16 != 0 {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

fn serialize_by_hand(h: &Ipv4Header, with_checksum: bool) -> Vec<u8> {
    let mut v = vec![0x45, h.type_of_service];
    v.extend(h.total_length.to_be_bytes());
    v.extend(h.identification.to_be_bytes());
    v.extend(((u16::from(h.flags) << 13) | h.fragment_offset).to_be_bytes());
    v.push(h.ttl);
    v.push(h.protocol);
    v.extend(if with_checksum { h.header_checksum } else { 0 }.to_be_bytes());
    v.extend(h.src.value().to_be_bytes());
    v.extend(h.dst.value().to_be_bytes());
    v
}

fn boundary_addresses() -> Vec<u32> {
    const EDGES: [u32; 10] = [0, 127, 128, 191, 192, 223, 224, 239, 240, 255];
    let mut out = Vec::new();
    for a in EDGES {
        for b in [0, 1, 254, 255] {
            for d in [0, 1, 254, 255] {
                out.push(a << 24 | b << 16 | b << 8 | d);
            }
        }
    }
    out
}

#[test]
fn protocol_math_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut addrs: Vec<u32> = (0..100_000).map(|_| rng.gen()).collect();
    addrs.extend(boundary_addresses());
    let natpt: Ipv6Prefix = "64:ff9b::/96".parse().unwrap();
    let mut failures = 0usize;
    for &raw in &addrs {
        let v4 = Ipv4Address::new(raw);
        let prefix = derive_6to4_prefix(v4);
        let host = prefix.address(0xa, 1);
        let ok_6to4 = host.value() >> 112 == 0x2002
            && ((host.value() >> 80) & 0xffff_ffff) as u32 == raw
            && extract_6to4_v4(host) == Ok(v4);
        let isatap = make_isatap_address(v4).value();
        let ok_isatap =
            isatap >> 64 == 0xfe80_0000_0000_0000 && (isatap >> 32) & 0xffff_ffff == 0x5efe && isatap as u32 == raw;
        let mapped = siit_v4_mapped(v4);
        let translated = siit_v4_translated(v4);
        let ok_siit = mapped.value() == (0xffffu128 << 32 | u128::from(raw))
            && translated.value() == (0xffffu128 << 48 | u128::from(raw))
            && strip_prefix96(mapped, siit_mapped_prefix()) == Ok(v4)
            && strip_prefix96(translated, siit_translated_prefix()) == Ok(v4);
        let embedded = natpt_embed(v4, natpt).unwrap();
        let ok_natpt =
            embedded.value() == (0x0064_ff9bu128 << 96 | u128::from(raw)) && natpt_strip(embedded, natpt) == Ok(v4);
        failures += usize::from(!(ok_6to4 && ok_isatap && ok_siit && ok_natpt));
    }

    let mut bad_checksums = 0usize;
    let headers = 10_000;
    for _ in 0..headers {
        let mut h = Ipv4Header::new(
            Ipv4Address::new(rng.gen()),
            Ipv4Address::new(rng.gen()),
            rng.gen(),
            rng.gen(),
            rng.gen_range(0..60_000),
        );
        h.type_of_service = rng.gen();
        h.identification = rng.gen();
        h.flags = rng.gen_range(0..8);
        h.fragment_offset = rng.gen_range(0..8192);
        h.refresh_checksum();
        let expect = reference_checksum(&serialize_by_hand(&h, false));
        let verifies = reference_checksum(&serialize_by_hand(&h, true)) == 0;
        bad_checksums += usize::from(h.header_checksum != expect || !verifies || !h.verify_checksum());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0 && bad_checksums == 0 && secs < 10.0;
    report_line(
        1,
        "protocol math oracles",
        pass,
        format!(
            "{} addresses, {failures} mismatches; {headers} headers, {bad_checksums} checksum mismatches; {secs:.2} s",
            addrs.len()
        ),
    );
    assert!(pass);
}

#[test]
fn encapsulation_overhead_is_exactly_twenty_bytes() {
    let mut detail = Vec::new();
    let mut pass = true;
    for phase in [MechanismPhase::SixToFour, MechanismPhase::ManualTunnel] {
        let (run, _) = reference_runs().iter().find(|(r, _)| r.phase == phase).unwrap();
        let c = run.counters;
        pass &= c.tunneled_packets > 0 && c.decapsulated_packets > 0 && c.overhead_violations == 0;
        detail.push(format!(
            "{phase}: {} encapsulated, {} decapsulated, {} violations",
            c.tunneled_packets, c.decapsulated_packets, c.overhead_violations
        ));
    }
    report_line(2, "tunnel overhead 20 bytes", pass, detail.join("; "));
    assert!(pass);
}

#[test]
fn tcp_delay_ordering() {
    use MechanismPhase::*;
    let (m, s) = (phase_mean(ManualTunnel, TCP_DELAY), phase_mean(SixToFour, TCP_DELAY));
    let natives: Vec<f64> = NATIVE.iter().map(|&p| phase_mean(p, TCP_DELAY)).collect();
    let best = natives.iter().copied().fold(f64::INFINITY, f64::min);
    let worst = natives.iter().copied().fold(0.0, f64::max);
    let margin = m.min(s) / best - 1.0;
    let pass = m > s && s > worst && margin >= 0.10;
    report_line(
        3,
        "tcp delay manual > 6to4 > native, margin >= 10%",
        pass,
        format!(
            "{}; tunnel vs best native {:+.1}%, vs worst native {:+.1}%",
            means(TCP_DELAY),
            100.0 * margin,
            100.0 * (m.min(s) / worst - 1.0)
        ),
    );
    assert!(pass);
}

#[test]
fn cpu_utilization_ordering() {
    use MechanismPhase::*;
    let (m, s) = (
        phase_mean(ManualTunnel, CPU_UTILIZATION),
        phase_mean(SixToFour, CPU_UTILIZATION),
    );
    let worst = NATIVE
        .iter()
        .map(|&p| phase_mean(p, CPU_UTILIZATION))
        .fold(0.0, f64::max);
    let ratio = m / phase_mean(Ipv4, CPU_UTILIZATION);
    let pass = m > s && s > worst && (1.5..=3.0).contains(&ratio);
    report_line(
        4,
        "cpu manual > 6to4 > native, ratio in [1.5, 3]",
        pass,
        format!("{}; manual/ipv4 {ratio:.3}", means(CPU_UTILIZATION)),
    );
    assert!(pass);
}

#[test]
fn page_response_ordering() {
    use MechanismPhase::*;
    let tunnel = phase_mean(ManualTunnel, PAGE_RESPONSE).min(phase_mean(SixToFour, PAGE_RESPONSE));
    let pass = NATIVE.iter().all(|&p| phase_mean(p, PAGE_RESPONSE) < tunnel);
    report_line(5, "page response native < tunnels", pass, means(PAGE_RESPONSE));
    assert!(pass);
}

#[test]
fn ftp_throughput_rises_with_rate() {
    let rates = [1_000_000u64, 2_000_000, 5_000_000];
    let mut pass = true;
    let mut detail = Vec::new();
    for phase in MechanismPhase::ALL {
        let mut prev = 0.0;
        let mut row = Vec::new();
        for rate in rates {
            let mut cfg = ScenarioConfig::reference(phase);
            cfg.run.seed = SEED;
            cfg.run.data_rate = Some(rate);
            cfg.workload = Workload::Ftp(FtpTransfer::bulk_download());
            let run = Simulation::new(cfg).unwrap().run();
            let rep = metrics::aggregate(&run, true);
            let bytes_per_s = rep.mean(&rep.throughput_metric()).unwrap_or(0.0);
            let capacity = rate as f64 / 8.0;
            pass &= bytes_per_s > prev && bytes_per_s <= capacity && run.bottleneck_bps == rate;
            prev = bytes_per_s;
            row.push(format!("{:.0}", bytes_per_s));
        }
        detail.push(format!("{phase} {}", row.join("<")));
    }
    report_line(
        6,
        "ftp throughput 1M < 2M < 5M within capacity (B/s)",
        pass,
        detail.join("; "),
    );
    assert!(pass);
}

#[test]
fn queue_delay_and_retransmission_accounting() {
    use MechanismPhase::*;
    let (v4, v6) = (phase_mean(Ipv4, QUEUE_DELAY), phase_mean(Ipv6, QUEUE_DELAY));
    let mut pass = v4 <= v6;
    let mut detail = vec![format!("queue delay ipv4={v4:.6} ipv6={v6:.6}")];
    for (run, _) in reference_runs() {
        let c = run.counters;
        let one_each = c.signaled_losses() == c.retransmissions_scheduled
            && c.retransmissions_idle == 0
            && c.retransmissions_sent + run.retransmissions_pending == c.retransmissions_scheduled
            && run.conservation_ok;
        pass &= one_each;
        detail.push(format!(
            "{}: drops {} retransmissions {}+{} pending",
            run.phase, c.drops, c.retransmissions_sent, run.retransmissions_pending
        ));
    }
    let ipv4_drops = reference_runs()[0].0.counters.drops;
    pass &= ipv4_drops > 0;
    report_line(
        7,
        "queue ipv4 <= ipv6, drops each retransmitted once",
        pass,
        detail.join("; "),
    );
    assert!(pass);
}

fn csv_for(seed: u64) -> String {
    let mut cfg = ScenarioConfig::reference(MechanismPhase::SixToFour);
    cfg.run.seed = seed;
    cfg.run.duration = SimTime::from_secs(60);
    let rep = metrics::aggregate(&Simulation::new(cfg).unwrap().run(), true);
    let reports = [rep];
    let mut all = metrics::report_csv(&reports);
    for m in metrics::series_metrics(&reports) {
        all.push_str(&metrics::series_csv(&reports, &m));
    }
    all
}

#[test]
fn deterministic_outputs() {
    let (a, b, c) = (csv_for(11), csv_for(11), csv_for(12));
    let pass = a == b && a != c;
    report_line(
        8,
        "same seed identical CSV, other seed differs",
        pass,
        format!("{} bytes compared", a.len()),
    );
    assert!(pass);
}

/// Poisson arrivals into one FIFO served at a fixed rate.
fn md1_mean_wait(seed: u64, packets: usize, load: f64) -> (f64, f64, f64) {
    enum Ev {
        Arrival,
        Done,
    }
    let link = Link::new(1_000_000, SimTime::ZERO);
    let service = link.serialization_time(1500);
    let lambda = load / service.as_secs_f64();
    let gaps = Exp::new(lambda).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sched = Scheduler::new();
    let mut queue: FifoQueue<u32> = FifoQueue::unbounded();
    let mut channel = LinkChannel::new(link);
    let mut arrived = 0usize;
    let mut waits = VecDeque::new();
    sched.schedule_in(SimTime::ZERO, Ev::Arrival);
    let mut busy = false;
    while let Some((now, _, ev)) = sched.pop_until(SimTime::MAX) {
        match ev {
            Ev::Arrival => {
                arrived += 1;
                queue.enqueue(1500, now).unwrap();
                if arrived < packets {
                    sched.schedule_in(SimTime::from_secs_f64(gaps.sample(&mut rng)), Ev::Arrival);
                }
            }
            Ev::Done => busy = false,
        }
        if !busy && !queue.is_empty() {
            let d = queue.dequeue(now).unwrap();
            waits.push_back(d.wait.as_secs_f64());
            let tx = channel.transmit(now, d.item);
            sched.schedule_in(tx.done - now, Ev::Done);
            busy = true;
        }
        if arrived == packets && queue.is_empty() && !busy {
            break;
        }
    }
    let measured = waits.iter().sum::<f64>() / waits.len() as f64;
    let d = service.as_secs_f64();
    let analytic = load * d / (2.0 * (1.0 - load));
    let little = queue.mean_length(sched.now()) / (lambda * measured);
    (measured, analytic, little)
}

#[test]
fn md1_queue_matches_analytic_wait() {
    let (measured, analytic, little) = md1_mean_wait(SEED, 10_000, 0.8);
    let err = (measured - analytic).abs() / analytic;
    let pass = err <= 0.10;
    report_line(
        9,
        "M/D/1 mean wait within 10% at 80% load",
        pass,
        format!(
            "measured {measured:.6} s, analytic {analytic:.6} s, error {:.1}%, L/(lambda W) {little:.3}",
            100.0 * err
        ),
    );
    assert!(pass);
}

/// Routers crossed on the shortest host→server path, by a breadth-first
/// search written against the raw topology.
fn routers_on_path(t: &Topology, from: NodeId, to: NodeId, v: IpVersion) -> Option<u8> {
    let speaks = |n: NodeId| t.nodes[n].speaks(v);
    let mut dist = vec![usize::MAX; t.node_count()];
    let mut routers = vec![0u8; t.node_count()];
    let mut frontier = VecDeque::from([from]);
    dist[from] = 0;
    while let Some(n) = frontier.pop_front() {
        if n == to {
            return Some(routers[n]);
        }
        if n != from && !matches!(t.nodes[n].kind, NodeKind::Router | NodeKind::Switch) {
            continue;
        }
        let mut next: Vec<NodeId> = t.neighbors(n).filter(|&m| speaks(m)).collect();
        if v == IpVersion::V6 && t.nodes[n].tunnel.is_some() {
            next.extend((0..t.node_count()).filter(|&m| t.is_tunnel_pair(n, m)));
        }
        for m in next {
            if dist[m] == usize::MAX {
                dist[m] = dist[n] + 1;
                routers[m] = routers[n] + u8::from(t.nodes[m].kind == NodeKind::Router);
                frontier.push_back(m);
            }
        }
    }
    None
}

#[test]
fn hop_limit_probes() {
    let mut pass = true;
    let mut detail = Vec::new();
    for (phase, v) in [
        (MechanismPhase::Ipv4, IpVersion::V4),
        (MechanismPhase::Ipv6, IpVersion::V6),
        (MechanismPhase::SixToFour, IpVersion::V6),
        (MechanismPhase::ManualTunnel, IpVersion::V6),
    ] {
        let cfg = ScenarioConfig::reference(phase);
        let mut sim = Simulation::idle(cfg).unwrap();
        let (host, server) = (sim.topology().hosts[0], sim.topology().web_server);
        let hops = routers_on_path(sim.topology(), host, server, v).expect("server reachable");
        let short = sim.send_probe(host, server, v, hops - 1).unwrap();
        let exact = sim.send_probe(host, server, v, hops + 1).unwrap();
        let full = sim.send_probe(host, server, v, 64).unwrap();
        sim.run_until(SimTime::from_secs(1));
        let discarded = sim.probe(short) == ProbeOutcome::Discarded;
        let residual = |id| match sim.probe(id) {
            ProbeOutcome::Arrived { hop_limit, .. } => Some(hop_limit),
            _ => None,
        };
        let counted = sim.counters().hop_discards == 1;
        let ok = counted && discarded && residual(exact) == Some(1) && residual(full) == Some(64 - hops);
        pass &= ok;
        detail.push(format!(
            "{phase} {hops} routers: limit {} discarded={discarded}, 64 -> {:?}",
            hops - 1,
            residual(full)
        ));
    }
    report_line(10, "hop limit discard and residual", pass, detail.join("; "));
    assert!(pass);
}
