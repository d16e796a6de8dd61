use transim::metrics::{self, THROUGHPUT};
use transim::scenario::ScenarioConfig;
use transim::sim::{ProbeOutcome, RunResult, Simulation};
use transim::transition::{IpVersion, MechanismPhase};
use transim::transport::Workload;
use transim::SimTime;

fn short(phase: MechanismPhase, secs: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::reference(phase);
    cfg.run.duration = SimTime::from_secs(secs);
    cfg.run.warmup = SimTime::from_secs(2);
    cfg.topology.hosts = 20;
    cfg
}

fn run(cfg: ScenarioConfig) -> RunResult {
    Simulation::new(cfg).unwrap().run()
}

#[test]
fn every_phase_completes_pages_without_aborts() {
    for phase in MechanismPhase::ALL {
        let r = run(short(phase, 20));
        let c = r.counters;
        assert!(c.pages_completed > 20, "{phase}: {c:?}");
        assert_eq!(c.aborted_flows, 0, "{phase}");
        assert_eq!(c.unroutable, 0, "{phase}");
        assert!(r.conservation_ok, "{phase}");
        assert_eq!(c.tunneled_packets > 0, phase.is_tunnel(), "{phase}");
        assert_eq!(c.overhead_violations, 0);
    }
}

#[test]
fn bucketed_bytes_sum_to_run_total() {
    let r = run(short(MechanismPhase::Ipv6, 20));
    let rep = metrics::aggregate(&r, false);
    let total: u64 = r.delivered_bytes.iter().sum();
    let series = &rep.series.iter().find(|(m, _)| m == THROUGHPUT).unwrap().1;
    assert_eq!(series.iter().map(|p| p.1 as u64).sum::<u64>(), total);
    let mean = rep.mean(THROUGHPUT).unwrap();
    let per_second = total as f64 / r.duration.as_secs_f64();
    assert!((mean - per_second).abs() <= 1.0, "{mean} vs {per_second}");
    assert!(r.cpu_busy_ns.iter().all(|&ns| ns <= 1_000_000_000));
}

#[test]
fn repeat_count_bounds_pages() {
    let mut cfg = short(MechanismPhase::DualStack, 60);
    if let Workload::Http(h) = &mut cfg.workload {
        h.repeat_count = Some(2);
    }
    let r = run(cfg);
    assert_eq!(r.counters.pages_completed, 2 * 20);
}

#[test]
fn rerun_is_identical() {
    let a = run(short(MechanismPhase::ManualTunnel, 15));
    let b = run(short(MechanismPhase::ManualTunnel, 15));
    assert_eq!(a.tcp_delay, b.tcp_delay);
    assert_eq!(a.queue_delay, b.queue_delay);
    assert_eq!(a.counters, b.counters);
}

#[test]
fn tighter_queue_drops_more() {
    let mut small = short(MechanismPhase::Ipv4, 30);
    small.topology.hosts = 100;
    let mut large = small;
    small.des.queue_capacity = 10;
    large.des.queue_capacity = 1000;
    let (s, l) = (run(small).counters, run(large).counters);
    assert!(s.drops > l.drops, "{} vs {}", s.drops, l.drops);
    assert_eq!(s.signaled_losses(), s.retransmissions_scheduled);
}

#[test]
fn probes_need_a_shared_family() {
    let mut sim = Simulation::idle(ScenarioConfig::reference(MechanismPhase::Ipv4)).unwrap();
    let (h, s) = (sim.topology().hosts[0], sim.topology().ftp_server);
    assert_eq!(sim.send_probe(h, s, IpVersion::V6, 64), None);
    let id = sim.send_probe(h, s, IpVersion::V4, 64).unwrap();
    assert_eq!(sim.probe(id), ProbeOutcome::InFlight);
    sim.run_until(SimTime::from_millis(100));
    assert!(matches!(sim.probe(id), ProbeOutcome::Arrived { hop_limit: 59, .. }));
}

#[test]
fn dual_stack_hosts_split_by_switch() {
    let sim = Simulation::idle(ScenarioConfig::reference(MechanismPhase::DualStack)).unwrap();
    let t = sim.topology();
    let both = t.hosts.iter().filter(|&&h| t.nodes[h].speaks(IpVersion::V6)).count();
    assert_eq!(both, 50);
    assert!(t.hosts.iter().all(|&h| t.nodes[h].speaks(IpVersion::V4)));
}
