//! Browser bindings for the demo page in `www/`.
//!
//! Each export has a plain Rust twin returning `Result<String, String>` so
//! the logic is testable off the browser.

use serde_json::json;
use wasm_bindgen::prelude::*;

use transim::addressing::{classify_v4, derive_6to4_prefix, make_isatap_address, siit_v4_mapped, siit_v4_translated};
use transim::metrics::{self, CPU_UTILIZATION, PAGE_RESPONSE, QUEUE_DELAY, TCP_DELAY};
use transim::packet::{FlowMeta, IpHeader, Ipv4Address, Ipv4Header, Ipv6Address, Ipv6Header, Packet, PROTO_TCP};
use transim::scenario::ScenarioConfig;
use transim::sim::Simulation;
use transim::transition::{encapsulate, MechanismPhase};
use transim::SimTime;

/// Longest run the page may request, in simulated seconds.
pub const MAX_DEMO_SECONDS: f64 = 120.0;

pub fn addresses_json(v4: &str) -> Result<String, String> {
    let v4: Ipv4Address = v4.trim().parse().map_err(|e| format!("{e}"))?;
    let prefix = derive_6to4_prefix(v4);
    Ok(json!({
        "ipv4": v4.to_string(),
        "class": classify_v4(v4).to_string(),
        "sixToFourPrefix": prefix.as_prefix().to_string(),
        "sixToFourRouter": prefix.address(1, 1).to_string(),
        "isatap": make_isatap_address(v4).to_string(),
        "siitMapped": siit_v4_mapped(v4).to_string(),
        "siitTranslated": siit_v4_translated(v4).to_string(),
    })
    .to_string())
}

pub fn sizes_json(payload: u32) -> Result<String, String> {
    if payload > 65_495 {
        return Err("payload must fit a single IPv4 datagram (at most 65495 bytes)".into());
    }
    let v4 = Ipv4Address::new(0xc0a8_0101);
    let v6 = Ipv6Address::new(0x2001_0db8_0000_0000_0000_0000_0000_0001);
    let meta = FlowMeta::default();
    let ipv4 = Packet::new(
        IpHeader::V4(Ipv4Header::new(v4, v4, PROTO_TCP, 64, payload)),
        payload,
        meta,
        SimTime::ZERO,
    );
    let ipv6 = Packet::new(
        IpHeader::V6(Ipv6Header::new(v6, v6, PROTO_TCP, 64, payload)),
        payload,
        meta,
        SimTime::ZERO,
    );
    let tunneled = encapsulate(ipv6.clone(), v4, v4).map_err(|e| e.to_string())?;
    Ok(json!({
        "payload": payload,
        "ipv4": ipv4.on_wire_size(),
        "ipv6": ipv6.on_wire_size(),
        "tunneled": tunneled.on_wire_size(),
        "overhead": tunneled.on_wire_size() - ipv6.on_wire_size(),
    })
    .to_string())
}

/// A shortened reference run with `hosts` clients; returns the report means.
pub fn simulate_json(phase: &str, seconds: f64, seed: u64, hosts: u32) -> Result<String, String> {
    let phase = phase.parse::<MechanismPhase>().map_err(|e| e.to_string())?;
    if !(seconds > 0.0 && seconds <= MAX_DEMO_SECONDS) {
        return Err(format!("duration must be in (0, {MAX_DEMO_SECONDS}] seconds"));
    }
    let mut cfg = ScenarioConfig::reference(phase);
    cfg.run.seed = seed;
    cfg.run.duration = SimTime::from_secs_f64(seconds);
    cfg.run.warmup = SimTime::from_secs_f64(seconds / 10.0);
    cfg.topology.hosts = hosts;
    let run = Simulation::new(cfg).map_err(|e| e.to_string())?.run();
    let report = metrics::aggregate(&run, true);
    let mean = |m: &str| report.mean(m);
    Ok(json!({
        "phase": phase.name(),
        "seconds": seconds,
        "hosts": hosts,
        "pageResponse": mean(PAGE_RESPONSE),
        "tcpDelay": mean(TCP_DELAY),
        "queueDelay": mean(QUEUE_DELAY),
        "cpuUtilization": mean(CPU_UTILIZATION),
        "throughput": mean(&report.throughput_metric()),
        "drops": run.counters.drops,
        "tunneled": run.counters.tunneled_packets,
        "pages": run.counters.pages_completed,
        "series": report.series.iter().find(|(m, _)| m == TCP_DELAY).map(|(_, s)| s.clone()),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn addresses(v4: &str) -> Result<String, JsError> {
    addresses_json(v4).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn packet_sizes(payload: u32) -> Result<String, JsError> {
    sizes_json(payload).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(phase: &str, seconds: f64, seed: u32, hosts: u32) -> Result<String, JsError> {
    simulate_json(phase, seconds, u64::from(seed), hosts).map_err(|e| JsError::new(&e))
}
