//! Experiment configuration: the reference topology, per-phase addressing
//! and tunnel setup, workload and engine parameters, plus the text format
//! they are stored in.

mod file;
mod topology;

pub use file::{load_scenario, parse_scenario, serialize_scenario, ScenarioError, ScenarioErrorKind};
pub use topology::{
    build_reference_topology, compute_routes, shortest_next_hops, LinkSpec, Medium, Node, NodeId, NodeKind, RouteTable,
    Routes, Topology, TopologyError, RIP_MAX_HOPS,
};

use crate::packet::{Ipv4Address, Ipv4Prefix, Ipv6Address, Ipv6Prefix};
use crate::time::SimTime;
use crate::transition::{DualStackPolicy, MechanismPhase, TunnelConfig, TunnelMode};
use crate::transport::{HttpProfile, TcpParams, Workload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub phase: MechanismPhase,
    pub duration: SimTime,
    pub seed: u64,
    pub warmup: SimTime,
    /// Replaces the WAN rate on both edge uplinks when set.
    pub data_rate: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologyConfig {
    pub hosts: u32,
    pub switches: u32,
    pub backbone_routers: u32,
    pub lan_rate: u64,
    pub wan_rate: u64,
    pub backbone_rate: u64,
    pub lan_delay: SimTime,
    pub wan_delay: SimTime,
    pub backbone_delay: SimTime,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            hosts: 100,
            switches: 4,
            backbone_routers: 5,
            lan_rate: 100_000_000,
            wan_rate: 44_736_000,
            backbone_rate: 100_000_000,
            lan_delay: SimTime::from_micros(1),
            wan_delay: SimTime::from_micros(500),
            backbone_delay: SimTime::from_micros(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressingConfig {
    pub lan_v4: Ipv4Prefix,
    pub lan_v6: Ipv6Prefix,
    pub router_a_v4: Ipv4Address,
    pub router_a_v6: Ipv6Address,
    pub server_lan_v4: Ipv4Prefix,
    pub server_lan_v6: Ipv6Prefix,
    pub router_b_v4: Ipv4Address,
    pub router_b_v6: Ipv6Address,
    pub backbone_v4: Ipv4Prefix,
    pub backbone_v6: Ipv6Prefix,
    pub dual_policy: DualStackPolicy,
    /// In the dual-stack phase, hosts on the first this-many switches run
    /// both stacks; the rest stay IPv4-only.
    pub dual_stack_switches: u32,
}

impl AddressingConfig {
    pub fn host_v4(&self, i: u32) -> Option<Ipv4Address> {
        self.lan_v4.nth(i.checked_add(2)?)
    }

    pub fn host_v6(&self, i: u32) -> Option<Ipv6Address> {
        self.lan_v6.nth(u128::from(i) + 2)
    }

    /// `k` = 0 is the web server, 1 the FTP server.
    pub fn server_v4(&self, k: u32) -> Option<Ipv4Address> {
        self.server_lan_v4.nth(k + 2)
    }

    pub fn server_v6(&self, k: u32) -> Option<Ipv6Address> {
        self.server_lan_v6.nth(u128::from(k) + 2)
    }

    /// Backbone routers are numbered from 1.
    pub fn backbone_router_v4(&self, k: u32) -> Option<Ipv4Address> {
        self.backbone_v4.nth(k)
    }

    pub fn backbone_router_v6(&self, k: u32) -> Option<Ipv6Address> {
        self.backbone_v6.nth(u128::from(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TunnelSettings {
    pub router_a: Option<TunnelConfig>,
    pub router_b: Option<TunnelConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesConfig {
    pub base_service: SimTime,
    pub tunnel_surcharge: SimTime,
    pub translate_surcharge: SimTime,
    /// extra route lookup a configured tunnel pays to resolve its endpoint
    pub lookup_surcharge: SimTime,
    pub queue_capacity: usize,
    pub tcp: TcpParams,
}

impl Default for DesConfig {
    fn default() -> Self {
        DesConfig {
            base_service: SimTime::from_micros(75),
            tunnel_surcharge: SimTime::from_micros(75),
            translate_surcharge: SimTime::from_micros(75),
            lookup_surcharge: SimTime::from_micros(75),
            queue_capacity: 100,
            tcp: TcpParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub run: RunConfig,
    pub topology: TopologyConfig,
    pub addressing: AddressingConfig,
    pub tunnel: TunnelSettings,
    pub workload: Workload,
    pub des: DesConfig,
}

fn v4(s: &str) -> Ipv4Address {
    s.parse().expect("valid literal")
}

fn v6(s: &str) -> Ipv6Address {
    s.parse().expect("valid literal")
}

fn p4(s: &str) -> Ipv4Prefix {
    s.parse().expect("valid literal")
}

fn p6(s: &str) -> Ipv6Prefix {
    s.parse().expect("valid literal")
}

/// Addressing for the given phase. Tunnel phases use the dotted-quad
/// spelling of their router tables.
pub fn reference_addressing(phase: MechanismPhase) -> AddressingConfig {
    let (lan_v6, a_v6, srv_v6, b_v6) = match phase {
        MechanismPhase::SixToFour => (
            "2002:192.168.1.1:1::/64",
            "2002:192.168.1.1:1::1",
            "2002:10.1.1.1:a::/64",
            "2002:10.1.1.1:a::1",
        ),
        MechanismPhase::ManualTunnel => (
            "2001:192.168.1.1:1::/64",
            "2001:192.168.1.1:1::1",
            "2001:10.1.1.1:a::/64",
            "2001:10.1.1.1:a::1",
        ),
        _ => ("2001:db8:1::/64", "2001:db8:1::1", "2001:db8:a::/64", "2001:db8:a::1"),
    };
    AddressingConfig {
        lan_v4: p4("192.168.2.0/24"),
        lan_v6: p6(lan_v6),
        router_a_v4: v4("192.168.1.1"),
        router_a_v6: v6(a_v6),
        server_lan_v4: p4("10.2.2.0/24"),
        server_lan_v6: p6(srv_v6),
        router_b_v4: v4("10.1.1.1"),
        router_b_v6: v6(b_v6),
        backbone_v4: p4("10.0.0.0/24"),
        backbone_v6: p6("2001:db8:ff::/64"),
        dual_policy: DualStackPolicy::PreferV6,
        dual_stack_switches: 2,
    }
}

pub fn reference_tunnels(phase: MechanismPhase) -> TunnelSettings {
    let mode = match phase {
        MechanismPhase::ManualTunnel => TunnelMode::Manual,
        MechanismPhase::SixToFour => TunnelMode::SixToFour,
        _ => return TunnelSettings::default(),
    };
    let a_v4 = v4("192.168.1.1");
    let b_v4 = v4("10.1.1.1");
    let (a_dst, b_dst) = match mode {
        TunnelMode::Manual => (Some(b_v4), Some(a_v4)),
        TunnelMode::SixToFour => (None, None),
    };
    let build =
        |src, dst, addr: &str| TunnelConfig::new(mode, src, dst, v6(addr), 128).expect("reference tunnel is valid");
    TunnelSettings {
        router_a: Some(build(a_v4, a_dst, "2002:192.168.1.1:d::1")),
        router_b: Some(build(b_v4, b_dst, "2002:10.1.1.1:b::1")),
    }
}

impl ScenarioConfig {
    /// The reference experiment for one phase: 100 browsing hosts, 300 s.
    pub fn reference(phase: MechanismPhase) -> Self {
        ScenarioConfig {
            run: RunConfig {
                phase,
                duration: SimTime::from_secs(300),
                seed: 1,
                warmup: SimTime::from_secs(30),
                data_rate: None,
            },
            topology: TopologyConfig::default(),
            addressing: reference_addressing(phase),
            tunnel: reference_tunnels(phase),
            workload: Workload::Http(HttpProfile::heavy_browsing()),
            des: DesConfig::default(),
        }
    }

    /// Same topology, workload and engine settings under another phase's
    /// addressing and tunnels.
    pub fn with_phase(&self, phase: MechanismPhase) -> Self {
        if phase == self.run.phase {
            return *self;
        }
        let mut cfg = *self;
        cfg.run.phase = phase;
        let mut addressing = reference_addressing(phase);
        addressing.dual_policy = self.addressing.dual_policy;
        addressing.dual_stack_switches = self.addressing.dual_stack_switches;
        cfg.addressing = addressing;
        cfg.tunnel = reference_tunnels(phase);
        cfg
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        file::validate(self, &Default::default())
    }
}

/// Parses `44.736M`, `100k`, `2G` or a bare integer into bits per second.
pub fn parse_rate(text: &str) -> Option<u64> {
    let t = text.trim();
    let (num, scale) = match t.chars().last()? {
        'k' | 'K' => (&t[..t.len() - 1], 1e3),
        'm' | 'M' => (&t[..t.len() - 1], 1e6),
        'g' | 'G' => (&t[..t.len() - 1], 1e9),
        _ => (t, 1.0),
    };
    let v: f64 = num.parse().ok()?;
    let bps = (v * scale).round();
    (v.is_finite() && bps >= 1.0 && bps < u64::MAX as f64).then_some(bps as u64)
}

/// Inverse of [`parse_rate`], picking the largest exact unit.
pub fn format_rate(bps: u64) -> String {
    for (unit, suffix) in [(1_000_000_000u64, "G"), (1_000_000, "M"), (1_000, "K")] {
        if bps >= unit && bps.is_multiple_of((unit / 1000).max(1)) {
            let whole = bps / unit;
            let frac = bps % unit;
            if frac == 0 {
                return format!("{whole}{suffix}");
            }
            let digits = format!("{:03}", frac / (unit / 1000));
            return format!("{whole}.{}{suffix}", digits.trim_end_matches('0'));
        }
    }
    bps.to_string()
}
