use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use super::ScenarioConfig;
use crate::packet::{IpAddress, Ipv4Address, Ipv6Address};
use crate::time::SimTime;
use crate::transition::{IpVersion, MechanismPhase, StackCaps, TunnelConfig};

pub type NodeId = usize;

/// RIP's infinity is 16; anything farther is unreachable.
pub const RIP_MAX_HOPS: u8 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Host,
    Switch,
    Router,
    Server,
}

impl NodeKind {
    /// Whether traffic may pass through this node on the way elsewhere.
    pub fn is_transit(self) -> bool {
        matches!(self, NodeKind::Switch | NodeKind::Router)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub name: String,
    pub caps: StackCaps,
    pub v4: Option<Ipv4Address>,
    pub v6: Option<Ipv6Address>,
    pub tunnel: Option<TunnelConfig>,
}

impl Node {
    pub fn speaks(&self, v: IpVersion) -> bool {
        self.kind == NodeKind::Switch || self.caps.has(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Medium {
    /// 100BASE-T
    FastEthernet,
    /// PPP over DS3
    Ds3,
    /// edge uplink running at the configured data rate
    DataRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    pub medium: Medium,
    pub bandwidth_bps: u64,
    pub propagation: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("prefix `{key}` has no room for {what}")]
    AddressSpace { key: &'static str, what: String },
    #[error("topology needs at least one host, switch and backbone router")]
    Empty,
}

/// Nodes, physical links and tunnel adjacencies for one scenario.
#[derive(Debug, Clone)]
pub struct Topology {
    pub phase: MechanismPhase,
    pub nodes: Vec<Node>,
    pub links: Vec<LinkSpec>,
    /// virtual IPv6 adjacencies carried over IPv4
    pub tunnels: Vec<(NodeId, NodeId)>,
    pub hosts: Vec<NodeId>,
    pub switches: Vec<NodeId>,
    pub backbone: Vec<NodeId>,
    pub router_a: NodeId,
    pub router_b: NodeId,
    pub server_switch: NodeId,
    pub web_server: NodeId,
    pub ftp_server: NodeId,
    /// every assigned address with the config key it came from
    pub assigned: Vec<(IpAddress, NodeId, &'static str)>,
    /// switch each host hangs off (same order as `hosts`)
    pub host_switch: Vec<usize>,
    by_addr: HashMap<IpAddress, NodeId>,
}

fn caps_for(kind: NodeKind, phase: MechanismPhase, dual: bool, edge: bool) -> StackCaps {
    use MechanismPhase::*;
    match (phase, kind) {
        (_, NodeKind::Switch) => StackCaps::Both,
        (Ipv4, _) => StackCaps::V4,
        (Ipv6, _) => StackCaps::V6,
        (DualStack, NodeKind::Host) if !dual => StackCaps::V4,
        (DualStack, _) => StackCaps::Both,
        (ManualTunnel | SixToFour, NodeKind::Router) if edge => StackCaps::Both,
        (ManualTunnel | SixToFour, NodeKind::Router) => StackCaps::V4,
        (ManualTunnel | SixToFour, _) => StackCaps::V6,
    }
}

impl Topology {
    pub fn build(cfg: &ScenarioConfig) -> Result<Topology, TopologyError> {
        let tc = &cfg.topology;
        let ac = &cfg.addressing;
        let phase = cfg.run.phase;
        if tc.hosts == 0 || tc.switches == 0 || tc.backbone_routers == 0 {
            return Err(TopologyError::Empty);
        }
        let mut t = Topology {
            phase,
            nodes: Vec::new(),
            links: Vec::new(),
            tunnels: Vec::new(),
            hosts: Vec::new(),
            switches: Vec::new(),
            backbone: Vec::new(),
            router_a: 0,
            router_b: 0,
            server_switch: 0,
            web_server: 0,
            ftp_server: 0,
            assigned: Vec::new(),
            host_switch: Vec::new(),
            by_addr: HashMap::new(),
        };
        let room = |key: &'static str, what: String| TopologyError::AddressSpace { key, what };

        let per_switch = tc.hosts.div_ceil(tc.switches);
        for i in 0..tc.hosts {
            let sw = (i / per_switch) as usize;
            let caps = caps_for(NodeKind::Host, phase, (sw as u32) < ac.dual_stack_switches, false);
            let v4 = match caps.has(IpVersion::V4) {
                true => Some(ac.host_v4(i).ok_or_else(|| room("lan_v4", format!("host {i}")))?),
                false => None,
            };
            let v6 = match caps.has(IpVersion::V6) {
                true => Some(ac.host_v6(i).ok_or_else(|| room("lan_v6", format!("host {i}")))?),
                false => None,
            };
            let id = t.push(NodeKind::Host, format!("host{i}"), caps, v4, v6, ("lan_v4", "lan_v6"));
            t.hosts.push(id);
            t.host_switch.push(sw);
        }
        for s in 0..tc.switches {
            let id = t.push(
                NodeKind::Switch,
                format!("switch{s}"),
                StackCaps::Both,
                None,
                None,
                ("", ""),
            );
            t.switches.push(id);
        }

        let edge_caps = caps_for(NodeKind::Router, phase, true, true);
        t.router_a = t.push(
            NodeKind::Router,
            "router_a".into(),
            edge_caps,
            edge_caps.has(IpVersion::V4).then_some(ac.router_a_v4),
            edge_caps.has(IpVersion::V6).then_some(ac.router_a_v6),
            ("router_a_v4", "router_a_v6"),
        );
        let core_caps = caps_for(NodeKind::Router, phase, true, false);
        for k in 1..=tc.backbone_routers {
            let v4 = match core_caps.has(IpVersion::V4) {
                true => Some(
                    ac.backbone_router_v4(k)
                        .ok_or_else(|| room("backbone_v4", format!("router {k}")))?,
                ),
                false => None,
            };
            let v6 = match core_caps.has(IpVersion::V6) {
                true => Some(
                    ac.backbone_router_v6(k)
                        .ok_or_else(|| room("backbone_v6", format!("router {k}")))?,
                ),
                false => None,
            };
            let id = t.push(
                NodeKind::Router,
                format!("r{k}"),
                core_caps,
                v4,
                v6,
                ("backbone_v4", "backbone_v6"),
            );
            t.backbone.push(id);
        }
        t.router_b = t.push(
            NodeKind::Router,
            "router_b".into(),
            edge_caps,
            edge_caps.has(IpVersion::V4).then_some(ac.router_b_v4),
            edge_caps.has(IpVersion::V6).then_some(ac.router_b_v6),
            ("router_b_v4", "router_b_v6"),
        );
        t.server_switch = t.push(
            NodeKind::Switch,
            "server_switch".into(),
            StackCaps::Both,
            None,
            None,
            ("", ""),
        );
        let srv_caps = caps_for(NodeKind::Server, phase, true, false);
        let mut servers = [0; 2];
        for (k, name) in ["web_server", "ftp_server"].into_iter().enumerate() {
            let v4 = match srv_caps.has(IpVersion::V4) {
                true => Some(
                    ac.server_v4(k as u32)
                        .ok_or_else(|| room("server_lan_v4", name.into()))?,
                ),
                false => None,
            };
            let v6 = match srv_caps.has(IpVersion::V6) {
                true => Some(
                    ac.server_v6(k as u32)
                        .ok_or_else(|| room("server_lan_v6", name.into()))?,
                ),
                false => None,
            };
            servers[k] = t.push(
                NodeKind::Server,
                name.into(),
                srv_caps,
                v4,
                v6,
                ("server_lan_v4", "server_lan_v6"),
            );
        }
        [t.web_server, t.ftp_server] = servers;

        if let Some(cfg_a) = cfg.tunnel.router_a {
            t.attach_tunnel(t.router_a, cfg_a, "router_a.address");
        }
        if let Some(cfg_b) = cfg.tunnel.router_b {
            t.attach_tunnel(t.router_b, cfg_b, "router_b.address");
        }
        if phase.is_tunnel() {
            t.tunnels.push((t.router_a, t.router_b));
        }

        // links
        let lan = |a, b| LinkSpec {
            a,
            b,
            medium: Medium::FastEthernet,
            bandwidth_bps: tc.lan_rate,
            propagation: tc.lan_delay,
        };
        for (i, &h) in t.hosts.clone().iter().enumerate() {
            let sw = t.switches[t.host_switch[i]];
            t.links.push(lan(h, sw));
        }
        let s0 = t.switches[0];
        for &s in &t.switches[1..] {
            t.links.push(lan(s, s0));
        }
        t.links.push(lan(s0, t.router_a));
        let (uplink_medium, uplink_rate) = match cfg.run.data_rate {
            Some(r) => (Medium::DataRate, r),
            None => (Medium::Ds3, tc.wan_rate),
        };
        let wan = |a, b| LinkSpec {
            a,
            b,
            medium: uplink_medium,
            bandwidth_bps: uplink_rate,
            propagation: tc.wan_delay,
        };
        let core = |a, b| LinkSpec {
            a,
            b,
            medium: Medium::FastEthernet,
            bandwidth_bps: tc.backbone_rate,
            propagation: tc.backbone_delay,
        };
        let n = t.backbone.len();
        t.links.push(wan(t.router_a, t.backbone[0]));
        match n {
            1 => {}
            2 => t.links.push(core(t.backbone[0], t.backbone[1])),
            _ => {
                for k in 0..n {
                    t.links.push(core(t.backbone[k], t.backbone[(k + 1) % n]));
                }
            }
        }
        t.links.push(wan(t.router_b, t.backbone[n / 2]));
        t.links.push(lan(t.router_b, t.server_switch));
        t.links.push(lan(t.server_switch, t.web_server));
        t.links.push(lan(t.server_switch, t.ftp_server));
        Ok(t)
    }

    fn push(
        &mut self,
        kind: NodeKind,
        name: String,
        caps: StackCaps,
        v4: Option<Ipv4Address>,
        v6: Option<Ipv6Address>,
        keys: (&'static str, &'static str),
    ) -> NodeId {
        let id = self.nodes.len();
        if let Some(a) = v4 {
            self.assign(IpAddress::V4(a), id, keys.0);
        }
        if let Some(a) = v6 {
            self.assign(IpAddress::V6(a), id, keys.1);
        }
        self.nodes.push(Node {
            id,
            kind,
            name,
            caps,
            v4,
            v6,
            tunnel: None,
        });
        id
    }

    fn assign(&mut self, addr: IpAddress, id: NodeId, key: &'static str) {
        self.assigned.push((addr, id, key));
        self.by_addr.entry(addr).or_insert(id);
    }

    fn attach_tunnel(&mut self, router: NodeId, cfg: TunnelConfig, key: &'static str) {
        self.assign(IpAddress::V6(cfg.tunnel_address()), router, key);
        self.nodes[router].tunnel = Some(cfg);
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_by_addr(&self, addr: IpAddress) -> Option<NodeId> {
        self.by_addr.get(&addr).copied()
    }

    /// Physical neighbors, in link order.
    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.links.iter().filter_map(move |l| {
            if l.a == id {
                Some(l.b)
            } else if l.b == id {
                Some(l.a)
            } else {
                None
            }
        })
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<&LinkSpec> {
        self.links
            .iter()
            .find(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
    }

    pub fn is_tunnel_pair(&self, a: NodeId, b: NodeId) -> bool {
        self.tunnels
            .iter()
            .any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    /// The link whose egress queue at router B (toward the backbone) is the
    /// reported point-to-point measurement point.
    pub fn designated_link(&self) -> (NodeId, NodeId) {
        (self.router_b, self.backbone[self.backbone.len() / 2])
    }

    /// Addresses claimed more than once, as `(address, first key, second
    /// key)` in assignment order.
    pub fn duplicate_addresses(&self) -> Vec<(IpAddress, &'static str, &'static str)> {
        let mut seen = HashMap::new();
        let mut dups = Vec::new();
        for &(addr, _, key) in &self.assigned {
            if let Some(first) = seen.insert(addr, key) {
                dups.push((addr, first, key));
            }
        }
        dups
    }

    /// Graph for one address family: adjacency lists plus transit flags.
    pub fn family_graph(&self, v: IpVersion) -> (Vec<Vec<NodeId>>, Vec<bool>) {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        let mut edge = |a: NodeId, b: NodeId| {
            adj[a].push(b);
            adj[b].push(a);
        };
        for l in &self.links {
            if self.nodes[l.a].speaks(v) && self.nodes[l.b].speaks(v) {
                edge(l.a, l.b);
            }
        }
        if v == IpVersion::V6 {
            for &(a, b) in &self.tunnels {
                edge(a, b);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let transit = self
            .nodes
            .iter()
            .map(|nd| nd.kind.is_transit() && nd.speaks(v))
            .collect();
        (adj, transit)
    }
}

/// Builds the reference topology and its config for one phase.
pub fn build_reference_topology(phase: MechanismPhase) -> (Topology, ScenarioConfig) {
    let cfg = ScenarioConfig::reference(phase);
    let topo = Topology::build(&cfg).expect("reference config is consistent");
    (topo, cfg)
}

/// Next-hop table for one address family. `next[src][dst]` is `None` when
/// `dst` is unreachable from `src` (or `src == dst`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteTable {
    next: Vec<Vec<Option<NodeId>>>,
    dist: Vec<Vec<Option<u8>>>,
}

impl RouteTable {
    pub fn next_hop(&self, from: NodeId, to: NodeId) -> Option<NodeId> {
        self.next[from][to]
    }

    pub fn hops(&self, from: NodeId, to: NodeId) -> Option<u8> {
        self.dist[from][to]
    }

    pub fn reachable(&self, from: NodeId, to: NodeId) -> bool {
        from == to || self.next[from][to].is_some()
    }

    /// Follows next hops from `from` to `to`; `None` if unreachable or the
    /// walk exceeds the node count (a loop).
    pub fn path(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        let mut path = vec![from];
        let mut at = from;
        while at != to {
            at = self.next[at][to]?;
            path.push(at);
            if path.len() > self.next.len() {
                return None;
            }
        }
        Some(path)
    }
}

/// Minimum-hop routing toward every destination. Only transit nodes may
/// appear in the middle of a path; ties go to the lowest neighbor id;
/// destinations more than `max_hops` away are left unreachable.
pub fn shortest_next_hops(adj: &[Vec<NodeId>], transit: &[bool], max_hops: u8) -> RouteTable {
    let n = adj.len();
    let mut next = vec![vec![None; n]; n];
    let mut dist = vec![vec![None; n]; n];
    let mut queue = VecDeque::new();
    for dst in 0..n {
        let mut d: Vec<Option<u8>> = vec![None; n];
        d[dst] = Some(0);
        queue.push_back(dst);
        while let Some(v) = queue.pop_front() {
            if v != dst && !transit[v] {
                continue;
            }
            let dv = d[v].expect("queued nodes have a distance");
            if dv >= max_hops {
                continue;
            }
            for &u in &adj[v] {
                if d[u].is_none() {
                    d[u] = Some(dv + 1);
                    queue.push_back(u);
                }
            }
        }
        for src in 0..n {
            dist[src][dst] = d[src];
            let Some(ds) = d[src] else { continue };
            if ds == 0 {
                continue;
            }
            next[src][dst] = adj[src]
                .iter()
                .copied()
                .filter(|&v| d[v] == Some(ds - 1) && (v == dst || transit[v]))
                .min();
        }
    }
    RouteTable { next, dist }
}

#[derive(Debug, Clone)]
pub struct Routes {
    pub v4: RouteTable,
    pub v6: RouteTable,
}

impl Routes {
    pub fn table(&self, v: IpVersion) -> &RouteTable {
        match v {
            IpVersion::V4 => &self.v4,
            IpVersion::V6 => &self.v6,
        }
    }
}

pub fn compute_routes(topo: &Topology) -> Routes {
    let table = |v| {
        let (adj, transit) = topo.family_graph(v);
        shortest_next_hops(&adj, &transit, RIP_MAX_HOPS)
    };
    Routes {
        v4: table(IpVersion::V4),
        v6: table(IpVersion::V6),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> (Vec<Vec<NodeId>>, Vec<bool>) {
        let mut adj = vec![Vec::new(); n];
        for i in 0..n - 1 {
            adj[i].push(i + 1);
            adj[i + 1].push(i);
        }
        (adj, vec![true; n])
    }

    #[test]
    fn three_node_chain() {
        let (adj, transit) = chain(3);
        let r = shortest_next_hops(&adj, &transit, RIP_MAX_HOPS);
        assert_eq!(r.next_hop(0, 2), Some(1));
        assert_eq!(r.path(0, 2), Some(vec![0, 1, 2]));
    }

    #[test]
    fn sixteen_hops_is_unreachable() {
        let (adj, transit) = chain(17);
        let r = shortest_next_hops(&adj, &transit, RIP_MAX_HOPS);
        assert_eq!(r.hops(0, 15), Some(15));
        assert_eq!(r.next_hop(0, 16), None);
        assert!(!r.reachable(0, 16));
    }

    #[test]
    fn hosts_do_not_transit() {
        // 0 - 1 - 2 where 1 is an end host
        let (adj, _) = chain(3);
        let r = shortest_next_hops(&adj, &[true, false, true], RIP_MAX_HOPS);
        assert_eq!(r.next_hop(0, 2), None);
        assert_eq!(r.next_hop(0, 1), Some(1));
    }

    #[test]
    fn ties_pick_lowest_neighbor() {
        // square 0-1-3, 0-2-3
        let adj = vec![vec![1, 2], vec![0, 3], vec![0, 3], vec![1, 2]];
        let r = shortest_next_hops(&adj, &[true; 4], RIP_MAX_HOPS);
        assert_eq!(r.next_hop(0, 3), Some(1));
        assert_eq!(r.next_hop(3, 0), Some(1));
    }

    #[test]
    fn reference_node_count() {
        let (t, _) = build_reference_topology(MechanismPhase::Ipv4);
        // 100 hosts, 4 switches, 2 edge routers, 5 backbone routers,
        // a server switch and two servers
        assert_eq!(t.node_count(), 100 + 4 + 2 + 5 + 1 + 2);
        assert_eq!(t.hosts.len(), 100);
        assert!(t.duplicate_addresses().is_empty());
    }

    #[test]
    fn tunnel_phase_backbone_is_v4_only() {
        let (t, _) = build_reference_topology(MechanismPhase::SixToFour);
        for &r in &t.backbone {
            assert_eq!(t.nodes[r].caps, StackCaps::V4);
        }
        assert_eq!(t.nodes[t.router_a].caps, StackCaps::Both);
        assert_eq!(t.nodes[t.hosts[0]].caps, StackCaps::V6);
        assert_eq!(t.tunnels, vec![(t.router_a, t.router_b)]);
        let routes = compute_routes(&t);
        let path = routes.v6.path(t.hosts[0], t.web_server).unwrap();
        assert!(path.windows(2).any(|w| w == [t.router_a, t.router_b]));
        assert!(path.iter().all(|n| !t.backbone.contains(n)));
        assert_eq!(routes.v4.next_hop(t.router_a, t.router_b), Some(t.backbone[0]));
    }

    #[test]
    fn dual_stack_host_mix() {
        let (t, _) = build_reference_topology(MechanismPhase::DualStack);
        let both = t.hosts.iter().filter(|&&h| t.nodes[h].caps == StackCaps::Both).count();
        assert_eq!(both, 50);
        assert_eq!(t.nodes[t.web_server].caps, StackCaps::Both);
    }

    #[test]
    fn address_lookup_includes_tunnel_interface() {
        let (t, _) = build_reference_topology(MechanismPhase::ManualTunnel);
        let a: Ipv6Address = "2002:c0a8:101:d::1".parse().unwrap();
        assert_eq!(t.node_by_addr(IpAddress::V6(a)), Some(t.router_a));
        let b: Ipv4Address = "10.1.1.1".parse().unwrap();
        assert_eq!(t.node_by_addr(IpAddress::V4(b)), Some(t.router_b));
    }

    #[test]
    fn data_rate_replaces_uplinks() {
        let mut cfg = ScenarioConfig::reference(MechanismPhase::Ipv4);
        cfg.run.data_rate = Some(2_000_000);
        let t = Topology::build(&cfg).unwrap();
        let up = t.link_between(t.router_a, t.backbone[0]).unwrap();
        assert_eq!((up.medium, up.bandwidth_bps), (Medium::DataRate, 2_000_000));
        let (b, r) = t.designated_link();
        assert_eq!(t.link_between(b, r).unwrap().bandwidth_bps, 2_000_000);
    }
}
