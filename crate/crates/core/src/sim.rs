//! Packet-level network driver: moves frames across the scenario topology,
//! applies router processing and tunneling, and runs the client workloads.

use log::{debug, trace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::des::{CpuOps, Dropped, FifoQueue, Link, LinkChannel, NodeCpu, Scheduler};
use crate::packet::{
    decrement_hop, FlowMeta, HopOutcome, IpAddress, IpHeader, Ipv4Header, Ipv6Header, Packet, DEFAULT_HOP_LIMIT,
    PROTO_IPV6_IN_IPV4, PROTO_TCP,
};
use crate::scenario::{
    compute_routes, NodeId, NodeKind, Routes, ScenarioConfig, ScenarioError, Topology, TopologyError,
};
use crate::time::SimTime;
use crate::transition::{common_version, decapsulate, encapsulate, IpVersion, MechanismPhase, TunnelMode};
use crate::transport::{sample_think_time, AckOutcome, TcpConnection, TcpReceiver, TransferDirection, Workload};

/// Bytes every IPv6-in-IPv4 packet gains at the tunnel ingress.
pub const TUNNEL_OVERHEAD: u32 = 20;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ScenarioError),
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Data,
    Ack,
    Probe(usize),
}

#[derive(Debug, Clone)]
struct Frame {
    pkt: Packet,
    conn: u32,
    seg: u32,
    kind: FrameKind,
}

enum Event {
    ClientStart {
        client: u32,
    },
    Arrive {
        node: NodeId,
        frame: Frame,
    },
    /// router finished processing; hand to the egress queue
    Forward {
        node: NodeId,
        port: usize,
        frame: Frame,
    },
    TxDone {
        node: NodeId,
        port: usize,
    },
    Retransmit {
        conn: u32,
        seg: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loss {
    QueueFull,
    HopLimit,
    Unroutable,
}

struct Port {
    peer: NodeId,
    channel: LinkChannel,
    queue: FifoQueue<Frame>,
    busy: bool,
}

struct NodeState {
    ports: Vec<Port>,
    cpu: Option<NodeCpu>,
}

#[derive(Debug, Clone, Copy)]
enum Purpose {
    Request { client: u32 },
    Page { client: u32 },
    File { client: u32 },
}

struct Conn {
    tcp: TcpConnection,
    rx: TcpReceiver,
    sender: NodeId,
    receiver: NodeId,
    sender_addr: IpAddress,
    receiver_addr: IpAddress,
    purpose: Purpose,
}

struct Client {
    node: NodeId,
    server: NodeId,
    version: Option<IpVersion>,
    rng: ChaCha8Rng,
    started: SimTime,
    remaining: Option<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// tail drops at any egress queue
    pub drops: u64,
    /// drops at the designated measurement queue
    pub designated_drops: u64,
    pub hop_discards: u64,
    pub unroutable: u64,
    pub retransmissions_scheduled: u64,
    pub retransmissions_sent: u64,
    /// retransmission events that found nothing to resend
    pub retransmissions_idle: u64,
    pub tunneled_packets: u64,
    pub decapsulated_packets: u64,
    pub overhead_violations: u64,
    pub pages_completed: u64,
    pub files_completed: u64,
    pub aborted_flows: u64,
    pub duplicate_segments: u64,
    pub connections: u64,
    pub events: u64,
}

impl Counters {
    /// Every loss the network reported to a sender.
    pub fn signaled_losses(&self) -> u64 {
        self.drops + self.hop_discards + self.unroutable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeOutcome {
    InFlight,
    Arrived { hop_limit: u8, at: SimTime },
    Discarded,
    Unroutable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortStats {
    pub node: NodeId,
    pub peer: NodeId,
    pub mean_wait: Option<f64>,
    pub drops: u64,
    pub sent: u64,
}

/// Everything a run produced, before aggregation.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub phase: MechanismPhase,
    pub seed: u64,
    pub duration: SimTime,
    pub warmup: SimTime,
    pub data_rate: Option<u64>,
    pub workload: &'static str,
    /// rate of the slowest link on the client/server path, bits/s
    pub bottleneck_bps: u64,
    /// `(completion time, seconds)` samples
    pub page_response: Vec<(SimTime, f64)>,
    pub tcp_delay: Vec<(SimTime, f64)>,
    pub queue_delay: Vec<(SimTime, f64)>,
    /// application bytes delivered per one-second bucket
    pub delivered_bytes: Vec<u64>,
    /// router B busy nanoseconds per one-second bucket
    pub cpu_busy_ns: Vec<u64>,
    pub counters: Counters,
    /// retransmission events still queued when the run ended
    pub retransmissions_pending: u64,
    pub probes: Vec<ProbeOutcome>,
    /// every egress queue balanced arrivals against departures and drops
    pub conservation_ok: bool,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    topo: Topology,
    routes: Routes,
    sched: Scheduler<Event>,
    nodes: Vec<NodeState>,
    port_of: Vec<u32>,
    conns: Vec<Conn>,
    clients: Vec<Client>,
    designated: (NodeId, usize),
    counters: Counters,
    page_response: Vec<(SimTime, f64)>,
    tcp_delay: Vec<(SimTime, f64)>,
    queue_delay: Vec<(SimTime, f64)>,
    delivered_bytes: Vec<u64>,
    cpu_busy_ns: Vec<u64>,
    probes: Vec<ProbeOutcome>,
}

fn ip_header(src: IpAddress, dst: IpAddress, hop_limit: u8, payload: u32) -> IpHeader {
    match (src, dst) {
        (IpAddress::V4(s), IpAddress::V4(d)) => IpHeader::V4(Ipv4Header::new(s, d, PROTO_TCP, hop_limit, payload)),
        (IpAddress::V6(s), IpAddress::V6(d)) => IpHeader::V6(Ipv6Header::new(s, d, PROTO_TCP, hop_limit, payload)),
        _ => panic!("mixed-family endpoints {src} -> {dst}"),
    }
}

fn family(h: &IpHeader) -> IpVersion {
    match h {
        IpHeader::V4(_) => IpVersion::V4,
        IpHeader::V6(_) => IpVersion::V6,
    }
}

fn add_interval(buckets: &mut [u64], start: SimTime, end: SimTime) {
    let (mut s, e) = (start.as_nanos(), end.as_nanos());
    while s < e {
        let b = (s / 1_000_000_000) as usize;
        let edge = (b as u64 + 1) * 1_000_000_000;
        let upto = e.min(edge);
        if let Some(slot) = buckets.get_mut(b) {
            *slot += upto - s;
        }
        s = upto;
    }
}

impl Simulation {
    /// A network carrying the configured workload from t = 0.
    pub fn new(cfg: ScenarioConfig) -> Result<Self, SimError> {
        let mut sim = Self::idle(cfg)?;
        sim.spawn_clients();
        Ok(sim)
    }

    /// The same network with no traffic; use [`send_probe`](Self::send_probe).
    pub fn idle(cfg: ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let topo = Topology::build(&cfg)?;
        let routes = compute_routes(&topo);
        let n = topo.node_count();
        let mut nodes: Vec<NodeState> = topo
            .nodes
            .iter()
            .map(|nd| NodeState {
                ports: Vec::new(),
                cpu: (nd.kind == NodeKind::Router).then(|| {
                    NodeCpu::new(
                        cfg.des.base_service,
                        cfg.des.tunnel_surcharge,
                        cfg.des.translate_surcharge,
                        cfg.des.lookup_surcharge,
                    )
                }),
            })
            .collect();
        let mut port_of = vec![u32::MAX; n * n];
        for l in &topo.links {
            for (from, to) in [(l.a, l.b), (l.b, l.a)] {
                let capacity = match topo.nodes[from].kind {
                    NodeKind::Host | NodeKind::Server => usize::MAX,
                    _ => cfg.des.queue_capacity,
                };
                port_of[from * n + to] = nodes[from].ports.len() as u32;
                nodes[from].ports.push(Port {
                    peer: to,
                    channel: LinkChannel::new(Link::new(l.bandwidth_bps, l.propagation)),
                    queue: FifoQueue::new(capacity),
                    busy: false,
                });
            }
        }
        let (db, dr) = topo.designated_link();
        let designated = (db, port_of[db * n + dr] as usize);
        let buckets = cfg.run.duration.as_nanos().div_ceil(1_000_000_000) as usize;
        Ok(Simulation {
            cfg,
            topo,
            routes,
            sched: Scheduler::new(),
            nodes,
            port_of,
            conns: Vec::new(),
            clients: Vec::new(),
            designated,
            counters: Counters::default(),
            page_response: Vec::new(),
            tcp_delay: Vec::new(),
            queue_delay: Vec::new(),
            delivered_bytes: vec![0; buckets],
            cpu_busy_ns: vec![0; buckets],
            probes: Vec::new(),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn routes(&self) -> &Routes {
        &self.routes
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    /// Per egress interface: `(node, peer, mean wait, drops, packets sent)`.
    pub fn port_stats(&self) -> Vec<PortStats> {
        let mut out = Vec::new();
        for (node, st) in self.nodes.iter().enumerate() {
            for p in &st.ports {
                out.push(PortStats {
                    node,
                    peer: p.peer,
                    mean_wait: p.queue.mean_wait(),
                    drops: p.queue.drop_count,
                    sent: p.channel.packets_sent,
                });
            }
        }
        out
    }

    fn spawn_clients(&mut self) {
        let server = match self.cfg.workload {
            Workload::Http(_) => self.topo.web_server,
            Workload::Ftp(_) => self.topo.ftp_server,
        };
        let remaining = match self.cfg.workload {
            Workload::Http(h) => h.repeat_count,
            Workload::Ftp(_) => None,
        };
        let policy = self.cfg.addressing.dual_policy;
        for (i, &h) in self.topo.hosts.iter().enumerate() {
            let caps = self.topo.nodes[h].caps;
            let version = common_version(caps, self.topo.nodes[server].caps, policy)
                .filter(|&v| self.routes.table(v).reachable(h, server));
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.run.seed);
            rng.set_stream(i as u64);
            self.clients.push(Client {
                node: h,
                server,
                version,
                rng,
                started: SimTime::ZERO,
                remaining,
            });
            self.sched
                .schedule_in(SimTime::ZERO, Event::ClientStart { client: i as u32 });
        }
    }

    fn port_to(&self, node: NodeId, peer: NodeId) -> Option<usize> {
        let p = self.port_of[node * self.topo.node_count() + peer];
        (p != u32::MAX).then_some(p as usize)
    }

    /// Injects a probe from `src` toward `dst` at the current time and
    /// returns its index into the probe outcomes.
    pub fn send_probe(&mut self, src: NodeId, dst: NodeId, version: IpVersion, hop_limit: u8) -> Option<usize> {
        let addr = |n: NodeId| match version {
            IpVersion::V4 => self.topo.nodes[n].v4.map(IpAddress::V4),
            IpVersion::V6 => self.topo.nodes[n].v6.map(IpAddress::V6),
        };
        let (s, d) = (addr(src)?, addr(dst)?);
        let id = self.probes.len();
        self.probes.push(ProbeOutcome::InFlight);
        let now = self.now();
        let pkt = Packet::new(ip_header(s, d, hop_limit, 0), 0, FlowMeta::default(), now);
        self.emit(
            src,
            Frame {
                pkt,
                conn: u32::MAX,
                seg: 0,
                kind: FrameKind::Probe(id),
            },
            now,
        );
        Some(id)
    }

    pub fn probe(&self, id: usize) -> ProbeOutcome {
        self.probes[id]
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Processes every event up to and including `t`.
    pub fn run_until(&mut self, t: SimTime) {
        while let Some((now, _, ev)) = self.sched.pop_until(t) {
            self.counters.events += 1;
            self.handle(now, ev);
        }
    }

    /// Runs for the configured duration and collects the results.
    pub fn run(mut self) -> RunResult {
        debug!(
            "{} seed {}: {} nodes, {} clients",
            self.cfg.run.phase,
            self.cfg.run.seed,
            self.topo.node_count(),
            self.clients.len()
        );
        self.run_until(self.cfg.run.duration);
        self.finish()
    }

    pub fn finish(mut self) -> RunResult {
        let mut pending = 0;
        while let Some((_, _, ev)) = self.sched.pop_until(SimTime::MAX) {
            if matches!(ev, Event::Retransmit { .. }) {
                pending += 1;
            }
        }
        debug!("{} finished: {:?}", self.cfg.run.phase, self.counters);
        let conservation_ok = self
            .nodes
            .iter()
            .flat_map(|n| n.ports.iter())
            .all(|p| p.queue.is_conserved());
        RunResult {
            phase: self.cfg.run.phase,
            seed: self.cfg.run.seed,
            duration: self.cfg.run.duration,
            warmup: self.cfg.run.warmup,
            data_rate: self.cfg.run.data_rate,
            workload: match self.cfg.workload {
                Workload::Http(_) => "http",
                Workload::Ftp(_) => "ftp",
            },
            bottleneck_bps: self.bottleneck_bps(),
            page_response: self.page_response,
            tcp_delay: self.tcp_delay,
            queue_delay: self.queue_delay,
            delivered_bytes: self.delivered_bytes,
            cpu_busy_ns: self.cpu_busy_ns,
            counters: self.counters,
            retransmissions_pending: pending,
            probes: self.probes,
            conservation_ok,
        }
    }

    fn bottleneck_bps(&self) -> u64 {
        let server = match self.cfg.workload {
            Workload::Http(_) => self.topo.web_server,
            Workload::Ftp(_) => self.topo.ftp_server,
        };
        let Some(&host) = self.topo.hosts.first() else { return 0 };
        let v = common_version(
            self.topo.nodes[host].caps,
            self.topo.nodes[server].caps,
            self.cfg.addressing.dual_policy,
        )
        .unwrap_or(IpVersion::V4);
        let table = if self.cfg.run.phase.is_tunnel() {
            &self.routes.v4
        } else {
            self.routes.table(v)
        };
        // the tunnel path rides the IPv4 backbone between the edge routers
        let (from, to) = match self.cfg.run.phase {
            p if p.is_tunnel() => (self.topo.router_a, self.topo.router_b),
            _ => (host, server),
        };
        let Some(path) = table.path(from, to) else { return 0 };
        path.windows(2)
            .filter_map(|w| self.topo.link_between(w[0], w[1]))
            .map(|l| l.bandwidth_bps)
            .min()
            .unwrap_or(0)
    }

    fn handle(&mut self, now: SimTime, ev: Event) {
        match ev {
            Event::ClientStart { client } => self.start_client(client, now),
            Event::Arrive { node, frame } => self.arrive(node, frame, now),
            Event::Forward { node, port, frame } => self.enqueue(node, port, frame, now),
            Event::TxDone { node, port } => {
                let p = &mut self.nodes[node].ports[port];
                p.busy = false;
                if !p.queue.is_empty() {
                    self.start_tx(node, port, now);
                }
            }
            Event::Retransmit { conn, seg } => {
                if self.conns[conn as usize].tcp.retransmit(seg, now) {
                    self.counters.retransmissions_sent += 1;
                    let frame = self.data_frame(conn, seg, now);
                    let from = self.conns[conn as usize].sender;
                    self.emit(from, frame, now);
                } else {
                    self.counters.retransmissions_idle += 1;
                }
            }
        }
    }

    fn start_client(&mut self, client: u32, now: SimTime) {
        let c = &mut self.clients[client as usize];
        c.started = now;
        let (host, server) = (c.node, c.server);
        let Some(version) = c.version else {
            self.counters.aborted_flows += 1;
            return;
        };
        match self.cfg.workload {
            Workload::Http(h) => {
                self.open(host, server, version, h.request_size, Purpose::Request { client }, now);
            }
            Workload::Ftp(f) => {
                let (from, to) = match f.direction {
                    TransferDirection::Down => (server, host),
                    TransferDirection::Up => (host, server),
                };
                self.open(from, to, version, f.file_size, Purpose::File { client }, now);
            }
        }
    }

    fn endpoint_addr(&self, node: NodeId, v: IpVersion) -> IpAddress {
        let n = &self.topo.nodes[node];
        match v {
            IpVersion::V4 => IpAddress::V4(n.v4.expect("endpoint speaks IPv4")),
            IpVersion::V6 => IpAddress::V6(n.v6.expect("endpoint speaks IPv6")),
        }
    }

    fn open(&mut self, from: NodeId, to: NodeId, v: IpVersion, bytes: u64, purpose: Purpose, now: SimTime) {
        let tcp = TcpConnection::new(self.cfg.des.tcp, bytes);
        let rx = TcpReceiver::new(tcp.segment_count());
        let id = self.conns.len() as u32;
        self.conns.push(Conn {
            tcp,
            rx,
            sender: from,
            receiver: to,
            sender_addr: self.endpoint_addr(from, v),
            receiver_addr: self.endpoint_addr(to, v),
            purpose,
        });
        self.counters.connections += 1;
        self.pump(id, now);
    }

    fn pump(&mut self, conn: u32, now: SimTime) {
        while let Some(seg) = self.conns[conn as usize].tcp.poll_send(now) {
            let frame = self.data_frame(conn, seg, now);
            let from = self.conns[conn as usize].sender;
            self.emit(from, frame, now);
        }
    }

    fn data_frame(&self, conn: u32, seg: u32, now: SimTime) -> Frame {
        let c = &self.conns[conn as usize];
        let len = c.tcp.segment_len(seg);
        let flow = FlowMeta {
            id: u64::from(conn),
            src_port: 49152 + (conn % 16384) as u16,
            dst_port: 80,
        };
        Frame {
            pkt: Packet::new(
                ip_header(c.sender_addr, c.receiver_addr, DEFAULT_HOP_LIMIT, len),
                len,
                flow,
                now,
            ),
            conn,
            seg,
            kind: FrameKind::Data,
        }
    }

    /// Sends from an end host: pick the port toward the next hop.
    fn emit(&mut self, node: NodeId, frame: Frame, now: SimTime) {
        match self.next_port(node, &frame.pkt) {
            Some(port) => self.enqueue(node, port, frame, now),
            None => self.lose(frame, now, Loss::Unroutable),
        }
    }

    fn next_port(&self, node: NodeId, pkt: &Packet) -> Option<usize> {
        let h = pkt.outer();
        let dst = self.topo.node_by_addr(h.dst())?;
        let next = self.routes.table(family(h)).next_hop(node, dst)?;
        self.port_to(node, next)
    }

    fn enqueue(&mut self, node: NodeId, port: usize, frame: Frame, now: SimTime) {
        let p = &mut self.nodes[node].ports[port];
        match p.queue.enqueue(frame, now) {
            Ok(()) => {
                if !p.busy {
                    self.start_tx(node, port, now);
                }
            }
            Err(Dropped(frame)) => {
                if (node, port) == self.designated {
                    self.counters.designated_drops += 1;
                }
                self.lose(frame, now, Loss::QueueFull)
            }
        }
    }

    fn start_tx(&mut self, node: NodeId, port: usize, now: SimTime) {
        let p = &mut self.nodes[node].ports[port];
        let d = p.queue.dequeue(now).expect("start_tx on a non-empty queue");
        let tx = p.channel.transmit(now, d.item.pkt.on_wire_size());
        p.busy = true;
        let peer = p.peer;
        if (node, port) == self.designated {
            self.queue_delay.push((now, d.wait.as_secs_f64()));
        }
        self.sched.schedule_in(tx.done - now, Event::TxDone { node, port });
        self.sched.schedule_in(
            tx.arrival - now,
            Event::Arrive {
                node: peer,
                frame: d.item,
            },
        );
    }

    fn arrive(&mut self, node: NodeId, frame: Frame, now: SimTime) {
        match self.topo.nodes[node].kind {
            NodeKind::Host | NodeKind::Server => self.deliver(node, frame, now),
            NodeKind::Switch => self.emit(node, frame, now),
            NodeKind::Router => {
                let (ops, outcome) = self.route(node, frame);
                let cpu = self.nodes[node].cpu.as_mut().expect("routers have a CPU");
                let (start, done) = cpu.process(now, ops);
                if node == self.topo.router_b {
                    add_interval(&mut self.cpu_busy_ns, start, done);
                }
                match outcome {
                    Ok((port, frame)) => {
                        self.sched.schedule_in(done - now, Event::Forward { node, port, frame });
                    }
                    Err((frame, why)) => self.lose(frame, now, why),
                }
            }
        }
    }

    fn check_overhead(&mut self, grew_by: i64) {
        if grew_by.unsigned_abs() != u64::from(TUNNEL_OVERHEAD) {
            self.counters.overhead_violations += 1;
        }
    }

    /// Router forwarding decision: tunnel egress, hop limit, tunnel ingress,
    /// then the egress port.
    #[allow(clippy::type_complexity)]
    fn route(&mut self, r: NodeId, mut frame: Frame) -> (CpuOps, Result<(usize, Frame), (Frame, Loss)>) {
        let mut ops = CpuOps::FORWARD;
        let own_v4 = self.topo.nodes[r].v4;
        let tunnel = self.topo.nodes[r].tunnel;

        if let IpHeader::V4(h) = frame.pkt.outer() {
            if Some(h.dst) == own_v4 && h.protocol == PROTO_IPV6_IN_IPV4 && frame.pkt.is_encapsulated() {
                let before = frame.pkt.on_wire_size();
                frame.pkt = decapsulate(frame.pkt).expect("checked tunneled shape");
                ops.decap = true;
                self.counters.decapsulated_packets += 1;
                self.check_overhead(i64::from(before) - i64::from(frame.pkt.on_wire_size()));
            }
        }

        let hdr = *frame.pkt.outer();
        let v = family(&hdr);
        let Some(dst) = self.topo.node_by_addr(hdr.dst()) else {
            return (ops, Err((frame, Loss::Unroutable)));
        };
        let Some(mut next) = self.routes.table(v).next_hop(r, dst) else {
            return (ops, Err((frame, Loss::Unroutable)));
        };
        frame.pkt = match decrement_hop(frame.pkt) {
            HopOutcome::Forward(p) => p,
            HopOutcome::Discard(p) => {
                frame.pkt = p;
                return (ops, Err((frame, Loss::HopLimit)));
            }
        };

        if v == IpVersion::V6 && self.topo.is_tunnel_pair(r, next) {
            let (Some(cfg), IpAddress::V6(inner_dst)) = (tunnel, hdr.dst()) else {
                return (ops, Err((frame, Loss::Unroutable)));
            };
            let Ok(endpoint) = cfg.next_hop(inner_dst) else {
                return (ops, Err((frame, Loss::Unroutable)));
            };
            ops.encap = true;
            ops.tunnel_lookup = cfg.mode() == TunnelMode::Manual;
            let before = frame.pkt.on_wire_size();
            frame.pkt = encapsulate(frame.pkt, cfg.source(), endpoint).expect("bare IPv6 packet");
            self.counters.tunneled_packets += 1;
            self.check_overhead(i64::from(frame.pkt.on_wire_size()) - i64::from(before));
            let hop = self
                .topo
                .node_by_addr(IpAddress::V4(endpoint))
                .and_then(|e| self.routes.v4.next_hop(r, e));
            match hop {
                Some(h) => next = h,
                None => return (ops, Err((frame, Loss::Unroutable))),
            }
        }
        match self.port_to(r, next) {
            Some(port) => (ops, Ok((port, frame))),
            None => (ops, Err((frame, Loss::Unroutable))),
        }
    }

    fn lose(&mut self, frame: Frame, now: SimTime, why: Loss) {
        trace!(
            "{now}: {why:?} conn {} seg {} ({:?})",
            frame.conn,
            frame.seg,
            frame.kind
        );
        match why {
            Loss::QueueFull => self.counters.drops += 1,
            Loss::HopLimit => self.counters.hop_discards += 1,
            Loss::Unroutable => self.counters.unroutable += 1,
        }
        match frame.kind {
            FrameKind::Probe(id) => {
                self.probes[id] = match why {
                    Loss::HopLimit => ProbeOutcome::Discarded,
                    _ => ProbeOutcome::Unroutable,
                };
            }
            FrameKind::Data | FrameKind::Ack => {
                let conn = frame.conn;
                if let Some(at) = self.conns[conn as usize].tcp.on_drop(frame.seg, now) {
                    self.counters.retransmissions_scheduled += 1;
                    self.sched
                        .schedule(at, Event::Retransmit { conn, seg: frame.seg })
                        .expect("retransmission is never in the past");
                }
            }
        }
    }

    fn deliver(&mut self, node: NodeId, frame: Frame, now: SimTime) {
        match frame.kind {
            FrameKind::Probe(id) => {
                self.probes[id] = ProbeOutcome::Arrived {
                    hop_limit: frame.pkt.inner().hop_limit(),
                    at: now,
                };
            }
            FrameKind::Data => {
                let conn = frame.conn;
                let c = &mut self.conns[conn as usize];
                debug_assert_eq!(node, c.receiver);
                let len = c.tcp.segment_len(frame.seg);
                let first = c.rx.on_segment(frame.seg, len);
                let complete = first && c.rx.is_complete();
                if first && !matches!(c.purpose, Purpose::Request { .. }) {
                    if let Some(b) = self.delivered_bytes.get_mut(now.bucket_secs() as usize) {
                        *b += u64::from(len);
                    }
                }
                if !first {
                    self.counters.duplicate_segments += 1;
                }
                let ack = Packet::new(
                    ip_header(c.receiver_addr, c.sender_addr, DEFAULT_HOP_LIMIT, 0),
                    0,
                    frame.pkt.flow,
                    now,
                );
                let receiver = c.receiver;
                self.emit(
                    receiver,
                    Frame {
                        pkt: ack,
                        conn,
                        seg: frame.seg,
                        kind: FrameKind::Ack,
                    },
                    now,
                );
                if complete {
                    self.transfer_done(conn, now);
                }
            }
            FrameKind::Ack => {
                let conn = frame.conn;
                if let AckOutcome::Accepted { delay } = self.conns[conn as usize].tcp.on_ack(frame.seg, now) {
                    self.tcp_delay.push((now, delay.as_secs_f64()));
                }
                self.pump(conn, now);
            }
        }
    }

    fn transfer_done(&mut self, conn: u32, now: SimTime) {
        match self.conns[conn as usize].purpose {
            Purpose::Request { client } => {
                let Workload::Http(h) = self.cfg.workload else { return };
                let c = &self.conns[conn as usize];
                let (server, host) = (c.receiver, c.sender);
                let v = match c.sender_addr {
                    IpAddress::V4(_) => IpVersion::V4,
                    IpAddress::V6(_) => IpVersion::V6,
                };
                self.open(server, host, v, h.page_size, Purpose::Page { client }, now);
            }
            Purpose::Page { client } => {
                let started = self.clients[client as usize].started;
                self.page_response.push((now, (now - started).as_secs_f64()));
                self.counters.pages_completed += 1;
                self.think(client);
            }
            Purpose::File { client } => {
                self.counters.files_completed += 1;
                self.think(client);
            }
        }
    }

    fn think(&mut self, client: u32) {
        let mean = self.cfg.workload.think_time_mean();
        let c = &mut self.clients[client as usize];
        if let Some(n) = c.remaining.as_mut() {
            *n = n.saturating_sub(1);
            if *n == 0 {
                return;
            }
        }
        let pause = sample_think_time(&mut c.rng, mean);
        self.sched.schedule_in(pause, Event::ClientStart { client });
    }
}
