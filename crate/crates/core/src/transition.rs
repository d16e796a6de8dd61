//! Dataplane engines for the IPv4/IPv6 transition mechanisms.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::addressing::{
    extract_6to4_v4, natpt_embed, siit_mapped_prefix, siit_translated_prefix, siit_v4_mapped, siit_v4_translated,
    strip_prefix96,
};
use crate::packet::{
    IpHeader, Ipv4Address, Ipv4Header, Ipv6Address, Ipv6Header, Ipv6Prefix, Packet, FLAG_DONT_FRAGMENT,
    IPV4_HEADER_LEN, PROTO_IPV6_IN_IPV4,
};

/// TTL given to the outer IPv4 header on encapsulation.
pub const DEFAULT_TUNNEL_TTL: u8 = 64;
/// First port handed out per NAT-PT pool address.
pub const NATPT_FIRST_PORT: u16 = 49152;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("packet is already encapsulated")]
    NestedTunnel,
    #[error("packet is not a 6in4 tunnel packet")]
    NotTunneled,
    #[error("only a bare IPv6 packet can be encapsulated")]
    NotIpv6,
    #[error("no tunnel route to {0}")]
    NoRoute(Ipv6Address),
    #[error("tunnel configuration: {0}")]
    Config(&'static str),
    #[error("cannot translate: {0}")]
    NotTranslatable(&'static str),
    #[error("NAT-PT address pool exhausted")]
    PoolExhausted,
    #[error("no NAT-PT binding for {addr}:{port}")]
    NoBinding { addr: Ipv4Address, port: u16 },
}

/// The five experiment configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MechanismPhase {
    Ipv4,
    Ipv6,
    DualStack,
    ManualTunnel,
    SixToFour,
}

impl MechanismPhase {
    pub const ALL: [MechanismPhase; 5] = [
        MechanismPhase::Ipv4,
        MechanismPhase::Ipv6,
        MechanismPhase::DualStack,
        MechanismPhase::ManualTunnel,
        MechanismPhase::SixToFour,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismPhase::Ipv4 => "ipv4",
            MechanismPhase::Ipv6 => "ipv6",
            MechanismPhase::DualStack => "dualstack",
            MechanismPhase::ManualTunnel => "manual",
            MechanismPhase::SixToFour => "6to4",
        }
    }

    pub fn is_tunnel(self) -> bool {
        matches!(self, MechanismPhase::ManualTunnel | MechanismPhase::SixToFour)
    }

    pub fn is_native(self) -> bool {
        !self.is_tunnel()
    }
}

impl fmt::Display for MechanismPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismPhase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ipv4" | "v4" => Ok(MechanismPhase::Ipv4),
            "ipv6" | "v6" => Ok(MechanismPhase::Ipv6),
            "dualstack" | "dual-stack" | "dual" => Ok(MechanismPhase::DualStack),
            "manual" | "manualtunnel" | "manual-tunnel" => Ok(MechanismPhase::ManualTunnel),
            "6to4" | "sixtofour" => Ok(MechanismPhase::SixToFour),
            _ => Err(format!("unknown phase {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IpVersion {
    V4,
    V6,
}

/// Protocol families a node can speak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StackCaps {
    V4,
    V6,
    Both,
}

impl StackCaps {
    pub fn has(self, v: IpVersion) -> bool {
        matches!(
            (self, v),
            (StackCaps::Both, _) | (StackCaps::V4, IpVersion::V4) | (StackCaps::V6, IpVersion::V6)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DualStackPolicy {
    PreferV6,
    PreferV4,
}

pub fn dualstack_select(dst_caps: StackCaps, policy: DualStackPolicy) -> IpVersion {
    match (dst_caps, policy) {
        (StackCaps::V4, _) => IpVersion::V4,
        (StackCaps::V6, _) => IpVersion::V6,
        (StackCaps::Both, DualStackPolicy::PreferV6) => IpVersion::V6,
        (StackCaps::Both, DualStackPolicy::PreferV4) => IpVersion::V4,
    }
}

/// Version both ends can use, or `None` when they share no family.
pub fn common_version(src: StackCaps, dst: StackCaps, policy: DualStackPolicy) -> Option<IpVersion> {
    match (src, dst) {
        (StackCaps::Both, d) => Some(dualstack_select(d, policy)),
        (StackCaps::V4, d) => d.has(IpVersion::V4).then_some(IpVersion::V4),
        (StackCaps::V6, d) => d.has(IpVersion::V6).then_some(IpVersion::V6),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TunnelMode {
    Manual,
    SixToFour,
}

impl fmt::Display for TunnelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TunnelMode::Manual => "manual",
            TunnelMode::SixToFour => "6to4",
        })
    }
}

impl FromStr for TunnelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "manual" => Ok(TunnelMode::Manual),
            "6to4" => Ok(TunnelMode::SixToFour),
            _ => Err(format!("unknown tunnel type {s:?}")),
        }
    }
}

/// A tunnel interface. Manual tunnels are point-to-point and carry a
/// fixed destination; 6to4 tunnels are point-to-multipoint and derive the
/// destination from each packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TunnelConfig {
    mode: TunnelMode,
    source_if_v4: Ipv4Address,
    dest_v4: Option<Ipv4Address>,
    tunnel_v6: Ipv6Address,
    prefix_len: u8,
}

impl TunnelConfig {
    pub fn new(
        mode: TunnelMode,
        source_if_v4: Ipv4Address,
        dest_v4: Option<Ipv4Address>,
        tunnel_v6: Ipv6Address,
        prefix_len: u8,
    ) -> Result<Self, TransitionError> {
        match (mode, dest_v4) {
            (TunnelMode::Manual, None) => return Err(TransitionError::Config("manual tunnel requires a destination")),
            (TunnelMode::SixToFour, Some(_)) => {
                return Err(TransitionError::Config("6to4 tunnel takes no fixed destination"))
            }
            _ => {}
        }
        if prefix_len > 128 {
            return Err(TransitionError::Config("prefix length above 128"));
        }
        Ok(TunnelConfig {
            mode,
            source_if_v4,
            dest_v4,
            tunnel_v6,
            prefix_len,
        })
    }

    pub fn mode(&self) -> TunnelMode {
        self.mode
    }

    pub fn source(&self) -> Ipv4Address {
        self.source_if_v4
    }

    pub fn destination(&self) -> Option<Ipv4Address> {
        self.dest_v4
    }

    pub fn tunnel_address(&self) -> Ipv6Address {
        self.tunnel_v6
    }

    pub fn prefix_len(&self) -> u8 {
        self.prefix_len
    }

    /// IPv4 endpoint to encapsulate toward for an inner destination.
    pub fn next_hop(&self, inner_dst: Ipv6Address) -> Result<Ipv4Address, TransitionError> {
        match self.mode {
            TunnelMode::Manual => manual_next_hop(self),
            TunnelMode::SixToFour => sixto4_next_hop(inner_dst),
        }
    }
}

pub fn sixto4_next_hop(dst: Ipv6Address) -> Result<Ipv4Address, TransitionError> {
    extract_6to4_v4(dst).map_err(|_| TransitionError::NoRoute(dst))
}

pub fn manual_next_hop(cfg: &TunnelConfig) -> Result<Ipv4Address, TransitionError> {
    match (cfg.mode, cfg.dest_v4) {
        (TunnelMode::Manual, Some(d)) => Ok(d),
        _ => Err(TransitionError::Config("not a manual tunnel")),
    }
}

pub fn encapsulate(p: Packet, outer_src: Ipv4Address, outer_dst: Ipv4Address) -> Result<Packet, TransitionError> {
    encapsulate_with_ttl(p, outer_src, outer_dst, DEFAULT_TUNNEL_TTL)
}

/// Prepends an IPv4 header (protocol 41) to a bare IPv6 packet. The inner
/// header is left untouched.
pub fn encapsulate_with_ttl(
    mut p: Packet,
    outer_src: Ipv4Address,
    outer_dst: Ipv4Address,
    ttl: u8,
) -> Result<Packet, TransitionError> {
    if p.is_encapsulated() {
        return Err(TransitionError::NestedTunnel);
    }
    if !matches!(p.outer(), IpHeader::V6(_)) {
        return Err(TransitionError::NotIpv6);
    }
    let inner_size = p.on_wire_size();
    let outer = Ipv4Header::new(outer_src, outer_dst, PROTO_IPV6_IN_IPV4, ttl, inner_size);
    let pushed = p.push_outer(IpHeader::V4(outer));
    debug_assert!(pushed);
    Ok(p)
}

pub fn decapsulate(mut p: Packet) -> Result<Packet, TransitionError> {
    let tunneled = p.is_encapsulated()
        && matches!(p.outer(), IpHeader::V4(h) if h.protocol == PROTO_IPV6_IN_IPV4)
        && matches!(p.inner(), IpHeader::V6(_));
    if !tunneled {
        return Err(TransitionError::NotTunneled);
    }
    p.pop_outer();
    Ok(p)
}

fn strip_siit(a: Ipv6Address) -> Option<Ipv4Address> {
    strip_prefix96(a, siit_translated_prefix())
        .or_else(|_| strip_prefix96(a, siit_mapped_prefix()))
        .ok()
}

/// Stateless IPv6 -> IPv4 header translation. Both addresses must carry
/// one of the two SIIT prefixes (IPv4-translated for the IPv6 host,
/// IPv4-mapped for the IPv4 host); the prefix is removed.
pub fn siit_translate_v6_to_v4(mut p: Packet) -> Result<Packet, TransitionError> {
    if p.is_encapsulated() {
        return Err(TransitionError::NotTranslatable("tunneled packet"));
    }
    let h = match p.outer() {
        IpHeader::V6(h) => *h,
        IpHeader::V4(_) => return Err(TransitionError::NotTranslatable("not an IPv6 packet")),
    };
    let src = strip_siit(h.src).ok_or(TransitionError::NotTranslatable("source lacks an SIIT prefix"))?;
    let dst = strip_siit(h.dst).ok_or(TransitionError::NotTranslatable("destination lacks an SIIT prefix"))?;
    let mut v4 = Ipv4Header::new(src, dst, h.next_header, h.hop_limit, u32::from(h.payload_length));
    v4.type_of_service = h.traffic_class;
    v4.identification = 0;
    v4.flags = FLAG_DONT_FRAGMENT;
    v4.refresh_checksum();
    p.replace_only_header(IpHeader::V4(v4));
    Ok(p)
}

/// Stateless IPv4 -> IPv6 header translation: the IPv4 source becomes an
/// IPv4-mapped address, the destination an IPv4-translated one.
pub fn siit_translate_v4_to_v6(mut p: Packet) -> Result<Packet, TransitionError> {
    if p.is_encapsulated() {
        return Err(TransitionError::NotTranslatable("tunneled packet"));
    }
    let h = match p.outer() {
        IpHeader::V4(h) => *h,
        IpHeader::V6(_) => return Err(TransitionError::NotTranslatable("not an IPv4 packet")),
    };
    if h.is_fragment() {
        return Err(TransitionError::NotTranslatable("fragmented IPv4 packet"));
    }
    let mut v6 = Ipv6Header::new(
        siit_v4_mapped(h.src),
        siit_v4_translated(h.dst),
        h.protocol,
        h.ttl,
        u32::from(h.total_length).saturating_sub(IPV4_HEADER_LEN),
    );
    v6.traffic_class = h.type_of_service;
    p.replace_only_header(IpHeader::V6(v6));
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NatBinding {
    pub v6: Ipv6Address,
    pub v6_port: u16,
    pub v4: Ipv4Address,
    pub v4_port: u16,
}

#[derive(Debug, Clone, Copy)]
struct PoolLease {
    owner: Ipv6Address,
    next_port: u32,
}

/// NAT-PT binding state. Each inner IPv6 host leases one pool address;
/// its flows get sequential ports on that address.
#[derive(Debug, Clone)]
pub struct NatBindingTable {
    prefix: Ipv6Prefix,
    pool: Vec<Ipv4Address>,
    leases: Vec<Option<PoolLease>>,
    host_lease: HashMap<Ipv6Address, usize>,
    outbound: HashMap<(Ipv6Address, u16), NatBinding>,
    inbound: HashMap<(Ipv4Address, u16), NatBinding>,
}

impl NatBindingTable {
    pub fn new(prefix: Ipv6Prefix, pool: Vec<Ipv4Address>) -> Result<Self, TransitionError> {
        if prefix.len != 96 {
            return Err(TransitionError::Config("NAT-PT prefix must be a /96"));
        }
        let leases = vec![None; pool.len()];
        Ok(NatBindingTable {
            prefix,
            pool,
            leases,
            host_lease: HashMap::new(),
            outbound: HashMap::new(),
            inbound: HashMap::new(),
        })
    }

    pub fn prefix(&self) -> Ipv6Prefix {
        self.prefix
    }

    pub fn len(&self) -> usize {
        self.outbound.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outbound.is_empty()
    }

    pub fn free_addresses(&self) -> usize {
        self.leases.iter().filter(|l| l.is_none()).count()
    }

    pub fn lookup_inbound(&self, v4: Ipv4Address, port: u16) -> Option<NatBinding> {
        self.inbound.get(&(v4, port)).copied()
    }

    /// Existing binding for the flow, or a fresh one.
    pub fn bind(&mut self, v6: Ipv6Address, v6_port: u16) -> Result<NatBinding, TransitionError> {
        if let Some(b) = self.outbound.get(&(v6, v6_port)) {
            return Ok(*b);
        }
        let slot = match self.host_lease.get(&v6) {
            Some(&i) => i,
            None => {
                let i = self
                    .leases
                    .iter()
                    .position(Option::is_none)
                    .ok_or(TransitionError::PoolExhausted)?;
                self.leases[i] = Some(PoolLease {
                    owner: v6,
                    next_port: u32::from(NATPT_FIRST_PORT),
                });
                self.host_lease.insert(v6, i);
                i
            }
        };
        let lease = self.leases[slot].as_mut().expect("leased slot");
        debug_assert_eq!(lease.owner, v6);
        if lease.next_port > u32::from(u16::MAX) {
            return Err(TransitionError::PoolExhausted);
        }
        let b = NatBinding {
            v6,
            v6_port,
            v4: self.pool[slot],
            v4_port: lease.next_port as u16,
        };
        lease.next_port += 1;
        self.outbound.insert((v6, v6_port), b);
        self.inbound.insert((b.v4, b.v4_port), b);
        Ok(b)
    }

    /// Drops a flow's binding; the pool address returns to the free list
    /// once its host has no flows left.
    pub fn release(&mut self, v6: Ipv6Address, v6_port: u16) -> Option<NatBinding> {
        let b = self.outbound.remove(&(v6, v6_port))?;
        self.inbound.remove(&(b.v4, b.v4_port));
        if !self.outbound.keys().any(|(a, _)| *a == v6) {
            if let Some(i) = self.host_lease.remove(&v6) {
                self.leases[i] = None;
            }
        }
        Some(b)
    }
}

/// Outbound NAT-PT: the IPv6 source is bound to a pool address and port,
/// the destination loses its /96 prefix.
pub fn natpt_translate_v6_to_v4(mut p: Packet, table: &mut NatBindingTable) -> Result<Packet, TransitionError> {
    if p.is_encapsulated() {
        return Err(TransitionError::NotTranslatable("tunneled packet"));
    }
    let h = match p.outer() {
        IpHeader::V6(h) => *h,
        IpHeader::V4(_) => return Err(TransitionError::NotTranslatable("not an IPv6 packet")),
    };
    let dst = strip_prefix96(h.dst, table.prefix())
        .map_err(|_| TransitionError::NotTranslatable("destination outside the NAT-PT prefix"))?;
    let b = table.bind(h.src, p.flow.src_port)?;
    let mut v4 = Ipv4Header::new(b.v4, dst, h.next_header, h.hop_limit, u32::from(h.payload_length));
    v4.type_of_service = h.traffic_class;
    v4.refresh_checksum();
    p.replace_only_header(IpHeader::V4(v4));
    p.flow.src_port = b.v4_port;
    Ok(p)
}

/// Inbound NAT-PT: the IPv4 source gains the /96 prefix, the destination
/// is resolved through an existing binding.
pub fn natpt_translate_v4_to_v6(mut p: Packet, table: &NatBindingTable) -> Result<Packet, TransitionError> {
    if p.is_encapsulated() {
        return Err(TransitionError::NotTranslatable("tunneled packet"));
    }
    let h = match p.outer() {
        IpHeader::V4(h) => *h,
        IpHeader::V6(_) => return Err(TransitionError::NotTranslatable("not an IPv4 packet")),
    };
    let b = table
        .lookup_inbound(h.dst, p.flow.dst_port)
        .ok_or(TransitionError::NoBinding {
            addr: h.dst,
            port: p.flow.dst_port,
        })?;
    let src = natpt_embed(h.src, table.prefix()).map_err(|_| TransitionError::Config("bad prefix"))?;
    let mut v6 = Ipv6Header::new(src, b.v6, h.protocol, h.ttl, h.payload_len());
    v6.traffic_class = h.type_of_service;
    p.replace_only_header(IpHeader::V6(v6));
    p.flow.dst_port = b.v6_port;
    Ok(p)
}
