//! Packets as they move through the simulator: a short header stack plus a
//! payload byte count. Payload contents are never modeled.

mod addr;
mod header;

pub use addr::{
    format_address, parse_address, AddrParseError, IpAddress, Ipv4Address, Ipv4Prefix, Ipv6Address, Ipv6Prefix,
};
pub use header::{
    internet_checksum, FlowLabel, HeaderError, IpHeader, Ipv4Header, Ipv6Header, FLAG_DONT_FRAGMENT,
    FLAG_MORE_FRAGMENTS, IPV4_HEADER_LEN, IPV6_HEADER_LEN, PROTO_IPV6_IN_IPV4, PROTO_TCP, PROTO_UDP,
};

use arrayvec::ArrayVec;

use crate::time::SimTime;

pub const DEFAULT_HOP_LIMIT: u8 = 64;

/// Transport-level identity of the flow a packet belongs to.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FlowMeta {
    pub id: u64,
    pub src_port: u16,
    pub dst_port: u16,
}

/// Header stack is outermost first and holds one header, or two when an
/// IPv6 packet is tunneled inside IPv4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    headers: ArrayVec<IpHeader, 2>,
    pub payload_bytes: u32,
    pub flow: FlowMeta,
    pub created_at: SimTime,
}

impl Packet {
    pub fn new(header: IpHeader, payload_bytes: u32, flow: FlowMeta, created_at: SimTime) -> Self {
        let mut headers = ArrayVec::new();
        headers.push(header);
        Packet {
            headers,
            payload_bytes,
            flow,
            created_at,
        }
    }

    pub fn headers(&self) -> &[IpHeader] {
        &self.headers
    }

    pub fn outer(&self) -> &IpHeader {
        &self.headers[0]
    }

    pub fn outer_mut(&mut self) -> &mut IpHeader {
        &mut self.headers[0]
    }

    /// Innermost (end-to-end) header.
    pub fn inner(&self) -> &IpHeader {
        self.headers.last().expect("packet has a header")
    }

    pub fn inner_mut(&mut self) -> &mut IpHeader {
        self.headers.last_mut().expect("packet has a header")
    }

    pub fn is_encapsulated(&self) -> bool {
        self.headers.len() == 2
    }

    /// Returns `false` (and leaves the packet alone) if it already carries
    /// two headers.
    pub(crate) fn push_outer(&mut self, h: IpHeader) -> bool {
        if self.headers.is_full() {
            return false;
        }
        self.headers.insert(0, h);
        true
    }

    pub(crate) fn pop_outer(&mut self) -> Option<IpHeader> {
        (self.headers.len() > 1).then(|| self.headers.remove(0))
    }

    pub(crate) fn replace_only_header(&mut self, h: IpHeader) {
        self.headers.clear();
        self.headers.push(h);
    }

    pub fn on_wire_size(&self) -> u32 {
        on_wire_size(self)
    }
}

pub fn on_wire_size(p: &Packet) -> u32 {
    p.headers.iter().map(IpHeader::size).sum::<u32>() + p.payload_bytes
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HopOutcome {
    Forward(Packet),
    Discard(Packet),
}

/// One router hop: decrements the outermost TTL / hop limit. A packet whose
/// counter is 1 or less on arrival is discarded instead. IPv4 checksums are
/// refreshed after the decrement.
pub fn decrement_hop(mut p: Packet) -> HopOutcome {
    let current = p.outer().hop_limit();
    if current <= 1 {
        return HopOutcome::Discard(p);
    }
    match p.outer_mut() {
        IpHeader::V4(h) => {
            h.ttl -= 1;
            h.refresh_checksum();
        }
        IpHeader::V6(h) => h.hop_limit -= 1,
    }
    HopOutcome::Forward(p)
}
