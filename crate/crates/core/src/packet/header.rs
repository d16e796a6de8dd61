//! IPv4 and IPv6 header layouts.

use thiserror::Error;

use super::addr::{IpAddress, Ipv4Address, Ipv6Address};

pub const IPV4_HEADER_LEN: u32 = 20;
pub const IPV6_HEADER_LEN: u32 = 40;

/// IPv6 carried directly in IPv4 (6in4).
pub const PROTO_IPV6_IN_IPV4: u8 = 41;
pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

pub const FLAG_DONT_FRAGMENT: u8 = 0b010;
pub const FLAG_MORE_FRAGMENTS: u8 = 0b001;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeaderError {
    #[error("buffer too short: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("wrong IP version {0}")]
    Version(u8),
    #[error("IPv4 options unsupported (ihl {0})")]
    Options(u8),
    #[error("flow label {0:#x} exceeds 20 bits")]
    FlowLabel(u32),
}

/// Standard internet checksum: ones'-complement of the ones'-complement
/// sum of big-endian 16-bit words. An odd trailing byte is padded with zero.
pub fn internet_checksum(bytes: &[u8]) -> u16 {
    let mut sum: u32 = 0;
    let mut chunks = bytes.chunks_exact(2);
    for w in &mut chunks {
        sum += u32::from(u16::from_be_bytes([w[0], w[1]]));
    }
    if let [last] = chunks.remainder() {
        sum += u32::from(*last) << 8;
    }
    while sum > 0xffff {
        sum = (sum & 0xffff) + (sum >> 16);
    }
    !(sum as u16)
}

/// Fixed 20-byte IPv4 header (no options).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ipv4Header {
    pub ihl: u8,
    pub type_of_service: u8,
    pub total_length: u16,
    pub identification: u16,
    /// 3 bits
    pub flags: u8,
    /// 13 bits
    pub fragment_offset: u16,
    pub ttl: u8,
    pub protocol: u8,
    pub header_checksum: u16,
    pub src: Ipv4Address,
    pub dst: Ipv4Address,
}

impl Ipv4Header {
    pub const VERSION: u8 = 4;

    /// A header for `payload_bytes` of `protocol`, with the checksum filled in.
    pub fn new(src: Ipv4Address, dst: Ipv4Address, protocol: u8, ttl: u8, payload_bytes: u32) -> Self {
        let mut h = Ipv4Header {
            ihl: 5,
            type_of_service: 0,
            total_length: (IPV4_HEADER_LEN + payload_bytes).min(u16::MAX as u32) as u16,
            identification: 0,
            flags: 0,
            fragment_offset: 0,
            ttl,
            protocol,
            header_checksum: 0,
            src,
            dst,
        };
        h.header_checksum = h.compute_checksum();
        h
    }

    pub fn to_bytes(&self) -> [u8; 20] {
        let mut b = [0u8; 20];
        b[0] = (Self::VERSION << 4) | (self.ihl & 0x0f);
        b[1] = self.type_of_service;
        b[2..4].copy_from_slice(&self.total_length.to_be_bytes());
        b[4..6].copy_from_slice(&self.identification.to_be_bytes());
        let frag = (u16::from(self.flags & 0x7) << 13) | (self.fragment_offset & 0x1fff);
        b[6..8].copy_from_slice(&frag.to_be_bytes());
        b[8] = self.ttl;
        b[9] = self.protocol;
        b[10..12].copy_from_slice(&self.header_checksum.to_be_bytes());
        b[12..16].copy_from_slice(&self.src.octets());
        b[16..20].copy_from_slice(&self.dst.octets());
        b
    }

    pub fn parse(b: &[u8]) -> Result<Self, HeaderError> {
        if b.len() < 20 {
            return Err(HeaderError::Truncated {
                need: 20,
                have: b.len(),
            });
        }
        if b[0] >> 4 != Self::VERSION {
            return Err(HeaderError::Version(b[0] >> 4));
        }
        let ihl = b[0] & 0x0f;
        if ihl != 5 {
            return Err(HeaderError::Options(ihl));
        }
        let frag = u16::from_be_bytes([b[6], b[7]]);
        Ok(Ipv4Header {
            ihl,
            type_of_service: b[1],
            total_length: u16::from_be_bytes([b[2], b[3]]),
            identification: u16::from_be_bytes([b[4], b[5]]),
            flags: (frag >> 13) as u8,
            fragment_offset: frag & 0x1fff,
            ttl: b[8],
            protocol: b[9],
            header_checksum: u16::from_be_bytes([b[10], b[11]]),
            src: Ipv4Address::from_octets([b[12], b[13], b[14], b[15]]),
            dst: Ipv4Address::from_octets([b[16], b[17], b[18], b[19]]),
        })
    }

    /// Checksum over the serialized header with the checksum field zeroed.
    pub fn compute_checksum(&self) -> u16 {
        let mut h = *self;
        h.header_checksum = 0;
        internet_checksum(&h.to_bytes())
    }

    pub fn verify_checksum(&self) -> bool {
        internet_checksum(&self.to_bytes()) == 0
    }

    pub fn refresh_checksum(&mut self) {
        self.header_checksum = self.compute_checksum();
    }

    pub fn payload_len(&self) -> u32 {
        u32::from(self.total_length).saturating_sub(IPV4_HEADER_LEN)
    }

    pub fn is_fragment(&self) -> bool {
        self.flags & FLAG_MORE_FRAGMENTS != 0 || self.fragment_offset != 0
    }
}

/// 20-bit IPv6 flow label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FlowLabel(u32);

impl FlowLabel {
    pub const MAX: u32 = (1 << 20) - 1;

    pub fn new(v: u32) -> Result<Self, HeaderError> {
        if v > Self::MAX {
            Err(HeaderError::FlowLabel(v))
        } else {
            Ok(FlowLabel(v))
        }
    }

    pub const fn value(self) -> u32 {
        self.0
    }
}

/// Fixed 40-byte IPv6 header; extension headers are not modeled, so
/// `next_header` names the payload protocol directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ipv6Header {
    pub traffic_class: u8,
    pub flow_label: FlowLabel,
    pub payload_length: u16,
    pub next_header: u8,
    pub hop_limit: u8,
    pub src: Ipv6Address,
    pub dst: Ipv6Address,
}

impl Ipv6Header {
    pub const VERSION: u8 = 6;

    pub fn new(src: Ipv6Address, dst: Ipv6Address, next_header: u8, hop_limit: u8, payload_bytes: u32) -> Self {
        Ipv6Header {
            traffic_class: 0,
            flow_label: FlowLabel::default(),
            payload_length: payload_bytes.min(u16::MAX as u32) as u16,
            next_header,
            hop_limit,
            src,
            dst,
        }
    }

    pub fn to_bytes(&self) -> [u8; 40] {
        let mut b = [0u8; 40];
        let word = (u32::from(Self::VERSION) << 28) | (u32::from(self.traffic_class) << 20) | self.flow_label.value();
        b[0..4].copy_from_slice(&word.to_be_bytes());
        b[4..6].copy_from_slice(&self.payload_length.to_be_bytes());
        b[6] = self.next_header;
        b[7] = self.hop_limit;
        b[8..24].copy_from_slice(&self.src.octets());
        b[24..40].copy_from_slice(&self.dst.octets());
        b
    }

    pub fn parse(b: &[u8]) -> Result<Self, HeaderError> {
        if b.len() < 40 {
            return Err(HeaderError::Truncated {
                need: 40,
                have: b.len(),
            });
        }
        let word = u32::from_be_bytes([b[0], b[1], b[2], b[3]]);
        let version = (word >> 28) as u8;
        if version != Self::VERSION {
            return Err(HeaderError::Version(version));
        }
        let mut src = [0u8; 16];
        let mut dst = [0u8; 16];
        src.copy_from_slice(&b[8..24]);
        dst.copy_from_slice(&b[24..40]);
        Ok(Ipv6Header {
            traffic_class: (word >> 20) as u8,
            flow_label: FlowLabel(word & FlowLabel::MAX),
            payload_length: u16::from_be_bytes([b[4], b[5]]),
            next_header: b[6],
            hop_limit: b[7],
            src: Ipv6Address::from_octets(src),
            dst: Ipv6Address::from_octets(dst),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IpHeader {
    V4(Ipv4Header),
    V6(Ipv6Header),
}

impl IpHeader {
    pub fn size(&self) -> u32 {
        match self {
            IpHeader::V4(_) => IPV4_HEADER_LEN,
            IpHeader::V6(_) => IPV6_HEADER_LEN,
        }
    }

    pub fn hop_limit(&self) -> u8 {
        match self {
            IpHeader::V4(h) => h.ttl,
            IpHeader::V6(h) => h.hop_limit,
        }
    }

    pub fn src(&self) -> IpAddress {
        match self {
            IpHeader::V4(h) => IpAddress::V4(h.src),
            IpHeader::V6(h) => IpAddress::V6(h.src),
        }
    }

    pub fn dst(&self) -> IpAddress {
        match self {
            IpHeader::V4(h) => IpAddress::V4(h.dst),
            IpHeader::V6(h) => IpAddress::V6(h.dst),
        }
    }
}
