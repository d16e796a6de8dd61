//! IPv4 and IPv6 address values and their text forms.
//!
//! Parsing accepts the usual dotted-quad and colon-hex grammars, plus an
//! embedded dotted-quad in any position of an IPv6 address (so the display
//! form `2002:192.168.1.1:1::1` reads as `2002:c0a8:101:1::1`). Formatting
//! always produces the canonical form: lowercase hex, no leading zeros and
//! the longest run of two or more zero groups compressed to `::`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed address {input:?}: bad token {token:?} ({reason})")]
pub struct AddrParseError {
    pub input: String,
    pub token: String,
    pub reason: &'static str,
}

impl AddrParseError {
    fn new(input: &str, token: &str, reason: &'static str) -> Self {
        AddrParseError {
            input: input.to_string(),
            token: token.to_string(),
            reason,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipv4Address(u32);

impl Ipv4Address {
    pub const UNSPECIFIED: Ipv4Address = Ipv4Address(0);

    pub const fn new(value: u32) -> Self {
        Ipv4Address(value)
    }

    pub const fn from_octets(o: [u8; 4]) -> Self {
        Ipv4Address(u32::from_be_bytes(o))
    }

    pub const fn value(self) -> u32 {
        self.0
    }

    pub const fn octets(self) -> [u8; 4] {
        self.0.to_be_bytes()
    }
}

impl fmt::Display for Ipv4Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.octets();
        write!(f, "{a}.{b}.{c}.{d}")
    }
}

impl FromStr for Ipv4Address {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_dotted(s, s).map(Ipv4Address)
    }
}

fn parse_dotted(input: &str, text: &str) -> Result<u32, AddrParseError> {
    let mut octets = [0u8; 4];
    let mut n = 0;
    for part in text.split('.') {
        if n == 4 {
            return Err(AddrParseError::new(input, part, "too many octets"));
        }
        if part.is_empty() || part.len() > 3 || !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(AddrParseError::new(input, part, "expected decimal octet"));
        }
        let v: u16 = part.parse().expect("checked digits");
        if v > 255 {
            return Err(AddrParseError::new(input, part, "octet out of range"));
        }
        octets[n] = v as u8;
        n += 1;
    }
    if n != 4 {
        return Err(AddrParseError::new(input, text, "expected four octets"));
    }
    Ok(u32::from_be_bytes(octets))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ipv6Address(u128);

impl Ipv6Address {
    pub const UNSPECIFIED: Ipv6Address = Ipv6Address(0);

    pub const fn new(value: u128) -> Self {
        Ipv6Address(value)
    }

    pub const fn from_octets(o: [u8; 16]) -> Self {
        Ipv6Address(u128::from_be_bytes(o))
    }

    pub fn from_segments(s: [u16; 8]) -> Self {
        Ipv6Address(s.iter().fold(0u128, |acc, &g| (acc << 16) | g as u128))
    }

    pub const fn value(self) -> u128 {
        self.0
    }

    pub const fn octets(self) -> [u8; 16] {
        self.0.to_be_bytes()
    }

    pub fn segments(self) -> [u16; 8] {
        let mut out = [0u16; 8];
        for (i, g) in out.iter_mut().enumerate() {
            *g = (self.0 >> (112 - 16 * i)) as u16;
        }
        out
    }

    pub const fn is_multicast(self) -> bool {
        (self.0 >> 120) == 0xff
    }

    /// fe80::/10
    pub const fn is_link_local(self) -> bool {
        (self.0 >> 118) == (0xfe80 >> 6)
    }

    pub const fn low_u32(self) -> u32 {
        self.0 as u32
    }
}

impl fmt::Display for Ipv6Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = self.segments();
        // longest run of >= 2 zero groups, first one wins ties
        let (mut best_start, mut best_len) = (8, 0);
        let mut i = 0;
        while i < 8 {
            if g[i] == 0 {
                let start = i;
                while i < 8 && g[i] == 0 {
                    i += 1;
                }
                if i - start > best_len {
                    best_start = start;
                    best_len = i - start;
                }
            } else {
                i += 1;
            }
        }
        if best_len < 2 {
            best_start = 8;
            best_len = 0;
        }
        let mut i = 0;
        while i < 8 {
            if i == best_start {
                f.write_str("::")?;
                i += best_len;
                continue;
            }
            if i > 0 && i != best_start + best_len {
                f.write_str(":")?;
            }
            write!(f, "{:x}", g[i])?;
            i += 1;
        }
        Ok(())
    }
}

impl FromStr for Ipv6Address {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(AddrParseError::new(s, s, "empty address"));
        }
        let (head, tail) = match s.find("::") {
            Some(pos) => {
                let rest = &s[pos + 2..];
                if rest.contains("::") {
                    return Err(AddrParseError::new(s, "::", "more than one '::'"));
                }
                (&s[..pos], Some(rest))
            }
            None => (s, None),
        };
        let left = parse_groups(s, head)?;
        let right = match tail {
            Some(t) => parse_groups(s, t)?,
            None => Vec::new(),
        };
        let total = left.len() + right.len();
        let mut groups = [0u16; 8];
        match tail {
            None if total != 8 => {
                return Err(AddrParseError::new(s, s, "expected eight groups"));
            }
            Some(_) if total > 7 => {
                return Err(AddrParseError::new(s, "::", "'::' with eight groups present"));
            }
            _ => {}
        }
        groups[..left.len()].copy_from_slice(&left);
        groups[8 - right.len()..].copy_from_slice(&right);
        Ok(Ipv6Address::from_segments(groups))
    }
}

fn parse_groups(input: &str, text: &str) -> Result<Vec<u16>, AddrParseError> {
    let mut out = Vec::with_capacity(8);
    if text.is_empty() {
        return Ok(out);
    }
    for tok in text.split(':') {
        if tok.is_empty() {
            return Err(AddrParseError::new(input, tok, "empty group"));
        }
        if tok.contains('.') {
            let v = parse_dotted(input, tok)?;
            out.push((v >> 16) as u16);
            out.push(v as u16);
        } else {
            if tok.len() > 4 || !tok.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(AddrParseError::new(input, tok, "expected 1-4 hex digits"));
            }
            out.push(u16::from_str_radix(tok, 16).expect("checked hex"));
        }
        if out.len() > 8 {
            return Err(AddrParseError::new(input, tok, "too many groups"));
        }
    }
    Ok(out)
}

/// Either address family, as found in scenario files and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IpAddress {
    V4(Ipv4Address),
    V6(Ipv6Address),
}

impl fmt::Display for IpAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IpAddress::V4(a) => a.fmt(f),
            IpAddress::V6(a) => a.fmt(f),
        }
    }
}

impl FromStr for IpAddress {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.contains(':') {
            s.parse().map(IpAddress::V6)
        } else {
            s.parse().map(IpAddress::V4)
        }
    }
}

pub fn parse_address(text: &str) -> Result<IpAddress, AddrParseError> {
    text.parse()
}

pub fn format_address(addr: IpAddress) -> String {
    addr.to_string()
}

fn split_prefix(s: &str, max: u8) -> Result<(&str, u8), AddrParseError> {
    let (addr, len) = s
        .split_once('/')
        .ok_or_else(|| AddrParseError::new(s, s, "missing '/len'"))?;
    let len: u8 = len
        .parse()
        .ok()
        .filter(|&l| l <= max)
        .ok_or_else(|| AddrParseError::new(s, len, "bad prefix length"))?;
    Ok((addr, len))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ipv4Prefix {
    pub network: Ipv4Address,
    pub len: u8,
}

impl Ipv4Prefix {
    pub fn new(addr: Ipv4Address, len: u8) -> Self {
        assert!(len <= 32);
        let mask = if len == 0 { 0 } else { u32::MAX << (32 - len) };
        Ipv4Prefix {
            network: Ipv4Address(addr.0 & mask),
            len,
        }
    }

    pub fn contains(&self, addr: Ipv4Address) -> bool {
        Ipv4Prefix::new(addr, self.len).network == self.network
    }

    /// The `n`th address inside the prefix (network address is `n = 0`).
    pub fn nth(&self, n: u32) -> Option<Ipv4Address> {
        let size = if self.len == 0 {
            u64::MAX
        } else {
            1u64 << (32 - self.len)
        };
        (u64::from(n) < size).then(|| Ipv4Address(self.network.0 + n))
    }
}

impl fmt::Display for Ipv4Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network, self.len)
    }
}

impl FromStr for Ipv4Prefix {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = split_prefix(s, 32)?;
        Ok(Ipv4Prefix::new(parse_dotted(s, addr).map(Ipv4Address)?, len))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ipv6Prefix {
    pub network: Ipv6Address,
    pub len: u8,
}

impl Ipv6Prefix {
    pub fn new(addr: Ipv6Address, len: u8) -> Self {
        assert!(len <= 128);
        let mask = if len == 0 { 0 } else { u128::MAX << (128 - len) };
        Ipv6Prefix {
            network: Ipv6Address(addr.0 & mask),
            len,
        }
    }

    pub fn contains(&self, addr: Ipv6Address) -> bool {
        Ipv6Prefix::new(addr, self.len).network == self.network
    }

    pub fn nth(&self, n: u128) -> Option<Ipv6Address> {
        if self.len == 0 {
            return Some(Ipv6Address(n));
        }
        let host_bits = 128 - u32::from(self.len);
        (host_bits >= 128 || n >> host_bits == 0).then_some(Ipv6Address(self.network.0 | n))
    }
}

impl fmt::Display for Ipv6Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network, self.len)
    }
}

impl FromStr for Ipv6Prefix {
    type Err = AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = split_prefix(s, 128)?;
        let addr: Ipv6Address = addr.parse().map_err(|e: AddrParseError| AddrParseError {
            input: s.to_string(),
            ..e
        })?;
        Ok(Ipv6Prefix::new(addr, len))
    }
}
