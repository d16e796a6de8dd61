//! Address derivations used by the transition schemes, and classful IPv4
//! classification.

use std::fmt;

use thiserror::Error;

use crate::packet::{Ipv4Address, Ipv6Address, Ipv6Prefix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressingError {
    #[error("{0} is not inside 2002::/16")]
    NotSixToFour(Ipv6Address),
    #[error("{addr} is not inside {prefix}")]
    PrefixMismatch { addr: Ipv6Address, prefix: Ipv6Prefix },
    #[error("prefix {0} is not a /96")]
    NotSlash96(Ipv6Prefix),
}

const SIX_TO_FOUR_TAG: u128 = 0x2002;
const ISATAP_PREFIX: u128 = 0xfe80_0000_0000_0000_0000_5efe_0000_0000;
/// ::ffff:0:0/96, IPv4-mapped.
const SIIT_MAPPED: u128 = 0xffff_0000_0000;
/// ::ffff:0:0:0/96, IPv4-translated.
const SIIT_TRANSLATED: u128 = 0xffff_0000_0000_0000;

/// A 6to4 site prefix, `2002:VVVV:VVVV::/48`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SixToFourPrefix {
    pub embedded_v4: Ipv4Address,
}

impl SixToFourPrefix {
    pub fn network(&self) -> Ipv6Address {
        Ipv6Address::new((SIX_TO_FOUR_TAG << 112) | (u128::from(self.embedded_v4.value()) << 80))
    }

    pub fn as_prefix(&self) -> Ipv6Prefix {
        Ipv6Prefix::new(self.network(), 48)
    }

    /// An address inside this site: `subnet` fills bits 48..64 and
    /// `interface_id` the low 64 bits.
    pub fn address(&self, subnet: u16, interface_id: u64) -> Ipv6Address {
        Ipv6Address::new(self.network().value() | (u128::from(subnet) << 64) | u128::from(interface_id))
    }

    pub fn of(addr: Ipv6Address) -> Result<Self, AddressingError> {
        extract_6to4_v4(addr).map(|embedded_v4| SixToFourPrefix { embedded_v4 })
    }
}

impl fmt::Display for SixToFourPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/48", self.network())
    }
}

pub fn is_6to4(addr: Ipv6Address) -> bool {
    addr.value() >> 112 == SIX_TO_FOUR_TAG
}

pub fn derive_6to4_prefix(v4: Ipv4Address) -> SixToFourPrefix {
    SixToFourPrefix { embedded_v4: v4 }
}

pub fn extract_6to4_v4(addr: Ipv6Address) -> Result<Ipv4Address, AddressingError> {
    if !is_6to4(addr) {
        return Err(AddressingError::NotSixToFour(addr));
    }
    Ok(Ipv4Address::new((addr.value() >> 80) as u32))
}

/// Link-local ISATAP address `fe80::5efe:VVVV:VVVV`.
pub fn make_isatap_address(v4: Ipv4Address) -> Ipv6Address {
    Ipv6Address::new(ISATAP_PREFIX | u128::from(v4.value()))
}

/// IPv4-mapped form `::ffff:a.b.c.d`, used for IPv4-only hosts.
pub fn siit_v4_mapped(v4: Ipv4Address) -> Ipv6Address {
    Ipv6Address::new(SIIT_MAPPED | u128::from(v4.value()))
}

/// IPv4-translated form `::ffff:0:a.b.c.d`, used for IPv6 hosts that own
/// an IPv4 address.
pub fn siit_v4_translated(v4: Ipv4Address) -> Ipv6Address {
    Ipv6Address::new(SIIT_TRANSLATED | u128::from(v4.value()))
}

pub fn siit_mapped_prefix() -> Ipv6Prefix {
    Ipv6Prefix::new(Ipv6Address::new(SIIT_MAPPED), 96)
}

pub fn siit_translated_prefix() -> Ipv6Prefix {
    Ipv6Prefix::new(Ipv6Address::new(SIIT_TRANSLATED), 96)
}

/// Removes a /96 prefix, returning the embedded IPv4 address.
pub fn strip_prefix96(addr: Ipv6Address, prefix: Ipv6Prefix) -> Result<Ipv4Address, AddressingError> {
    if prefix.len != 96 {
        return Err(AddressingError::NotSlash96(prefix));
    }
    if !prefix.contains(addr) {
        return Err(AddressingError::PrefixMismatch { addr, prefix });
    }
    Ok(Ipv4Address::new(addr.low_u32()))
}

pub fn natpt_embed(v4: Ipv4Address, prefix: Ipv6Prefix) -> Result<Ipv6Address, AddressingError> {
    if prefix.len != 96 {
        return Err(AddressingError::NotSlash96(prefix));
    }
    Ok(Ipv6Address::new(prefix.network.value() | u128::from(v4.value())))
}

pub fn natpt_strip(addr: Ipv6Address, prefix: Ipv6Prefix) -> Result<Ipv4Address, AddressingError> {
    strip_prefix96(addr, prefix)
}

/// Classful IPv4 address classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AddressClass {
    A,
    B,
    C,
    /// multicast
    D,
    /// reserved
    E,
}

impl fmt::Display for AddressClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AddressClass::A => "A",
            AddressClass::B => "B",
            AddressClass::C => "C",
            AddressClass::D => "D",
            AddressClass::E => "E",
        };
        f.write_str(s)
    }
}

pub fn classify_v4(v4: Ipv4Address) -> AddressClass {
    match (v4.value() >> 28) as u8 {
        0b0000..=0b0111 => AddressClass::A,
        0b1000..=0b1011 => AddressClass::B,
        0b1100..=0b1101 => AddressClass::C,
        0b1110 => AddressClass::D,
        _ => AddressClass::E,
    }
}
