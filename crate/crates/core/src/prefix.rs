//! AS numbers and IPv4 prefixes.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

/// Autonomous system number. Zero is reserved and never a valid ASN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Asn(u32);

impl Asn {
    pub fn new(value: u32) -> Option<Self> {
        (value != 0).then_some(Self(value))
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Asn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddrError {
    #[error("invalid ASN `{0}`")]
    InvalidAsn(String),
    #[error("invalid prefix `{0}`")]
    InvalidPrefix(String),
    #[error("prefix length {0} exceeds 32")]
    LengthOutOfRange(u8),
    #[error("prefix `{0}` has host bits set")]
    HostBitsSet(String),
}

impl FromStr for Asn {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<u32>()
            .ok()
            .and_then(Asn::new)
            .ok_or_else(|| AddrError::InvalidAsn(s.to_string()))
    }
}

/// An IPv4 prefix whose host bits are guaranteed to be zero.
///
/// Ordering is by base address first, then by length, so a covering prefix
/// sorts immediately before its more-specifics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    base: u32,
    len: u8,
}

fn mask(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - u32::from(len))
    }
}

impl Prefix {
    pub fn new(base: Ipv4Addr, len: u8) -> Result<Self, AddrError> {
        if len > 32 {
            return Err(AddrError::LengthOutOfRange(len));
        }
        let raw = u32::from(base);
        if raw & !mask(len) != 0 {
            return Err(AddrError::HostBitsSet(format!("{base}/{len}")));
        }
        Ok(Self { base: raw, len })
    }

    /// Builds a prefix by clearing any host bits of `base`.
    pub fn truncating(base: Ipv4Addr, len: u8) -> Result<Self, AddrError> {
        if len > 32 {
            return Err(AddrError::LengthOutOfRange(len));
        }
        Ok(Self {
            base: u32::from(base) & mask(len),
            len,
        })
    }

    pub fn base(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.base)
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    /// Reflexive containment: `self` covers every address of `other`.
    pub fn contains(&self, other: &Prefix) -> bool {
        other.len >= self.len && other.base & mask(self.len) == self.base
    }

    /// `other` is a more-specific of `self`.
    pub fn strictly_contains(&self, other: &Prefix) -> bool {
        other.len > self.len && self.contains(other)
    }

    pub fn contains_addr(&self, addr: Ipv4Addr) -> bool {
        u32::from(addr) & mask(self.len) == self.base
    }

    /// The two halves one bit longer than `self`, or `None` for a /32.
    pub fn split(&self) -> Option<(Prefix, Prefix)> {
        if self.len == 32 {
            return None;
        }
        let len = self.len + 1;
        let hi = self.base | (1u32 << (32 - u32::from(len)));
        Some((
            Prefix {
                base: self.base,
                len,
            },
            Prefix { base: hi, len },
        ))
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base(), self.len)
    }
}

impl FromStr for Prefix {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| AddrError::InvalidPrefix(s.to_string()))?;
        let addr: Ipv4Addr = addr
            .parse()
            .map_err(|_| AddrError::InvalidPrefix(s.to_string()))?;
        let len: u8 = len
            .parse()
            .map_err(|_| AddrError::InvalidPrefix(s.to_string()))?;
        Prefix::new(addr, len)
    }
}
