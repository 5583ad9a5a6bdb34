//! Classic 4-byte BGP community values.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Size of one classic community value on the wire.
pub const COMMUNITY_BYTES: usize = 4;
/// Size of one extended community value; only used for size accounting.
pub const EXTENDED_COMMUNITY_BYTES: usize = 8;
/// Upper bound on a whole BGP message.
pub const MAX_MESSAGE_BYTES: usize = 4096;
/// Communities allowed on a single route.
pub const MAX_COMMUNITIES_PER_ROUTE: usize = 64;

const _: () = assert!(MAX_COMMUNITIES_PER_ROUTE * EXTENDED_COMMUNITY_BYTES < MAX_MESSAGE_BYTES);

/// Encoded size of a community attribute value carrying `classic` 4-byte and
/// `extended` 8-byte communities.
pub fn community_bytes(classic: usize, extended: usize) -> usize {
    classic * COMMUNITY_BYTES + extended * EXTENDED_COMMUNITY_BYTES
}

/// A community rendered as `high:low`, where `high` is conventionally the
/// ASN of the provider that defines the value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Community {
    pub high: u16,
    pub low: u16,
}

impl Community {
    pub const fn new(high: u16, low: u16) -> Self {
        Self { high, low }
    }

    pub fn to_u32(self) -> u32 {
        (u32::from(self.high) << 16) | u32::from(self.low)
    }
}

impl fmt::Display for Community {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.high, self.low)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommunityError {
    #[error("malformed community `{0}`, expected <high>:<low>")]
    Malformed(String),
    #[error("community component `{0}` exceeds 65535")]
    Overflow(String),
}

impl FromStr for Community {
    type Err = CommunityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (high, low) = s
            .split_once(':')
            .ok_or_else(|| CommunityError::Malformed(s.to_string()))?;
        Ok(Self {
            high: component(high, s)?,
            low: component(low, s)?,
        })
    }
}

fn component(part: &str, whole: &str) -> Result<u16, CommunityError> {
    if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(CommunityError::Malformed(whole.to_string()));
    }
    // Digits only, so the sole failure mode left is magnitude.
    part.parse::<u16>()
        .map_err(|_| CommunityError::Overflow(part.to_string()))
}

pub fn parse_community(text: &str) -> Result<Community, CommunityError> {
    text.parse()
}
