//! Routes and the per-AS decision process.

use std::cmp::{Ordering, Reverse};
use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::community::Community;
use crate::prefix::{Asn, Prefix};
use crate::topology::{LinkId, NeighborKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LearnedOn {
    Local,
    Link(LinkId),
}

impl LearnedOn {
    pub fn link(&self) -> Option<&LinkId> {
        match self {
            LearnedOn::Local => None,
            LearnedOn::Link(l) => Some(l),
        }
    }
}

impl fmt::Display for LearnedOn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnedOn::Local => f.write_str("local"),
            LearnedOn::Link(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Route {
    pub prefix: Prefix,
    /// Most recent hop first; the last element is the origin.
    pub as_path: Vec<Asn>,
    pub local_pref: u32,
    pub med: Option<u32>,
    pub communities: BTreeSet<Community>,
    pub learned_on: LearnedOn,
    pub origin_as: Asn,
}

impl Route {
    /// A locally originated route: empty path, nothing learned.
    pub fn local(prefix: Prefix, origin: Asn) -> Self {
        Self {
            prefix,
            as_path: Vec::new(),
            local_pref: default_local_pref(NeighborKind::Customer),
            med: None,
            communities: BTreeSet::new(),
            learned_on: LearnedOn::Local,
            origin_as: origin,
        }
    }

    pub fn is_local(&self) -> bool {
        self.learned_on == LearnedOn::Local
    }

    pub fn first_hop(&self) -> Option<Asn> {
        self.as_path.first().copied()
    }

    pub fn path_contains(&self, asn: Asn) -> bool {
        self.as_path.contains(&asn)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("cannot compare routes for different prefixes {0} and {1}")]
    PrefixMismatch(Prefix, Prefix),
}

/// Default local preference assigned on receipt, by what the sender is to
/// the receiver. Customer routes beat peer routes beat provider routes.
pub fn default_local_pref(kind: NeighborKind) -> u32 {
    match kind {
        NeighborKind::Customer => 200,
        NeighborKind::Peer => 100,
        NeighborKind::Provider => 50,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preference {
    First,
    Second,
    Equal,
}

type RankKey<'a> = (bool, Reverse<u32>, usize, Option<Asn>, u32, &'a LearnedOn);

/// Sort key equivalent to the decision steps: local routes first, then
/// higher LP, shorter path, lower first-hop ASN, lower MED (missing = 0),
/// then the smaller link id. MED sits after the first-hop ASN in the key,
/// which is the same as comparing it only between routes from one neighbor.
fn rank_key(r: &Route) -> RankKey<'_> {
    (
        !r.is_local(),
        Reverse(r.local_pref),
        r.as_path.len(),
        r.first_hop(),
        r.med.unwrap_or(0),
        &r.learned_on,
    )
}

/// Ranks two candidates for the same prefix.
pub fn compare_routes(r1: &Route, r2: &Route) -> Result<Preference, RouteError> {
    if r1.prefix != r2.prefix {
        return Err(RouteError::PrefixMismatch(r1.prefix, r2.prefix));
    }
    Ok(match rank_key(r1).cmp(&rank_key(r2)) {
        Ordering::Less => Preference::First,
        Ordering::Greater => Preference::Second,
        Ordering::Equal => Preference::Equal,
    })
}

/// The decision-process winner among candidates of one prefix.
pub fn select_best<'a, I>(candidates: I) -> Option<&'a Route>
where
    I: IntoIterator<Item = &'a Route>,
{
    candidates
        .into_iter()
        .min_by(|a, b| rank_key(a).cmp(&rank_key(b)))
}

/// Where the exporting AS learned the route it is about to send.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Learned {
    Local,
    From(NeighborKind),
}

/// Valley-free export rule. Customer-learned and local routes go to
/// everyone; peer- and provider-learned routes only go to customers.
pub fn export_permitted(learned: Learned, to: NeighborKind) -> bool {
    match learned {
        Learned::Local | Learned::From(NeighborKind::Customer) => true,
        Learned::From(NeighborKind::Peer | NeighborKind::Provider) => to == NeighborKind::Customer,
    }
}

/// Inserts `who` `n` times at the front of the AS path.
pub fn prepend_path(r: &Route, who: Asn, n: usize) -> Route {
    let mut out = r.clone();
    out.as_path.splice(0..0, std::iter::repeat_n(who, n));
    out
}
