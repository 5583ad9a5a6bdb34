//! AS-level graph: ASes, business relationships, inter-domain links,
//! prefix originations and the policy catalogs owned by transit providers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::policy::PolicyCatalog;
use crate::prefix::{Asn, Prefix};

/// Symbolic link label such as `l1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(String);

impl LinkId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LinkId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AsRole {
    Stub,
    Transit,
}

impl fmt::Display for AsRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AsRole::Stub => "stub",
            AsRole::Transit => "transit",
        })
    }
}

/// Business relationship carried by a link. For `CustomerToProvider` the
/// link's `endpoint_a` is the customer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relationship {
    CustomerToProvider,
    PeerToPeer,
}

/// What a neighbor is to the AS looking at it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NeighborKind {
    Customer,
    Peer,
    Provider,
}

impl NeighborKind {
    pub fn inverse(self) -> Self {
        match self {
            NeighborKind::Customer => NeighborKind::Provider,
            NeighborKind::Peer => NeighborKind::Peer,
            NeighborKind::Provider => NeighborKind::Customer,
        }
    }
}

impl fmt::Display for NeighborKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeighborKind::Customer => "customer",
            NeighborKind::Peer => "peer",
            NeighborKind::Provider => "provider",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterdomainLink {
    pub id: LinkId,
    pub endpoint_a: Asn,
    pub endpoint_b: Asn,
    pub relationship: Relationship,
    pub up: bool,
}

impl InterdomainLink {
    pub fn touches(&self, asn: Asn) -> bool {
        self.endpoint_a == asn || self.endpoint_b == asn
    }

    /// The endpoint opposite `asn`, if `asn` is on this link.
    pub fn other(&self, asn: Asn) -> Option<Asn> {
        if self.endpoint_a == asn {
            Some(self.endpoint_b)
        } else if self.endpoint_b == asn {
            Some(self.endpoint_a)
        } else {
            None
        }
    }

    /// The role of the far end as seen from `asn`.
    pub fn kind_seen_from(&self, asn: Asn) -> Option<NeighborKind> {
        let kind = match self.relationship {
            Relationship::PeerToPeer => NeighborKind::Peer,
            Relationship::CustomerToProvider if asn == self.endpoint_a => NeighborKind::Provider,
            Relationship::CustomerToProvider => NeighborKind::Customer,
        };
        self.touches(asn).then_some(kind)
    }
}

/// A directed adjacency: one up link as seen from one of its endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    pub link: LinkId,
    pub neighbor: Asn,
    pub kind: NeighborKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topology {
    pub ases: BTreeMap<Asn, Option<AsRole>>,
    pub links: BTreeMap<LinkId, InterdomainLink>,
    pub originations: BTreeMap<Asn, BTreeSet<Prefix>>,
    pub catalogs: BTreeMap<Asn, PolicyCatalog>,
    /// Per-AS local-preference overrides keyed by (receiving AS, neighbor AS).
    pub lp_overrides: BTreeMap<(Asn, Asn), u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("unknown AS {0}")]
    UnknownAs(Asn),
    #[error("AS {0} paired with itself")]
    SelfPair(Asn),
    #[error("unknown link `{0}`")]
    UnknownLink(LinkId),
}

impl Topology {
    pub fn contains_as(&self, asn: Asn) -> bool {
        self.ases.contains_key(&asn)
    }

    pub fn role(&self, asn: Asn) -> Option<AsRole> {
        self.ases.get(&asn).copied().flatten()
    }

    pub fn link(&self, id: &LinkId) -> Result<&InterdomainLink, TopologyError> {
        self.links
            .get(id)
            .ok_or_else(|| TopologyError::UnknownLink(id.clone()))
    }

    /// Up links of `asn`, ordered by link id.
    pub fn adjacencies(&self, asn: Asn) -> Vec<Adjacency> {
        self.links
            .values()
            .filter(|l| l.up)
            .filter_map(|l| {
                Some(Adjacency {
                    link: l.id.clone(),
                    neighbor: l.other(asn)?,
                    kind: l.kind_seen_from(asn)?,
                })
            })
            .collect()
    }

    /// Distinct up-link neighbors of `asn` with their role. A pair joined by
    /// several links keeps the role of the first link.
    pub fn neighbors(&self, asn: Asn) -> BTreeMap<Asn, NeighborKind> {
        let mut out = BTreeMap::new();
        for adj in self.adjacencies(asn) {
            out.entry(adj.neighbor).or_insert(adj.kind);
        }
        out
    }

    /// One entry per up link between `a` and `b`, oriented from `a`.
    pub fn relationship_between(
        &self,
        a: Asn,
        b: Asn,
    ) -> Result<Vec<(LinkId, NeighborKind)>, TopologyError> {
        for asn in [a, b] {
            if !self.contains_as(asn) {
                return Err(TopologyError::UnknownAs(asn));
            }
        }
        if a == b {
            return Err(TopologyError::SelfPair(a));
        }
        Ok(self
            .adjacencies(a)
            .into_iter()
            .filter(|adj| adj.neighbor == b)
            .map(|adj| (adj.link, adj.kind))
            .collect())
    }

    /// The AS originating exactly `prefix`, if any.
    pub fn originator_of(&self, prefix: &Prefix) -> Option<Asn> {
        self.originations
            .iter()
            .find(|(_, set)| set.contains(prefix))
            .map(|(asn, _)| *asn)
    }

    pub fn originated_by(&self, asn: Asn) -> impl Iterator<Item = &Prefix> {
        self.originations.get(&asn).into_iter().flatten()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_topology(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Warning)
    }

    fn error(&mut self, message: String) {
        self.findings.push(Finding {
            severity: Severity::Error,
            message,
        });
    }

    fn warning(&mut self, message: String) {
        self.findings.push(Finding {
            severity: Severity::Warning,
            message,
        });
    }
}

/// Checks every structural invariant. Never fails; problems are reported as
/// findings. A cycle in the customer-to-provider digraph is only a warning.
pub fn validate_topology(t: &Topology) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (key, link) in &t.links {
        if key != &link.id {
            report.error(format!("link keyed `{key}` carries id `{}`", link.id));
        }
        if link.endpoint_a == link.endpoint_b {
            report.error(format!(
                "link `{}` joins AS {} to itself",
                link.id, link.endpoint_a
            ));
        }
        for end in [link.endpoint_a, link.endpoint_b] {
            if !t.contains_as(end) {
                report.error(format!("link `{}` references undeclared AS {end}", link.id));
            }
        }
    }

    let mut seen: BTreeMap<Prefix, Asn> = BTreeMap::new();
    for (asn, prefixes) in &t.originations {
        if !t.contains_as(*asn) {
            report.error(format!("undeclared AS {asn} originates prefixes"));
        }
        for prefix in prefixes {
            if let Some(first) = seen.insert(*prefix, *asn) {
                report.error(format!(
                    "prefix {prefix} originated by both AS {first} and AS {asn}"
                ));
            }
        }
    }

    for (owner, catalog) in &t.catalogs {
        if catalog.owner != *owner {
            report.error(format!(
                "catalog keyed by AS {owner} names owner {}",
                catalog.owner
            ));
        }
        if !t.contains_as(*owner) {
            report.error(format!("catalog on undeclared AS {owner}"));
        } else if !catalog.is_empty() && t.role(*owner) != Some(AsRole::Transit) {
            report.error(format!("catalog on non-transit AS {owner}"));
        }
        for problem in catalog.problems() {
            report.error(format!("catalog of AS {owner}: {problem}"));
        }
    }

    for (receiver, neighbor) in t.lp_overrides.keys() {
        for asn in [receiver, neighbor] {
            if !t.contains_as(*asn) {
                report.error(format!("LP override references undeclared AS {asn}"));
            }
        }
    }

    if let Some(cycle) = provider_cycle(t) {
        let rendered: Vec<String> = cycle.iter().map(|a| a.to_string()).collect();
        report.warning(format!(
            "customer-provider cycle {}; convergence not guaranteed",
            rendered.join(" -> ")
        ));
    }

    report
}

/// Finds one cycle in the customer -> provider digraph by depth-first search.
fn provider_cycle(t: &Topology) -> Option<Vec<Asn>> {
    let mut providers: BTreeMap<Asn, BTreeSet<Asn>> = BTreeMap::new();
    for link in t.links.values() {
        if link.relationship == Relationship::CustomerToProvider {
            providers
                .entry(link.endpoint_a)
                .or_default()
                .insert(link.endpoint_b);
        }
    }

    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }

    fn visit(
        node: Asn,
        providers: &BTreeMap<Asn, BTreeSet<Asn>>,
        marks: &mut BTreeMap<Asn, Mark>,
        stack: &mut Vec<Asn>,
    ) -> Option<Vec<Asn>> {
        marks.insert(node, Mark::Open);
        stack.push(node);
        for &next in providers.get(&node).into_iter().flatten() {
            match marks.get(&next) {
                Some(Mark::Open) => {
                    let start = stack.iter().position(|&a| a == next).unwrap_or(0);
                    let mut cycle = stack[start..].to_vec();
                    cycle.push(next);
                    return Some(cycle);
                }
                Some(Mark::Done) => {}
                None => {
                    if let Some(c) = visit(next, providers, marks, stack) {
                        return Some(c);
                    }
                }
            }
        }
        stack.pop();
        marks.insert(node, Mark::Done);
        None
    }

    let mut marks = BTreeMap::new();
    for &start in providers.keys() {
        if !marks.contains_key(&start) {
            let mut stack = Vec::new();
            if let Some(c) = visit(start, &providers, &mut marks, &mut stack) {
                return Some(c);
            }
        }
    }
    None
}
