//! Provider-side ingress community policies.
//!
//! A transit provider publishes a [`PolicyCatalog`] mapping community values
//! to actions. When a customer route carrying such a value arrives, the
//! provider records the requested actions in an [`AnnotatedRoute`]
//! ([`ingress_transform`]) and executes them when exporting
//! ([`egress_apply`]): overriding local preference, suppressing
//! announcements toward selected neighbors, or prepending its own ASN extra
//! times toward selected neighbors. The provider's own communities never
//! leave its network.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::community::Community;
use crate::prefix::Asn;
use crate::route::Route;
use crate::topology::NeighborKind;

pub const MAX_PREPEND: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PeerSelector {
    SpecificAsn(Asn),
    AllUpstreams,
    RegionTag(String),
}

impl fmt::Display for PeerSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeerSelector::SpecificAsn(a) => write!(f, "{a}"),
            PeerSelector::AllUpstreams => f.write_str("all"),
            PeerSelector::RegionTag(t) => write!(f, "region:{t}"),
        }
    }
}

/// The action a single catalog community triggers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule<'a> {
    LocalPref(u32),
    Suppress(&'a PeerSelector),
    Prepend(&'a PeerSelector, u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyCatalog {
    pub owner: Asn,
    pub lp_rules: BTreeMap<Community, u32>,
    pub suppress_rules: BTreeMap<Community, PeerSelector>,
    pub prepend_rules: BTreeMap<Community, (PeerSelector, u8)>,
    pub region_of: BTreeMap<Asn, String>,
    /// Provider discards any customer update that carries communities.
    pub drops_community_updates: bool,
}

impl PolicyCatalog {
    pub fn new(owner: Asn) -> Self {
        Self {
            owner,
            lp_rules: BTreeMap::new(),
            suppress_rules: BTreeMap::new(),
            prepend_rules: BTreeMap::new(),
            region_of: BTreeMap::new(),
            drops_community_updates: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lp_rules.is_empty()
            && self.suppress_rules.is_empty()
            && self.prepend_rules.is_empty()
            && self.region_of.is_empty()
            && !self.drops_community_updates
    }

    pub fn rule(&self, c: &Community) -> Option<Rule<'_>> {
        if let Some(lp) = self.lp_rules.get(c) {
            return Some(Rule::LocalPref(*lp));
        }
        if let Some(sel) = self.suppress_rules.get(c) {
            return Some(Rule::Suppress(sel));
        }
        self.prepend_rules
            .get(c)
            .map(|(sel, n)| Rule::Prepend(sel, *n))
    }

    pub fn defines(&self, c: &Community) -> bool {
        self.rule(c).is_some()
    }

    /// Every community with a rule, ascending.
    pub fn communities(&self) -> BTreeSet<Community> {
        self.lp_rules
            .keys()
            .chain(self.suppress_rules.keys())
            .chain(self.prepend_rules.keys())
            .copied()
            .collect()
    }

    /// Catalog invariant violations, as messages.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let all = self
            .lp_rules
            .keys()
            .chain(self.suppress_rules.keys())
            .chain(self.prepend_rules.keys());
        for c in all {
            if !seen.insert(*c) {
                out.push(format!("community {c} maps to more than one rule"));
            }
        }
        for (c, (_, n)) in &self.prepend_rules {
            if !(1..=MAX_PREPEND).contains(n) {
                out.push(format!(
                    "prepend count {n} for {c} outside 1..={MAX_PREPEND}"
                ));
            }
        }
        out
    }

    /// True when this provider would discard `route` received from a customer.
    pub fn rejects(&self, route: &Route) -> bool {
        self.drops_community_updates && !route.communities.is_empty()
    }

    /// Resolves a selector to concrete neighbor ASNs. `AllUpstreams` and
    /// region tags never include customers.
    pub fn expand(
        &self,
        selector: &PeerSelector,
        neighbors: &BTreeMap<Asn, NeighborKind>,
    ) -> BTreeSet<Asn> {
        let non_customers = neighbors
            .iter()
            .filter(|(_, k)| **k != NeighborKind::Customer)
            .map(|(a, _)| *a);
        match selector {
            PeerSelector::SpecificAsn(a) => neighbors
                .contains_key(a)
                .then_some(*a)
                .into_iter()
                .collect(),
            PeerSelector::AllUpstreams => non_customers.collect(),
            PeerSelector::RegionTag(tag) => non_customers
                .filter(|a| self.region_of.get(a) == Some(tag))
                .collect(),
        }
    }
}

/// A customer route plus the actions its communities requested from the
/// receiving provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedRoute {
    pub route: Route,
    pub lp_override: Option<u32>,
    pub suppressed_toward: BTreeSet<Asn>,
    pub prepend_schedule: BTreeMap<Asn, u8>,
}

impl AnnotatedRoute {
    pub fn plain(route: Route) -> Self {
        Self {
            route,
            lp_override: None,
            suppressed_toward: BTreeSet::new(),
            prepend_schedule: BTreeMap::new(),
        }
    }

    pub fn is_plain(&self) -> bool {
        self.lp_override.is_none()
            && self.suppressed_toward.is_empty()
            && self.prepend_schedule.is_empty()
    }
}

/// Interprets the communities of a customer route received by `cat.owner`.
///
/// Several LP communities: the lowest LP wins. Several prepend rules toward
/// one neighbor: the largest count wins. Suppression never targets
/// customers. Communities without a rule are ignored.
pub fn ingress_transform(
    cat: &PolicyCatalog,
    route: &Route,
    neighbors: &BTreeMap<Asn, NeighborKind>,
) -> AnnotatedRoute {
    let mut out = AnnotatedRoute::plain(route.clone());
    for c in &route.communities {
        match cat.rule(c) {
            Some(Rule::LocalPref(lp)) => {
                out.lp_override = Some(out.lp_override.map_or(lp, |cur| cur.min(lp)));
            }
            Some(Rule::Suppress(sel)) => {
                let targets = cat.expand(sel, neighbors);
                out.suppressed_toward.extend(
                    targets
                        .into_iter()
                        .filter(|a| neighbors.get(a) != Some(&NeighborKind::Customer)),
                );
            }
            Some(Rule::Prepend(sel, n)) => {
                for target in cat.expand(sel, neighbors) {
                    let slot = out.prepend_schedule.entry(target).or_insert(n);
                    *slot = (*slot).max(n);
                }
            }
            None => {}
        }
    }
    out
}

/// Builds the route `provider` sends to `neighbor`, or `None` if the route
/// is suppressed toward it. The provider's ASN is prepended once plus any
/// scheduled extra times, its catalog's communities are stripped, and
/// neither LP nor MED crosses the boundary.
pub fn egress_apply(
    ar: &AnnotatedRoute,
    provider: Asn,
    catalog: Option<&PolicyCatalog>,
    neighbor: Asn,
) -> Option<Route> {
    if ar.suppressed_toward.contains(&neighbor) {
        return None;
    }
    let extra = ar.prepend_schedule.get(&neighbor).copied().unwrap_or(0);
    let mut out = crate::route::prepend_path(&ar.route, provider, 1 + usize::from(extra));
    if let Some(cat) = catalog {
        out.communities.retain(|c| !cat.defines(c));
    }
    out.local_pref = 0;
    out.med = None;
    Some(out)
}
