//! Synchronous-round route propagation to a fixed point.
//!
//! Round N recomputes every AS's Adj-RIB-In from the Loc-RIBs of round N-1,
//! then reselects. Each round depends only on the previous snapshot, so the
//! outcome is independent of AS iteration order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::community::{Community, MAX_COMMUNITIES_PER_ROUTE};
use crate::policy::{egress_apply, ingress_transform, AnnotatedRoute, PeerSelector};
use crate::prefix::{Asn, Prefix};
use crate::route::{default_local_pref, export_permitted, select_best, Learned, LearnedOn, Route};
use crate::topology::{Adjacency, LinkId, NeighborKind, Topology};

/// What the originating AS sends on one link for one prefix.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Announcement {
    pub communities: BTreeSet<Community>,
    pub med: Option<u32>,
    /// Extra copies of the origin ASN beyond the normal one.
    pub prepend: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkAdvert {
    Announce(Announcement),
    Withhold,
}

/// Per-(link, prefix) advertisement settings of originating ASes.
///
/// Originated prefixes are announced plainly on every incident link unless
/// an entry says otherwise. A prefix that is only covered by an origination
/// (a more-specific) is announced exactly on the links that have an entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TeConfig {
    pub entries: BTreeMap<(LinkId, Prefix), LinkAdvert>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown link `{0}`")]
    UnknownLink(LinkId),
    #[error("no endpoint of link `{link}` originates a prefix covering {prefix}")]
    NoAnnouncer { link: LinkId, prefix: Prefix },
    #[error("both endpoints of link `{link}` originate a prefix covering {prefix}")]
    AmbiguousAnnouncer { link: LinkId, prefix: Prefix },
    #[error("{count} communities on {prefix} via `{link}` exceeds the cap of {cap}")]
    TooManyCommunities {
        link: LinkId,
        prefix: Prefix,
        count: usize,
        cap: usize,
    },
    #[error("catalog of AS {owner} names AS {target}, which is not its neighbor")]
    SelectorNotNeighbor { owner: Asn, target: Asn },
}

impl TeConfig {
    /// Mutable announcement for `(link, prefix)`, turning a withhold back
    /// into a plain announcement.
    pub fn announce(&mut self, link: &LinkId, prefix: Prefix) -> &mut Announcement {
        let slot = self
            .entries
            .entry((link.clone(), prefix))
            .or_insert_with(|| LinkAdvert::Announce(Announcement::default()));
        if matches!(slot, LinkAdvert::Withhold) {
            *slot = LinkAdvert::Announce(Announcement::default());
        }
        match slot {
            LinkAdvert::Announce(a) => a,
            LinkAdvert::Withhold => unreachable!(),
        }
    }

    pub fn withhold(&mut self, link: &LinkId, prefix: Prefix) {
        self.entries
            .insert((link.clone(), prefix), LinkAdvert::Withhold);
    }

    pub fn max_prepend(&self) -> u8 {
        self.entries
            .values()
            .filter_map(|e| match e {
                LinkAdvert::Announce(a) => Some(a.prepend),
                LinkAdvert::Withhold => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// The AS on `link` that originates `prefix` or a prefix covering it.
    pub fn announcer(t: &Topology, link: &LinkId, prefix: &Prefix) -> Result<Asn, ConfigError> {
        let l = t
            .links
            .get(link)
            .ok_or_else(|| ConfigError::UnknownLink(link.clone()))?;
        let covers = |a: Asn| t.originated_by(a).any(|o| o.contains(prefix));
        match (covers(l.endpoint_a), covers(l.endpoint_b)) {
            (true, false) => Ok(l.endpoint_a),
            (false, true) => Ok(l.endpoint_b),
            (true, true) => Err(ConfigError::AmbiguousAnnouncer {
                link: link.clone(),
                prefix: *prefix,
            }),
            (false, false) => Err(ConfigError::NoAnnouncer {
                link: link.clone(),
                prefix: *prefix,
            }),
        }
    }

    pub fn validate(&self, t: &Topology) -> Result<(), ConfigError> {
        for ((link, prefix), advert) in &self.entries {
            Self::announcer(t, link, prefix)?;
            if let LinkAdvert::Announce(a) = advert {
                if a.communities.len() > MAX_COMMUNITIES_PER_ROUTE {
                    return Err(ConfigError::TooManyCommunities {
                        link: link.clone(),
                        prefix: *prefix,
                        count: a.communities.len(),
                        cap: MAX_COMMUNITIES_PER_ROUTE,
                    });
                }
            }
        }
        for (owner, cat) in &t.catalogs {
            // Down links still count: a failure must not invalidate the catalog.
            let neighbors: BTreeSet<Asn> =
                t.links.values().filter_map(|l| l.other(*owner)).collect();
            let named = cat
                .suppress_rules
                .values()
                .chain(cat.prepend_rules.values().map(|(s, _)| s));
            for sel in named {
                if let PeerSelector::SpecificAsn(target) = sel {
                    if !neighbors.contains(target) {
                        return Err(ConfigError::SelectorNotNeighbor {
                            owner: *owner,
                            target: *target,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// What `origin` sends on `link` for its local route to `prefix`.
    fn announcement(
        &self,
        t: &Topology,
        origin: Asn,
        link: &LinkId,
        prefix: &Prefix,
    ) -> Option<Announcement> {
        match self.entries.get(&(link.clone(), *prefix)) {
            Some(LinkAdvert::Withhold) => None,
            Some(LinkAdvert::Announce(a)) => Some(a.clone()),
            None => t
                .originated_by(origin)
                .any(|p| p == prefix)
                .then(Announcement::default),
        }
    }
}

/// Candidates and selection for one prefix at one AS.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrefixRib {
    pub adj_rib_in: BTreeMap<LinkId, AnnotatedRoute>,
    pub local: Option<Route>,
    pub loc_rib: Option<Route>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvergedState {
    pub ribs: BTreeMap<Asn, BTreeMap<Prefix, PrefixRib>>,
    pub rounds_used: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("topology has errors: {}", .0.join("; "))]
    InvalidTopology(Vec<String>),
    #[error(transparent)]
    InvalidConfig(#[from] ConfigError),
    #[error("no fixed point after {rounds} rounds; still changing: {}", render_pairs(.changing))]
    Oscillation {
        rounds: usize,
        changing: Vec<(Asn, Prefix)>,
    },
    #[error("unknown AS {0}")]
    UnknownAs(Asn),
}

fn render_pairs(pairs: &[(Asn, Prefix)]) -> String {
    pairs
        .iter()
        .map(|(a, p)| format!("({a}, {p})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl ConvergedState {
    /// Exact-prefix selection at `asn`.
    pub fn selected(&self, asn: Asn, prefix: &Prefix) -> Option<&Route> {
        self.ribs.get(&asn)?.get(prefix)?.loc_rib.as_ref()
    }

    /// Longest installed prefix at `asn` covering `prefix`.
    pub fn best_route(&self, asn: Asn, prefix: &Prefix) -> Result<Option<&Route>, SimError> {
        let table = self.ribs.get(&asn).ok_or(SimError::UnknownAs(asn))?;
        Ok(table
            .iter()
            .filter(|(p, _)| p.contains(prefix))
            .filter_map(|(p, rib)| rib.loc_rib.as_ref().map(|r| (p.len(), r)))
            .max_by_key(|(len, _)| *len)
            .map(|(_, r)| r))
    }

    /// (AS, prefix) pairs whose RIB differs between two states.
    pub fn changed_pairs(&self, other: &ConvergedState) -> Vec<(Asn, Prefix)> {
        let empty = BTreeMap::new();
        let mut out = BTreeSet::new();
        for asn in self.ribs.keys().chain(other.ribs.keys()) {
            let a = self.ribs.get(asn).unwrap_or(&empty);
            let b = other.ribs.get(asn).unwrap_or(&empty);
            for prefix in a.keys().chain(b.keys()) {
                if a.get(prefix) != b.get(prefix) {
                    out.insert((*asn, *prefix));
                }
            }
        }
        out.into_iter().collect()
    }

    /// Canonical text dump, sorted by AS then prefix then link.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "rounds {}", self.rounds_used);
        for (asn, table) in &self.ribs {
            let _ = writeln!(out, "as {asn}");
            for (prefix, rib) in table {
                let _ = writeln!(out, "  prefix {prefix}");
                match &rib.loc_rib {
                    Some(r) => {
                        let _ = writeln!(out, "    best {}", RouteLine(r));
                    }
                    None => {
                        let _ = writeln!(out, "    best none");
                    }
                }
                for ar in rib.adj_rib_in.values() {
                    let _ = writeln!(out, "    cand {}", RouteLine(&ar.route));
                }
            }
        }
        out
    }
}

struct RouteLine<'a>(&'a Route);

impl fmt::Display for RouteLine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.0;
        let path: Vec<String> = r.as_path.iter().map(|a| a.to_string()).collect();
        let comms: Vec<String> = r.communities.iter().map(|c| c.to_string()).collect();
        write!(
            f,
            "{} path [{}] lp {} med {} communities [{}]",
            r.learned_on,
            path.join(" "),
            r.local_pref,
            r.med.map_or_else(|| "-".to_string(), |m| m.to_string()),
            comms.join(" ")
        )
    }
}

type Ribs = BTreeMap<Asn, BTreeMap<Prefix, PrefixRib>>;

/// A propagation run over an immutable topology and TE config.
pub struct Simulator<'a> {
    topo: &'a Topology,
    cfg: &'a TeConfig,
    adjacencies: BTreeMap<Asn, Vec<Adjacency>>,
    neighbors: BTreeMap<Asn, BTreeMap<Asn, NeighborKind>>,
    locals: BTreeMap<Asn, BTreeSet<Prefix>>,
}

impl<'a> Simulator<'a> {
    pub fn new(topo: &'a Topology, cfg: &'a TeConfig) -> Result<Self, SimError> {
        let report = topo.validate();
        if report.has_errors() {
            return Err(SimError::InvalidTopology(
                report.errors().map(|f| f.message.clone()).collect(),
            ));
        }
        cfg.validate(topo)?;

        let mut locals: BTreeMap<Asn, BTreeSet<Prefix>> = topo
            .originations
            .iter()
            .map(|(a, ps)| (*a, ps.clone()))
            .collect();
        for ((link, prefix), advert) in &cfg.entries {
            if matches!(advert, LinkAdvert::Announce(_)) {
                let origin = TeConfig::announcer(topo, link, prefix)?;
                locals.entry(origin).or_default().insert(*prefix);
            }
        }

        Ok(Self {
            topo,
            cfg,
            adjacencies: topo
                .ases
                .keys()
                .map(|a| (*a, topo.adjacencies(*a)))
                .collect(),
            neighbors: topo.ases.keys().map(|a| (*a, topo.neighbors(*a))).collect(),
            locals,
        })
    }

    /// Rounds allowed before declaring oscillation.
    pub fn round_limit(&self) -> usize {
        let catalog_max = self
            .topo
            .catalogs
            .values()
            .flat_map(|c| c.prepend_rules.values().map(|(_, n)| *n))
            .max()
            .unwrap_or(0);
        let max_prepend = usize::from(catalog_max.max(self.cfg.max_prepend()));
        2 * self.topo.ases.len() + max_prepend + 4
    }

    /// State before any exchange: every AS knows only its own routes.
    pub fn initial(&self) -> ConvergedState {
        let mut ribs = Ribs::new();
        for asn in self.topo.ases.keys() {
            let table = ribs.entry(*asn).or_default();
            for prefix in self.locals.get(asn).into_iter().flatten() {
                let local = Route::local(*prefix, *asn);
                table.insert(
                    *prefix,
                    PrefixRib {
                        adj_rib_in: BTreeMap::new(),
                        loc_rib: Some(local.clone()),
                        local: Some(local),
                    },
                );
            }
        }
        ConvergedState {
            ribs,
            rounds_used: 0,
        }
    }

    /// One synchronous round.
    pub fn step(&self, prev: &ConvergedState) -> ConvergedState {
        let mut ribs = Ribs::new();
        for asn in self.topo.ases.keys() {
            let mut table: BTreeMap<Prefix, PrefixRib> = BTreeMap::new();
            for prefix in self.locals.get(asn).into_iter().flatten() {
                table.entry(*prefix).or_default().local = Some(Route::local(*prefix, *asn));
            }
            for adj in &self.adjacencies[asn] {
                let Some(sender_table) = prev.ribs.get(&adj.neighbor) else {
                    continue;
                };
                for (prefix, rib) in sender_table {
                    let Some(sent) =
                        self.export(adj.neighbor, rib, &adj.link, *asn, adj.kind.inverse())
                    else {
                        continue;
                    };
                    if let Some(ar) = self.receive(*asn, adj, sent) {
                        table
                            .entry(*prefix)
                            .or_default()
                            .adj_rib_in
                            .insert(adj.link.clone(), ar);
                    }
                }
            }
            for rib in table.values_mut() {
                rib.loc_rib = select_best(
                    rib.local
                        .iter()
                        .chain(rib.adj_rib_in.values().map(|ar| &ar.route)),
                )
                .cloned();
            }
            ribs.insert(*asn, table);
        }
        ConvergedState {
            ribs,
            rounds_used: prev.rounds_used + 1,
        }
    }

    /// Route `sender` offers `receiver` over `link`, before receiver-side
    /// processing. `receiver_kind` is what the receiver is to the sender.
    fn export(
        &self,
        sender: Asn,
        rib: &PrefixRib,
        link: &LinkId,
        receiver: Asn,
        receiver_kind: NeighborKind,
    ) -> Option<Route> {
        let best = rib.loc_rib.as_ref()?;
        match &best.learned_on {
            LearnedOn::Local => {
                let ann = self
                    .cfg
                    .announcement(self.topo, sender, link, &best.prefix)?;
                let mut out = best.clone();
                out.as_path = vec![sender; 1 + usize::from(ann.prepend)];
                out.med = ann.med;
                out.communities = ann.communities;
                out.local_pref = 0;
                Some(out)
            }
            LearnedOn::Link(in_link) => {
                let learned_kind = self.topo.links.get(in_link)?.kind_seen_from(sender)?;
                if !export_permitted(Learned::From(learned_kind), receiver_kind) {
                    return None;
                }
                let ar = rib.adj_rib_in.get(in_link)?;
                egress_apply(ar, sender, self.topo.catalogs.get(&sender), receiver)
            }
        }
    }

    fn receive(&self, receiver: Asn, adj: &Adjacency, mut route: Route) -> Option<AnnotatedRoute> {
        if route.path_contains(receiver) {
            return None;
        }
        route.learned_on = LearnedOn::Link(adj.link.clone());
        let catalog = self
            .topo
            .catalogs
            .get(&receiver)
            .filter(|_| adj.kind == NeighborKind::Customer);
        let mut ar = match catalog {
            Some(cat) if cat.rejects(&route) => return None,
            Some(cat) => ingress_transform(cat, &route, &self.neighbors[&receiver]),
            None => AnnotatedRoute::plain(route),
        };
        ar.route.local_pref = ar
            .lp_override
            .or_else(|| {
                self.topo
                    .lp_overrides
                    .get(&(receiver, adj.neighbor))
                    .copied()
            })
            .unwrap_or_else(|| default_local_pref(adj.kind));
        Some(ar)
    }

    pub fn run(&self, max_rounds: Option<usize>) -> Result<ConvergedState, SimError> {
        self.run_traced(max_rounds, |_| {})
    }

    /// Runs to a fixed point, handing every intermediate state to `trace`.
    pub fn run_traced(
        &self,
        max_rounds: Option<usize>,
        mut trace: impl FnMut(&ConvergedState),
    ) -> Result<ConvergedState, SimError> {
        let limit = max_rounds.unwrap_or_else(|| self.round_limit());
        let mut state = self.initial();
        trace(&state);
        loop {
            let next = self.step(&state);
            trace(&next);
            if next.ribs == state.ribs {
                return Ok(next);
            }
            if next.rounds_used >= limit {
                return Err(SimError::Oscillation {
                    rounds: next.rounds_used,
                    changing: state.changed_pairs(&next),
                });
            }
            state = next;
        }
    }
}

/// Simulates `t` under `cfg` until no RIB changes.
pub fn propagate_to_convergence(t: &Topology, cfg: &TeConfig) -> Result<ConvergedState, SimError> {
    Simulator::new(t, cfg)?.run(None)
}
