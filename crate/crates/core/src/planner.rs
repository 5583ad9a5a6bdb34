//! Inbound traffic-engineering planner.
//!
//! Given ingress objectives for a stub destination, the planner first looks
//! for structural conflicts that no announcement change can resolve (two
//! objectives that must leave through one provider, or through one common
//! upstream AS). If none are found it enumerates candidate action sets in
//! ascending intervention cost, re-simulates each candidate, and returns
//! the first one whose converged forwarding meets every objective.
//!
//! Intervention cost is `(number of actions, total prepend count, action
//! list)`, compared lexicographically. The search space holds catalog LP and
//! prepend communities per (prefix, link), MED values 10 and 20 when two
//! links reach the same neighbor, and one-level more-specifics of
//! originated prefixes when an objective names one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::community::{Community, MAX_COMMUNITIES_PER_ROUTE};
use crate::engine::{ConvergedState, LinkAdvert, SimError, Simulator, TeConfig};
use crate::flow::{
    classify, diff_ingress, ingress_map, resolve_forwarding, Flow, FlowClass, FlowError,
    IngressChange, IngressMap,
};
use crate::policy::{PeerSelector, Rule};
use crate::prefix::{Asn, Prefix};
use crate::route::{export_permitted, Learned};
use crate::topology::{AsRole, LinkId, NeighborKind, Topology};

/// MED values the search may assign.
pub const MED_CHOICES: [u32; 2] = [10, 20];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Objective {
    pub flow: Flow,
    pub required_link: LinkId,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.flow, self.required_link)
    }
}

/// One change to what the destination announces. Variant order is the
/// tie-break order between equal-cost plans.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    AttachCommunity {
        prefix: Prefix,
        link: LinkId,
        community: Community,
    },
    SetMed {
        prefix: Prefix,
        link: LinkId,
        med: u32,
    },
    Withhold {
        prefix: Prefix,
        link: LinkId,
    },
    AdvertiseMoreSpecific {
        prefix: Prefix,
        link: LinkId,
    },
    Advertise {
        prefix: Prefix,
        link: LinkId,
    },
}

impl Action {
    pub fn target(&self) -> (&Prefix, &LinkId) {
        match self {
            Action::AttachCommunity { prefix, link, .. }
            | Action::SetMed { prefix, link, .. }
            | Action::Withhold { prefix, link }
            | Action::AdvertiseMoreSpecific { prefix, link }
            | Action::Advertise { prefix, link } => (prefix, link),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::AttachCommunity {
                prefix,
                link,
                community,
            } => write!(f, "attach-community {prefix} {link} {community}"),
            Action::SetMed { prefix, link, med } => write!(f, "set-med {prefix} {link} {med}"),
            Action::Withhold { prefix, link } => write!(f, "withhold {prefix} {link}"),
            Action::AdvertiseMoreSpecific { prefix, link } => {
                write!(f, "advertise-more-specific {prefix} {link}")
            }
            Action::Advertise { prefix, link } => write!(f, "advertise {prefix} {link}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_actions: usize,
    pub max_communities_per_route: usize,
    /// Candidate simulations allowed before giving up.
    pub max_evaluations: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_actions: 4,
            max_communities_per_route: MAX_COMMUNITIES_PER_ROUTE,
            max_evaluations: 250_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pivot {
    SameProvider,
    As(Asn),
}

impl fmt::Display for Pivot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pivot::SameProvider => f.write_str("same-provider"),
            Pivot::As(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfeasibilityWitness {
    pub conflicting: (Objective, Objective),
    pub pivot: Pivot,
}

impl fmt::Display for InfeasibilityWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pivot {}: {} conflicts with {}",
            self.pivot, self.conflicting.0, self.conflicting.1
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub predicted_map: IngressMap,
    /// Ingress moves relative to the baseline that no objective asked for.
    pub side_effects: Vec<IngressChange>,
    /// The scenario configures per-AS LP overrides, so path length may not
    /// be what sources decide on.
    pub lp_constraint_violated: bool,
    pub rounds_used: usize,
    pub evaluated: usize,
}

impl Plan {
    pub fn prepend_total(&self, t: &Topology) -> usize {
        self.actions.iter().map(|a| prepend_cost(t, a)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanOutcome {
    Planned(Plan),
    Infeasible(Vec<InfeasibilityWitness>),
    Exhausted { evaluated: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("unsupported granularity: objective {0} is source-prefix based, and forwarding is by destination only")]
    UnsupportedGranularity(Flow),
    #[error("objective names link `{0}`, which is down")]
    DownLink(LinkId),
    #[error("link `{link}` is not incident to AS {dest}")]
    LinkNotIncident { link: LinkId, dest: Asn },
    #[error("unknown link `{0}`")]
    UnknownLink(LinkId),
    #[error("unknown AS {0}")]
    UnknownAs(Asn),
    #[error("destination AS {0} is not a stub")]
    NotStub(Asn),
    #[error("objective for AS {found} given to planner for AS {dest}")]
    WrongDestination { dest: Asn, found: Asn },
    #[error("objective source equals destination AS {0}")]
    SourceIsDestination(Asn),
    #[error("{prefix} is not covered by any prefix AS {dest} originates")]
    UncoveredPrefix { prefix: Prefix, dest: Asn },
    #[error("objectives {0} and {1} demand different links for the same traffic")]
    Contradictory(Objective, Objective),
    #[error("no objectives given")]
    NoObjectives,
    #[error("invalid action `{action}`: {reason}")]
    InvalidAction { action: Action, reason: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Concrete (source, prefix) -> link demands with their originating objective.
type Requirements = BTreeMap<(Asn, Prefix), (LinkId, usize)>;

/// Checks objectives against the topology and expands wildcard sources.
fn requirements(
    t: &Topology,
    dest: Asn,
    objectives: &[Objective],
) -> Result<Requirements, PlanError> {
    if !t.contains_as(dest) {
        return Err(PlanError::UnknownAs(dest));
    }
    if t.role(dest) != Some(AsRole::Stub) {
        return Err(PlanError::NotStub(dest));
    }
    if objectives.is_empty() {
        return Err(PlanError::NoObjectives);
    }
    let mut out = Requirements::new();
    for (i, o) in objectives.iter().enumerate() {
        if classify(&o.flow) == FlowClass::SourcePrefixBased {
            return Err(PlanError::UnsupportedGranularity(o.flow.clone()));
        }
        if o.flow.dst_asn != dest {
            return Err(PlanError::WrongDestination {
                dest,
                found: o.flow.dst_asn,
            });
        }
        let link = t
            .links
            .get(&o.required_link)
            .ok_or_else(|| PlanError::UnknownLink(o.required_link.clone()))?;
        if !link.touches(dest) {
            return Err(PlanError::LinkNotIncident {
                link: o.required_link.clone(),
                dest,
            });
        }
        if !link.up {
            return Err(PlanError::DownLink(o.required_link.clone()));
        }
        if !t
            .originated_by(dest)
            .any(|p| p.contains(&o.flow.dst_prefix))
        {
            return Err(PlanError::UncoveredPrefix {
                prefix: o.flow.dst_prefix,
                dest,
            });
        }
        let sources: Vec<Asn> = match o.flow.src_asn {
            Some(s) if s == dest => return Err(PlanError::SourceIsDestination(s)),
            Some(s) if !t.contains_as(s) => return Err(PlanError::UnknownAs(s)),
            Some(s) => vec![s],
            None => t.ases.keys().copied().filter(|a| *a != dest).collect(),
        };
        for src in sources {
            let key = (src, o.flow.dst_prefix);
            match out.get(&key) {
                Some((l, j)) if *l != o.required_link => {
                    return Err(PlanError::Contradictory(objectives[*j].clone(), o.clone()))
                }
                Some(_) => {}
                None => {
                    out.insert(key, (o.required_link.clone(), i));
                }
            }
        }
    }
    Ok(out)
}

fn sources_of(t: &Topology, o: &Objective) -> Vec<Asn> {
    match o.flow.src_asn {
        Some(s) => vec![s],
        None => t
            .ases
            .keys()
            .copied()
            .filter(|a| *a != o.flow.dst_asn)
            .collect(),
    }
}

/// Upper bound on enumerated paths per (link, source) before the pivot test
/// gives up on that pair.
const PATH_ENUMERATION_CAP: usize = 4096;

/// Every simple export-legal AS sequence a route for `dest` can take after
/// crossing `link`, ending at `src`. `None` if the cap was hit.
fn route_paths(t: &Topology, dest: Asn, link: &LinkId, src: Asn) -> Option<Vec<Vec<Asn>>> {
    let l = t.links.get(link)?;
    let first = l.other(dest)?;
    let kind = l.kind_seen_from(first)?;
    let mut out = Vec::new();
    let mut path = vec![first];
    let mut on_path: BTreeSet<Asn> = [dest, first].into_iter().collect();

    fn walk(
        t: &Topology,
        src: Asn,
        at: Asn,
        learned: NeighborKind,
        path: &mut Vec<Asn>,
        on_path: &mut BTreeSet<Asn>,
        out: &mut Vec<Vec<Asn>>,
    ) -> bool {
        if at == src {
            out.push(path.clone());
            return out.len() <= PATH_ENUMERATION_CAP;
        }
        for adj in t.adjacencies(at) {
            if on_path.contains(&adj.neighbor)
                || !export_permitted(Learned::From(learned), adj.kind)
            {
                continue;
            }
            let next_learned = adj.kind.inverse();
            path.push(adj.neighbor);
            on_path.insert(adj.neighbor);
            let ok = walk(t, src, adj.neighbor, next_learned, path, on_path, out);
            on_path.remove(&adj.neighbor);
            path.pop();
            if !ok {
                return false;
            }
        }
        true
    }

    let complete = walk(t, src, first, kind, &mut path, &mut on_path, &mut out);
    complete.then_some(out)
}

/// Pairs of objectives that no announcement change can satisfy together.
///
/// Two objectives on the same prefix that require different links conflict
/// when both links end at the same provider, or when one AS (other than the
/// two sources and the destination) lies on every export-legal path from
/// each source to its required link. Every reported witness is a true
/// conflict; not every conflict is found.
pub fn common_upstream_check(t: &Topology, objectives: &[Objective]) -> Vec<InfeasibilityWitness> {
    let mut out = Vec::new();
    for (i, a) in objectives.iter().enumerate() {
        for b in &objectives[i + 1..] {
            if a.flow.dst_prefix != b.flow.dst_prefix
                || a.flow.dst_asn != b.flow.dst_asn
                || a.required_link == b.required_link
            {
                continue;
            }
            let dest = a.flow.dst_asn;
            let (Some(la), Some(lb)) =
                (t.links.get(&a.required_link), t.links.get(&b.required_link))
            else {
                continue;
            };
            let (Some(pa), Some(pb)) = (la.other(dest), lb.other(dest)) else {
                continue;
            };
            if pa == pb {
                out.push(InfeasibilityWitness {
                    conflicting: (a.clone(), b.clone()),
                    pivot: Pivot::SameProvider,
                });
                continue;
            }
            if let Some(pivot) = find_pivot(t, dest, a, b) {
                out.push(InfeasibilityWitness {
                    conflicting: (a.clone(), b.clone()),
                    pivot: Pivot::As(pivot),
                });
            }
        }
    }
    out
}

fn find_pivot(t: &Topology, dest: Asn, a: &Objective, b: &Objective) -> Option<Asn> {
    for sa in sources_of(t, a) {
        let Some(paths_a) = route_paths(t, dest, &a.required_link, sa) else {
            continue;
        };
        if paths_a.is_empty() {
            continue;
        }
        for sb in sources_of(t, b) {
            if sa == sb {
                continue;
            }
            let Some(paths_b) = route_paths(t, dest, &b.required_link, sb) else {
                continue;
            };
            if paths_b.is_empty() {
                continue;
            }
            let excluded = [sa, sb, dest];
            let mut common: BTreeSet<Asn> = paths_a[0]
                .iter()
                .copied()
                .filter(|x| !excluded.contains(x))
                .collect();
            for p in paths_a.iter().chain(&paths_b) {
                let set: BTreeSet<Asn> = p.iter().copied().collect();
                common.retain(|x| set.contains(x));
            }
            // Where traffic from source a first meets traffic from source b.
            if let Some(x) = paths_a[0].iter().rev().find(|x| common.contains(x)) {
                return Some(*x);
            }
        }
    }
    None
}

fn prepend_cost(t: &Topology, action: &Action) -> usize {
    let Action::AttachCommunity {
        link, community, ..
    } = action
    else {
        return 0;
    };
    let Some(l) = t.links.get(link) else {
        return 0;
    };
    [l.endpoint_a, l.endpoint_b]
        .iter()
        .filter_map(|a| t.catalogs.get(a))
        .find_map(|cat| match cat.rule(community) {
            Some(Rule::Prepend(_, n)) => Some(usize::from(n)),
            _ => None,
        })
        .unwrap_or(0)
}

/// Checks every action against the topology and the rest of the set.
pub fn validate_actions(
    t: &Topology,
    dest: Asn,
    base: &TeConfig,
    actions: &[Action],
) -> Result<(), PlanError> {
    let invalid = |a: &Action, reason: String| PlanError::InvalidAction {
        action: a.clone(),
        reason,
    };
    let more_specifics: BTreeSet<(Prefix, LinkId)> = actions
        .iter()
        .filter_map(|a| match a {
            Action::AdvertiseMoreSpecific { prefix, link } => Some((*prefix, link.clone())),
            _ => None,
        })
        .collect();
    let withheld: BTreeSet<(Prefix, LinkId)> = actions
        .iter()
        .filter_map(|a| match a {
            Action::Withhold { prefix, link } => Some((*prefix, link.clone())),
            _ => None,
        })
        .collect();

    for a in actions {
        let (prefix, link) = a.target();
        let l = t
            .links
            .get(link)
            .ok_or_else(|| invalid(a, format!("unknown link `{link}`")))?;
        let neighbor = l
            .other(dest)
            .ok_or_else(|| invalid(a, format!("link `{link}` is not incident to AS {dest}")))?;
        let originated = t.originated_by(dest).any(|p| p == prefix);
        let covered = t.originated_by(dest).any(|p| p.strictly_contains(prefix));
        let announced_specific = more_specifics.contains(&(*prefix, link.clone()))
            || matches!(
                base.entries.get(&(link.clone(), *prefix)),
                Some(LinkAdvert::Announce(_))
            );
        match a {
            Action::AdvertiseMoreSpecific { .. } => {
                if !covered {
                    return Err(invalid(
                        a,
                        "not a more-specific of an originated prefix".into(),
                    ));
                }
            }
            Action::Advertise { .. } | Action::Withhold { .. } => {
                if !originated && !covered {
                    return Err(invalid(
                        a,
                        "prefix not originated by the destination".into(),
                    ));
                }
            }
            Action::AttachCommunity { .. } | Action::SetMed { .. }
                if !originated && !announced_specific =>
            {
                return Err(invalid(a, "prefix is not announced on this link".into()));
            }
            Action::AttachCommunity { community, .. } => {
                let defined = t
                    .catalogs
                    .get(&neighbor)
                    .is_some_and(|cat| cat.defines(community));
                if !defined {
                    return Err(invalid(
                        a,
                        format!("community {community} is not in the catalog of AS {neighbor}"),
                    ));
                }
            }
            Action::SetMed { .. } => {}
        }
        if !matches!(a, Action::Withhold { .. }) && withheld.contains(&(*prefix, link.clone())) {
            return Err(invalid(a, "prefix is withheld on this link".into()));
        }
    }
    Ok(())
}

/// The TE config obtained by applying `actions` on top of `base`.
pub fn apply_actions(base: &TeConfig, actions: &[Action]) -> TeConfig {
    let mut cfg = base.clone();
    for a in actions {
        match a {
            Action::Advertise { prefix, link } | Action::AdvertiseMoreSpecific { prefix, link } => {
                cfg.announce(link, *prefix);
            }
            Action::Withhold { prefix, link } => cfg.withhold(link, *prefix),
            Action::AttachCommunity {
                prefix,
                link,
                community,
            } => {
                cfg.announce(link, *prefix).communities.insert(*community);
            }
            Action::SetMed { prefix, link, med } => cfg.announce(link, *prefix).med = Some(*med),
        }
    }
    cfg
}

/// Whether every (source, prefix) demand in `reqs` ingresses on its link.
fn check_requirements(
    s: &ConvergedState,
    t: &Topology,
    reqs: &Requirements,
    n_objectives: usize,
) -> Result<Vec<bool>, FlowError> {
    let mut satisfied = vec![true; n_objectives];
    for ((src, prefix), (link, idx)) in reqs {
        if !satisfied[*idx] {
            continue;
        }
        let ok = match resolve_forwarding(s, t, *src, prefix) {
            Ok(Some(path)) => path.last() == Some(link),
            Ok(None) | Err(FlowError::ForwardingLoop { .. }) => false,
            Err(e) => return Err(e),
        };
        if !ok {
            satisfied[*idx] = false;
        }
    }
    Ok(satisfied)
}

fn side_effects(
    baseline: &IngressMap,
    predicted: &IngressMap,
    reqs: &Requirements,
) -> Result<Vec<IngressChange>, FlowError> {
    Ok(diff_ingress(baseline, predicted)?
        .into_iter()
        .filter(|c| !reqs.contains_key(&(c.src, c.prefix)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub satisfied: Vec<bool>,
    pub side_effects: Vec<IngressChange>,
    pub ingress: IngressMap,
    pub rounds_used: usize,
}

impl Evaluation {
    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(|s| *s)
    }
}

/// Re-simulates `plan` from scratch and recomputes objective satisfaction
/// and side effects; nothing is taken from the plan except its actions.
pub fn evaluate_plan(
    t: &Topology,
    dest: Asn,
    base: &TeConfig,
    actions: &[Action],
    objectives: &[Objective],
) -> Result<Evaluation, PlanError> {
    let reqs = requirements(t, dest, objectives)?;
    validate_actions(t, dest, base, actions)?;
    let baseline = Simulator::new(t, base)?.run(None)?;
    let baseline_map = ingress_map(&baseline, t, dest)?;
    let cfg = apply_actions(base, actions);
    let state = Simulator::new(t, &cfg)?.run(None)?;
    let ingress = ingress_map(&state, t, dest)?;
    Ok(Evaluation {
        satisfied: check_requirements(&state, t, &reqs, objectives.len())?,
        side_effects: side_effects(&baseline_map, &ingress, &reqs)?,
        ingress,
        rounds_used: state.rounds_used,
    })
}

/// A candidate action with the exclusivity slot it occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Atom {
    action: Action,
    prepend: usize,
    slot: Slot,
    /// More-specific announcement this action depends on.
    needs: Option<(Prefix, LinkId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Lp(Prefix, LinkId),
    Prepend(Prefix, LinkId, PeerSelector),
    Med(Prefix, LinkId),
    MoreSpecific(Prefix, LinkId),
}

/// The bounded single-action search space for `dest`.
fn atoms(t: &Topology, dest: Asn, reqs: &Requirements) -> Vec<Atom> {
    let originated: BTreeSet<Prefix> = t.originated_by(dest).copied().collect();
    let wanted: BTreeSet<Prefix> = reqs.keys().map(|(_, p)| *p).collect();

    // Prefixes whose announcements can influence a wanted prefix, and
    // whether each one is a one-level more-specific we would have to add.
    let mut targets: BTreeMap<Prefix, bool> = BTreeMap::new();
    for q in &wanted {
        for o in originated.iter().filter(|o| o.contains(q)) {
            targets.insert(*o, false);
        }
        if !originated.contains(q)
            && originated
                .iter()
                .any(|o| o.strictly_contains(q) && q.len() == o.len() + 1)
        {
            targets.insert(*q, true);
        }
    }

    let links = t.adjacencies(dest);
    let mut out = Vec::new();
    for (prefix, specific) in &targets {
        for adj in &links {
            let needs = specific.then(|| (*prefix, adj.link.clone()));
            if *specific {
                out.push(Atom {
                    action: Action::AdvertiseMoreSpecific {
                        prefix: *prefix,
                        link: adj.link.clone(),
                    },
                    prepend: 0,
                    slot: Slot::MoreSpecific(*prefix, adj.link.clone()),
                    needs: None,
                });
            }
            if let Some(cat) = t.catalogs.get(&adj.neighbor) {
                let provider_neighbors = t.neighbors(adj.neighbor);
                for c in cat.lp_rules.keys() {
                    out.push(Atom {
                        action: Action::AttachCommunity {
                            prefix: *prefix,
                            link: adj.link.clone(),
                            community: *c,
                        },
                        prepend: 0,
                        slot: Slot::Lp(*prefix, adj.link.clone()),
                        needs: needs.clone(),
                    });
                }
                for (c, (sel, n)) in &cat.prepend_rules {
                    if cat.expand(sel, &provider_neighbors).is_empty() {
                        continue;
                    }
                    out.push(Atom {
                        action: Action::AttachCommunity {
                            prefix: *prefix,
                            link: adj.link.clone(),
                            community: *c,
                        },
                        prepend: usize::from(*n),
                        slot: Slot::Prepend(*prefix, adj.link.clone(), sel.clone()),
                        needs: needs.clone(),
                    });
                }
            }
            let shares_neighbor = links
                .iter()
                .any(|o| o.link != adj.link && o.neighbor == adj.neighbor);
            if shares_neighbor {
                for med in MED_CHOICES {
                    out.push(Atom {
                        action: Action::SetMed {
                            prefix: *prefix,
                            link: adj.link.clone(),
                            med,
                        },
                        prepend: 0,
                        slot: Slot::Med(*prefix, adj.link.clone()),
                        needs: needs.clone(),
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| a.action.cmp(&b.action));
    out.dedup_by(|a, b| a.action == b.action);
    out
}

fn combination_valid(base: &TeConfig, atoms: &[&Atom], budget: &Budget) -> bool {
    let mut slots = BTreeSet::new();
    for a in atoms {
        if !slots.insert(&a.slot) {
            return false;
        }
    }
    for a in atoms {
        if let Some((p, l)) = &a.needs {
            if !slots.contains(&Slot::MoreSpecific(*p, l.clone())) {
                return false;
            }
        }
    }
    let mut per_route: BTreeMap<(&Prefix, &LinkId), usize> = BTreeMap::new();
    for a in atoms {
        if let Action::AttachCommunity { prefix, link, .. } = &a.action {
            *per_route.entry((prefix, link)).or_default() += 1;
        }
    }
    per_route.into_iter().all(|((p, l), n)| {
        let existing = match base.entries.get(&(l.clone(), *p)) {
            Some(LinkAdvert::Announce(a)) => a.communities.len(),
            _ => 0,
        };
        existing + n <= budget.max_communities_per_route
    })
}

/// Calls `f` with every k-subset of `0..n` in lexicographic index order.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Searches for the cheapest action set meeting every objective for `dest`.
pub fn plan_inbound_te(
    t: &Topology,
    dest: Asn,
    base: &TeConfig,
    objectives: &[Objective],
    budget: &Budget,
) -> Result<PlanOutcome, PlanError> {
    let reqs = requirements(t, dest, objectives)?;
    let witnesses = common_upstream_check(t, objectives);
    if !witnesses.is_empty() {
        return Ok(PlanOutcome::Infeasible(witnesses));
    }

    let baseline = Simulator::new(t, base)?.run(None)?;
    let baseline_map = ingress_map(&baseline, t, dest)?;
    let atoms = atoms(t, dest, &reqs);
    let mut evaluated = 0usize;

    for k in 0..=budget.max_actions.min(atoms.len()) {
        let mut level: Vec<(usize, Vec<usize>)> = Vec::new();
        for_each_combination(atoms.len(), k, |idx| {
            let chosen: Vec<&Atom> = idx.iter().map(|&i| &atoms[i]).collect();
            if combination_valid(base, &chosen, budget) {
                let prepend = chosen.iter().map(|a| a.prepend).sum();
                level.push((prepend, idx.to_vec()));
            }
        });
        // Index order equals action order because atoms are sorted.
        level.sort();

        for (_, idx) in level {
            if evaluated >= budget.max_evaluations {
                return Ok(PlanOutcome::Exhausted { evaluated });
            }
            evaluated += 1;
            let actions: Vec<Action> = idx.iter().map(|&i| atoms[i].action.clone()).collect();
            let cfg = apply_actions(base, &actions);
            let state = match Simulator::new(t, &cfg)?.run(None) {
                Ok(s) => s,
                Err(SimError::Oscillation { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            let satisfied = check_requirements(&state, t, &reqs, objectives.len())?;
            if !satisfied.iter().all(|s| *s) {
                continue;
            }
            let predicted_map = ingress_map(&state, t, dest)?;
            return Ok(PlanOutcome::Planned(Plan {
                side_effects: side_effects(&baseline_map, &predicted_map, &reqs)?,
                predicted_map,
                actions,
                lp_constraint_violated: !t.lp_overrides.is_empty(),
                rounds_used: state.rounds_used,
                evaluated,
            }));
        }
    }
    Ok(PlanOutcome::Exhausted { evaluated })
}
