//! Random instance generators and brute-force oracles shared by the
//! integration tests. Nothing here calls into the engine's decision or
//! export code.

#![allow(dead_code)]


use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use inbound_te::policy::{PeerSelector, PolicyCatalog};
use inbound_te::route::LearnedOn;
use inbound_te::{
    Action, AsRole, Asn, Community, ConvergedState, Flow, InterdomainLink, LinkAdvert, LinkId,
    Objective, Prefix, Relationship, Scenario, Simulator, TeConfig, Topology,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn asn(n: u32) -> Asn {
    Asn::new(n).unwrap()
}

pub fn pfx(s: &str) -> Prefix {
    s.parse().unwrap()
}

pub fn lid(s: &str) -> LinkId {
    LinkId::new(s)
}

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn load(name: &str) -> Scenario {
    let path = scenario_dir().join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    inbound_te::parse_scenario(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn golden(rel: &str) -> String {
    let path = scenario_dir().join("golden").join(rel);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"))
}

pub fn converge(t: &Topology, cfg: &TeConfig) -> ConvergedState {
    Simulator::new(t, cfg).unwrap().run(None).unwrap()
}

/// Shape knobs for [`random_topology`].
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub min_ases: usize,
    pub max_ases: usize,
    pub link_density: f64,
    pub peer_share: f64,
    pub down_share: f64,
    pub parallel_share: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            min_ases: 2,
            max_ases: 6,
            link_density: 0.5,
            peer_share: 0.25,
            down_share: 0.05,
            parallel_share: 0.1,
        }
    }
}

/// A random topology whose customer-provider graph is acyclic: a link
/// between positions i < j always makes the later AS the customer.
/// Each AS originates its own /16 with probability one half; at least one
/// AS originates.
pub fn random_topology(rng: &mut TestRng, shape: Shape) -> Topology {
    let n = rng.gen_range(shape.min_ases..=shape.max_ases);
    let mut pool: Vec<u32> = (1..=40).map(|i| i * 100).collect();
    pool.shuffle(rng);
    let ases: Vec<Asn> = pool[..n].iter().map(|v| asn(*v)).collect();

    let mut t = Topology::default();
    let mut next_link = 0;
    for i in 0..n {
        for j in i + 1..n {
            if !rng.gen_bool(shape.link_density) {
                continue;
            }
            let copies = if rng.gen_bool(shape.parallel_share) {
                2
            } else {
                1
            };
            let relationship = if rng.gen_bool(shape.peer_share) {
                Relationship::PeerToPeer
            } else {
                Relationship::CustomerToProvider
            };
            for _ in 0..copies {
                next_link += 1;
                let id = lid(&format!("k{next_link:02}"));
                t.links.insert(
                    id.clone(),
                    InterdomainLink {
                        id,
                        endpoint_a: ases[j],
                        endpoint_b: ases[i],
                        relationship,
                        up: !rng.gen_bool(shape.down_share),
                    },
                );
            }
        }
    }
    for (k, a) in ases.iter().enumerate() {
        let has_customer = t
            .links
            .values()
            .any(|l| l.relationship == Relationship::CustomerToProvider && l.endpoint_b == *a);
        let role = if has_customer {
            AsRole::Transit
        } else {
            AsRole::Stub
        };
        t.ases.insert(*a, Some(role));
        if rng.gen_bool(0.5) {
            t.originations
                .entry(*a)
                .or_default()
                .insert(pfx(&format!("10.{}.0.0/16", k + 1)));
        }
    }
    if t.originations.is_empty() {
        let a = ases[rng.gen_range(0..n)];
        let k = ases.iter().position(|x| *x == a).unwrap();
        t.originations
            .entry(a)
            .or_default()
            .insert(pfx(&format!("10.{}.0.0/16", k + 1)));
    }
    t
}

/// Random catalogs on transit ASes plus random TE attachments and LP
/// overrides, for the property suites that exercise community handling.
pub fn random_policies(rng: &mut TestRng, t: &mut Topology, with_overrides: bool) -> TeConfig {
    let transits: Vec<Asn> = t
        .ases
        .iter()
        .filter(|(_, r)| **r == Some(AsRole::Transit))
        .map(|(a, _)| *a)
        .collect();
    for owner in &transits {
        let neighbors: Vec<Asn> = t
            .links
            .values()
            .filter_map(|l| l.other(*owner))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut cat = PolicyCatalog::new(*owner);
        let high = (owner.value() % 60000) as u16;
        for low in 1..=rng.gen_range(0..=4u16) {
            let c = Community::new(high, low);
            match rng.gen_range(0..3) {
                0 => {
                    cat.lp_rules
                        .insert(c, [30, 80, 150, 250][rng.gen_range(0..4)]);
                }
                1 => {
                    let sel = random_selector(rng, &neighbors);
                    cat.prepend_rules.insert(c, (sel, rng.gen_range(1..=3)));
                }
                _ => {
                    let sel = random_selector(rng, &neighbors);
                    cat.suppress_rules.insert(c, sel);
                }
            }
        }
        if !cat.is_empty() {
            t.catalogs.insert(*owner, cat);
        }
    }
    if with_overrides {
        let pairs: Vec<(Asn, Asn)> = t
            .links
            .values()
            .map(|l| (l.endpoint_a, l.endpoint_b))
            .collect();
        for (a, b) in pairs {
            if rng.gen_bool(0.2) {
                t.lp_overrides.insert((a, b), rng.gen_range(10..300));
            }
        }
    }

    let mut cfg = TeConfig::default();
    let links: Vec<InterdomainLink> = t.links.values().cloned().collect();
    for l in links {
        for end in [l.endpoint_a, l.endpoint_b] {
            let Some(far) = l.other(end) else { continue };
            let Some(prefixes) = t.originations.get(&end) else {
                continue;
            };
            for p in prefixes.clone() {
                if !rng.gen_bool(0.4) {
                    continue;
                }
                if rng.gen_bool(0.1) {
                    cfg.withhold(&l.id, p);
                    continue;
                }
                let a = cfg.announce(&l.id, p);
                if let Some(cat) = t.catalogs.get(&far) {
                    let cs: Vec<Community> = cat.communities().into_iter().collect();
                    for c in cs {
                        if rng.gen_bool(0.4) {
                            a.communities.insert(c);
                        }
                    }
                }
                if rng.gen_bool(0.3) {
                    a.prepend = rng.gen_range(0..=3);
                }
                if rng.gen_bool(0.3) {
                    a.med = Some(rng.gen_range(0..50));
                }
            }
        }
    }
    cfg
}

fn random_selector(rng: &mut TestRng, neighbors: &[Asn]) -> PeerSelector {
    if neighbors.is_empty() || rng.gen_bool(0.3) {
        PeerSelector::AllUpstreams
    } else {
        PeerSelector::SpecificAsn(*neighbors.choose(rng).unwrap())
    }
}

// ---------------------------------------------------------------------------
// Brute-force RIB oracle for topologies without policies.

const LP_CUSTOMER: u32 = 200;
const LP_PEER: u32 = 100;
const LP_PROVIDER: u32 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rel {
    Customer,
    Peer,
    Provider,
}

/// What an AS holds for one prefix: the path (first hop first, origin
/// last, empty when the AS is the origin) and the receiving link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRoute {
    pub path: Vec<Asn>,
    pub link: Option<LinkId>,
    lp: u32,
}

struct Graph<'a> {
    t: &'a Topology,
    origin: Asn,
}

impl Graph<'_> {
    /// Up links of `a` with the far end and what the far end is to `a`.
    fn around(&self, a: Asn) -> Vec<(LinkId, Asn, Rel)> {
        self.t
            .links
            .values()
            .filter(|l| l.up)
            .filter_map(|l| {
                let far = if l.endpoint_a == a {
                    l.endpoint_b
                } else if l.endpoint_b == a {
                    l.endpoint_a
                } else {
                    return None;
                };
                let rel = match l.relationship {
                    Relationship::PeerToPeer => Rel::Peer,
                    Relationship::CustomerToProvider if l.endpoint_a == a => Rel::Provider,
                    Relationship::CustomerToProvider => Rel::Customer,
                };
                Some((l.id.clone(), far, rel))
            })
            .collect()
    }

    fn better(a: &OracleRoute, b: &OracleRoute) -> bool {
        (
            std::cmp::Reverse(a.lp),
            a.path.len(),
            a.path.first(),
            a.link.as_ref(),
        ) < (
            std::cmp::Reverse(b.lp),
            b.path.len(),
            b.path.first(),
            b.link.as_ref(),
        )
    }

    fn pick(cands: Vec<OracleRoute>) -> Option<OracleRoute> {
        let mut best: Option<OracleRoute> = None;
        for c in cands {
            if best.as_ref().is_none_or(|b| Self::better(&c, b)) {
                best = Some(c);
            }
        }
        best
    }

    fn extend(
        &self,
        a: Asn,
        via: &OracleRoute,
        link: LinkId,
        far: Asn,
        lp: u32,
    ) -> Option<OracleRoute> {
        if a == self.origin || via.path.contains(&a) {
            return None;
        }
        let mut path = vec![far];
        path.extend(&via.path);
        Some(OracleRoute {
            path,
            link: Some(link),
            lp,
        })
    }

    /// Best route `a` holds among those learned from customers (or its own).
    fn cust(&self, a: Asn) -> Option<OracleRoute> {
        if a == self.origin {
            return Some(OracleRoute {
                path: vec![],
                link: None,
                lp: u32::MAX,
            });
        }
        let cands = self
            .around(a)
            .into_iter()
            .filter(|(_, _, r)| *r == Rel::Customer)
            .filter_map(|(l, far, _)| {
                let r = self.cust(far)?;
                self.extend(a, &r, l, far, LP_CUSTOMER)
            })
            .collect();
        Self::pick(cands)
    }

    fn best(&self, a: Asn) -> Option<OracleRoute> {
        if let Some(r) = self.cust(a) {
            return Some(r);
        }
        let cands = self
            .around(a)
            .into_iter()
            .filter_map(|(l, far, rel)| match rel {
                Rel::Customer => None,
                Rel::Peer => {
                    let r = self.cust(far)?;
                    self.extend(a, &r, l, far, LP_PEER)
                }
                Rel::Provider => {
                    let r = self.best(far)?;
                    self.extend(a, &r, l, far, LP_PROVIDER)
                }
            })
            .collect();
        Self::pick(cands)
    }
}

/// Selected routes per (AS, prefix) for a policy-free topology.
pub fn oracle_ribs(t: &Topology) -> BTreeMap<(Asn, Prefix), OracleRoute> {
    let mut out = BTreeMap::new();
    for (origin, prefixes) in &t.originations {
        let g = Graph { t, origin: *origin };
        for p in prefixes {
            for a in t.ases.keys() {
                if let Some(r) = g.best(*a) {
                    out.insert((*a, *p), r);
                }
            }
        }
    }
    out
}

/// Every simple AS path (first hop first, origin last) along which a route
/// could legally travel from `origin` to `at`.
pub fn valley_free_paths(t: &Topology, origin: Asn, at: Asn) -> BTreeSet<Vec<Asn>> {
    let g = Graph { t, origin };
    let mut out = BTreeSet::new();
    // Walk from `at` toward the origin, following the traffic direction.
    // Phase 0: may still go up (toward providers); phase 1: used a peer or
    // went down, now only down.
    fn walk(g: &Graph<'_>, cur: Asn, phase: u8, seen: &mut Vec<Asn>, out: &mut BTreeSet<Vec<Asn>>) {
        if cur == g.origin {
            out.insert(seen[1..].to_vec());
            return;
        }
        for (_, far, rel) in g.around(cur) {
            if seen.contains(&far) {
                continue;
            }
            let next = match (phase, rel) {
                (0, Rel::Provider) => 0,
                (0, Rel::Peer) => 1,
                (_, Rel::Customer) => 1,
                _ => continue,
            };
            seen.push(far);
            walk(g, far, next, seen, out);
            seen.pop();
        }
    }
    if at == origin {
        out.insert(vec![]);
        return out;
    }
    walk(&g, at, 0, &mut vec![at], &mut out);
    out
}

// ---------------------------------------------------------------------------
// Planning instances and the exhaustive action-space oracle.

#[derive(Debug, Clone)]
pub struct PlanInstance {
    pub topology: Topology,
    pub dest: Asn,
    pub objectives: Vec<Objective>,
}

/// A stub destination with two links into a random ≤5-AS neighborhood,
/// catalogs on its providers, and one to three objectives.
pub fn random_plan_instance(rng: &mut TestRng) -> PlanInstance {
    let dest = asn(65001);
    let others: Vec<Asn> = [100, 200, 300, 400].iter().map(|v| asn(*v)).collect();
    let n_others = rng.gen_range(2..=4);
    let others = &others[..n_others];

    let mut t = Topology::default();
    t.ases.insert(dest, Some(AsRole::Stub));
    let mut k = 0;
    let mut add = |t: &mut Topology, a: Asn, b: Asn, rel: Relationship| {
        k += 1;
        let id = lid(&format!("m{k}"));
        t.links.insert(
            id.clone(),
            InterdomainLink {
                id,
                endpoint_a: a,
                endpoint_b: b,
                relationship: rel,
                up: true,
            },
        );
    };
    for i in 0..n_others {
        for j in i + 1..n_others {
            if rng.gen_bool(0.55) {
                let rel = if rng.gen_bool(0.3) {
                    Relationship::PeerToPeer
                } else {
                    Relationship::CustomerToProvider
                };
                add(&mut t, others[j], others[i], rel);
            }
        }
    }
    let p1 = others[rng.gen_range(0..n_others)];
    let p2 = if rng.gen_bool(0.25) {
        p1
    } else {
        others[rng.gen_range(0..n_others)]
    };
    let l1 = lid("l1");
    let l2 = lid("l2");
    for (id, p) in [(&l1, p1), (&l2, p2)] {
        t.links.insert(
            id.clone(),
            InterdomainLink {
                id: id.clone(),
                endpoint_a: dest,
                endpoint_b: p,
                relationship: Relationship::CustomerToProvider,
                up: true,
            },
        );
    }
    for a in others {
        let has_customer = t
            .links
            .values()
            .any(|l| l.relationship == Relationship::CustomerToProvider && l.endpoint_b == *a);
        t.ases.insert(
            *a,
            Some(if has_customer {
                AsRole::Transit
            } else {
                AsRole::Stub
            }),
        );
    }
    let prefixes = [pfx("10.1.0.0/16"), pfx("10.2.0.0/16")];
    t.originations
        .insert(dest, prefixes.iter().copied().collect());

    for p in [p1, p2] {
        if t.catalogs.contains_key(&p) {
            continue;
        }
        let neighbors: Vec<Asn> = t
            .links
            .values()
            .filter_map(|l| l.other(p))
            .filter(|a| *a != dest)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut cat = PolicyCatalog::new(p);
        let high = p.value() as u16;
        let mut low = 0;
        if rng.gen_bool(0.5) {
            low += 1;
            cat.lp_rules
                .insert(Community::new(high, low), [50, 100][rng.gen_range(0..2)]);
        }
        for _ in 0..rng.gen_range(0..=2) {
            low += 1;
            let sel = random_selector(rng, &neighbors);
            cat.prepend_rules
                .insert(Community::new(high, low), (sel, rng.gen_range(1..=3)));
        }
        t.ases.insert(p, Some(AsRole::Transit));
        if !cat.is_empty() {
            t.catalogs.insert(p, cat);
        }
    }

    let mut objectives = Vec::new();
    let mut used = BTreeSet::new();
    for _ in 0..rng.gen_range(1..=3) {
        let src = if rng.gen_bool(0.15) {
            None
        } else {
            Some(others[rng.gen_range(0..n_others)])
        };
        let dst_prefix = if rng.gen_bool(0.15) {
            pfx("10.1.128.0/17")
        } else {
            prefixes[rng.gen_range(0..2)]
        };
        let clash = used.iter().any(|(s, p): &(Option<Asn>, Prefix)| {
            *p == dst_prefix && (s.is_none() || src.is_none())
        });
        if clash || !used.insert((src, dst_prefix)) {
            continue;
        }
        let link = if rng.gen_bool(0.5) {
            l1.clone()
        } else {
            l2.clone()
        };
        objectives.push(Objective {
            flow: Flow {
                src_prefix: None,
                src_asn: src,
                dst_prefix,
                dst_asn: dest,
            },
            required_link: link,
        });
    }
    PlanInstance {
        topology: t,
        dest,
        objectives,
    }
}

/// Hop-by-hop walk over selected routes by longest match; the link the
/// walk enters `dest` on, if any.
pub fn walk_to_dest(s: &ConvergedState, t: &Topology, src: Asn, addr: &Prefix) -> Option<LinkId> {
    let mut at = src;
    let mut hops = 0;
    loop {
        let table = s.ribs.get(&at)?;
        let route = table
            .iter()
            .filter(|(p, r)| p.contains(addr) && r.loc_rib.is_some())
            .max_by_key(|(p, _)| p.len())
            .and_then(|(_, r)| r.loc_rib.as_ref())?;
        let link = match &route.learned_on {
            LearnedOn::Local => return None,
            LearnedOn::Link(l) => l.clone(),
        };
        let next = t.links.get(&link)?.other(at)?;
        if t.originated_by(next).any(|p| p.contains(addr)) {
            return Some(link);
        }
        at = next;
        hops += 1;
        if hops > t.ases.len() {
            return None;
        }
    }
}

fn sources(t: &Topology, o: &Objective) -> Vec<Asn> {
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

pub fn objectives_hold(s: &ConvergedState, t: &Topology, objectives: &[Objective]) -> bool {
    objectives.iter().all(|o| {
        sources(t, o).into_iter().all(|src| {
            walk_to_dest(s, t, src, &o.flow.dst_prefix).as_ref() == Some(&o.required_link)
        })
    })
}

/// Every single action the bounded search may use, with its prepend cost
/// and the exclusivity key it occupies.
fn oracle_atoms(inst: &PlanInstance) -> Vec<(Action, usize, String)> {
    let t = &inst.topology;
    let originated: BTreeSet<Prefix> = t.originated_by(inst.dest).copied().collect();
    let mut prefixes: BTreeSet<(Prefix, bool)> = BTreeSet::new();
    for o in &inst.objectives {
        let q = o.flow.dst_prefix;
        for p in &originated {
            if p.contains(&q) {
                prefixes.insert((*p, false));
            }
        }
        if !originated.contains(&q)
            && originated
                .iter()
                .any(|p| p.contains(&q) && q.len() == p.len() + 1)
        {
            prefixes.insert((q, true));
        }
    }
    let dest_links: Vec<&InterdomainLink> = t
        .links
        .values()
        .filter(|l| l.up && l.touches(inst.dest))
        .collect();
    let mut out = Vec::new();
    for (p, specific) in &prefixes {
        for l in &dest_links {
            let provider = l.other(inst.dest).unwrap();
            if *specific {
                out.push((
                    Action::AdvertiseMoreSpecific {
                        prefix: *p,
                        link: l.id.clone(),
                    },
                    0,
                    format!("ms {p} {}", l.id),
                ));
            }
            if let Some(cat) = t.catalogs.get(&provider) {
                for c in cat.lp_rules.keys() {
                    out.push((
                        Action::AttachCommunity {
                            prefix: *p,
                            link: l.id.clone(),
                            community: *c,
                        },
                        0,
                        format!("lp {p} {}", l.id),
                    ));
                }
                for (c, (sel, n)) in &cat.prepend_rules {
                    out.push((
                        Action::AttachCommunity {
                            prefix: *p,
                            link: l.id.clone(),
                            community: *c,
                        },
                        usize::from(*n),
                        format!("pp {p} {} {sel:?}", l.id),
                    ));
                }
            }
            if dest_links
                .iter()
                .any(|o| o.id != l.id && o.other(inst.dest) == Some(provider))
            {
                for med in [10, 20] {
                    out.push((
                        Action::SetMed {
                            prefix: *p,
                            link: l.id.clone(),
                            med,
                        },
                        0,
                        format!("med {p} {}", l.id),
                    ));
                }
            }
        }
    }
    out
}

fn oracle_config(actions: &[Action]) -> TeConfig {
    let mut cfg = TeConfig::default();
    for a in actions {
        match a {
            Action::AttachCommunity {
                prefix,
                link,
                community,
            } => {
                cfg.announce(link, *prefix).communities.insert(*community);
            }
            Action::SetMed { prefix, link, med } => cfg.announce(link, *prefix).med = Some(*med),
            Action::AdvertiseMoreSpecific { prefix, link } | Action::Advertise { prefix, link } => {
                cfg.announce(link, *prefix);
            }
            Action::Withhold { prefix, link } => {
                cfg.entries
                    .insert((link.clone(), *prefix), LinkAdvert::Withhold);
            }
        }
    }
    cfg
}

/// The cheapest satisfying action set in the bounded space, found by
/// simulating every subset of at most `max_actions` actions.
pub fn exhaustive_plan(inst: &PlanInstance, max_actions: usize) -> Option<Vec<Action>> {
    let atoms = oracle_atoms(inst);
    let n = atoms.len();
    let mut best: Option<(usize, usize, Vec<Action>)> = None;
    let mut chosen = Vec::new();

    fn rec(
        inst: &PlanInstance,
        atoms: &[(Action, usize, String)],
        from: usize,
        left: usize,
        chosen: &mut Vec<usize>,
        best: &mut Option<(usize, usize, Vec<Action>)>,
    ) {
        consider(inst, atoms, chosen, best);
        if left == 0 {
            return;
        }
        for i in from..atoms.len() {
            chosen.push(i);
            rec(inst, atoms, i + 1, left - 1, chosen, best);
            chosen.pop();
        }
    }

    fn consider(
        inst: &PlanInstance,
        atoms: &[(Action, usize, String)],
        chosen: &[usize],
        best: &mut Option<(usize, usize, Vec<Action>)>,
    ) {
        let keys: Vec<&String> = chosen.iter().map(|i| &atoms[*i].2).collect();
        let distinct: BTreeSet<&String> = keys.iter().copied().collect();
        if distinct.len() != keys.len() {
            return;
        }
        let mut actions: Vec<Action> = chosen.iter().map(|i| atoms[*i].0.clone()).collect();
        actions.sort();
        actions.dedup();
        if actions.len() != chosen.len() {
            return;
        }
        let originated: BTreeSet<Prefix> =
            inst.topology.originated_by(inst.dest).copied().collect();
        for a in &actions {
            let (p, l) = match a {
                Action::AttachCommunity { prefix, link, .. }
                | Action::SetMed { prefix, link, .. } => (prefix, link),
                _ => continue,
            };
            if !originated.contains(p)
                && !actions.contains(&Action::AdvertiseMoreSpecific {
                    prefix: *p,
                    link: l.clone(),
                })
            {
                return;
            }
        }
        let prepend: usize = chosen.iter().map(|i| atoms[*i].1).sum();
        let cost = (actions.len(), prepend, actions.clone());
        if let Some(b) = best.as_ref() {
            if (b.0, b.1, &b.2) <= (cost.0, cost.1, &cost.2) {
                return;
            }
        }
        let cfg = oracle_config(&actions);
        let Ok(state) = Simulator::new(&inst.topology, &cfg).unwrap().run(None) else {
            return;
        };
        if objectives_hold(&state, &inst.topology, &inst.objectives) {
            *best = Some(cost);
        }
    }

    rec(inst, &atoms, 0, max_actions.min(n), &mut chosen, &mut best);
    best.map(|(_, _, a)| a)
}
