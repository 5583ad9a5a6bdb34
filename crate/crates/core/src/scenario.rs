//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! as <asn> [stub|transit]
//! link <id> <asn1> <asn2> <c2p|p2p> [down]        # c2p: asn1 is the customer
//! originate <asn> <prefix>
//! policy <asn> lp <community> <value>
//! policy <asn> prepend <community> <peer-asn|all|region:TAG> <1|2|3>
//! policy <asn> suppress <community> <peer-asn|all|region:TAG>
//! policy <asn> region <peer-asn> <TAG>
//! policy <asn> drops-community-updates
//! lp-override <asn> <neighbor-asn> <value>
//! advertise <link> <prefix> [med <n>] [prepend <n>] [community <c>...]
//! withhold <link> <prefix>
//! objective <dest-asn> <src-asn|*> <dst-prefix> <link> [src-prefix <prefix>]
//! ```
//!
//! ASes and links must be declared before they are referenced. Every
//! violation is reported with its line and column.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::community::Community;
use crate::engine::{LinkAdvert, TeConfig};
use crate::flow::Flow;
use crate::planner::Objective;
use crate::policy::{PeerSelector, PolicyCatalog, MAX_PREPEND};
use crate::prefix::{Asn, Prefix};
use crate::topology::{AsRole, InterdomainLink, LinkId, Relationship, Topology};

/// Everything one scenario file describes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    pub topology: Topology,
    pub te_config: TeConfig,
    pub objectives: Vec<Objective>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unknown record `{0}`")]
    UnknownRecord(String),
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unexpected token `{0}`")]
    Unexpected(String),
    #[error("{0}")]
    BadValue(String),
    #[error("unknown AS {0}")]
    UnknownAs(Asn),
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("AS {0} declared twice")]
    DuplicateAs(Asn),
    #[error("duplicate link id `{0}`")]
    DuplicateLink(String),
    #[error("link `{0}` joins an AS to itself")]
    SelfLink(String),
    #[error("prefix {prefix} already originated by AS {by}")]
    DuplicateOrigination { prefix: Prefix, by: Asn },
    #[error("community {0} already has a rule in this catalog")]
    DuplicateRule(Community),
    #[error("catalog on non-transit AS {0}")]
    CatalogOnNonTransit(Asn),
    #[error("{0}")]
    Config(String),
}

#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
    end_column: usize,
    pos: usize,
}

impl<'a> Line<'a> {
    fn new(number: usize, raw: &'a str) -> Self {
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        for (i, ch) in content.char_indices() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    tokens.push(Token {
                        text: &content[s..i],
                        column: content[..s].chars().count() + 1,
                    });
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            tokens.push(Token {
                text: &content[s..],
                column: content[..s].chars().count() + 1,
            });
        }
        Self {
            number,
            tokens,
            end_column: content.trim_end().chars().count() + 1,
            pos: 0,
        }
    }

    fn err(&self, column: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.number,
            column,
            kind,
        }
    }

    fn next(&mut self, what: &'static str) -> Result<Token<'a>, ParseError> {
        let tok = self
            .tokens
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err(self.end_column, ParseErrorKind::Expected(what)))?;
        self.pos += 1;
        Ok(tok)
    }

    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) => Err(self.err(t.column, ParseErrorKind::Unexpected(t.text.into()))),
            None => Ok(()),
        }
    }

    fn value<T, E: fmt::Display>(
        &mut self,
        what: &'static str,
        parse: impl FnOnce(&str) -> Result<T, E>,
    ) -> Result<(T, usize), ParseError> {
        let tok = self.next(what)?;
        parse(tok.text)
            .map(|v| (v, tok.column))
            .map_err(|e| self.err(tok.column, ParseErrorKind::BadValue(e.to_string())))
    }
}

struct Parser {
    scenario: Scenario,
    /// First line mentioning each catalog, for positioned catalog errors.
    catalog_lines: BTreeMap<Asn, (usize, usize)>,
}

impl Parser {
    fn declared(&self, line: &mut Line<'_>) -> Result<Asn, ParseError> {
        let (asn, col) = line.value("an ASN", |s| s.parse::<Asn>())?;
        if !self.scenario.topology.contains_as(asn) {
            return Err(line.err(col, ParseErrorKind::UnknownAs(asn)));
        }
        Ok(asn)
    }

    fn link_ref(&self, line: &mut Line<'_>) -> Result<LinkId, ParseError> {
        let tok = line.next("a link id")?;
        let id = LinkId::new(tok.text);
        if !self.scenario.topology.links.contains_key(&id) {
            return Err(line.err(tok.column, ParseErrorKind::UnknownLink(tok.text.into())));
        }
        Ok(id)
    }

    fn selector(&self, line: &mut Line<'_>) -> Result<PeerSelector, ParseError> {
        let tok = line.next("a peer selector")?;
        if tok.text == "all" {
            return Ok(PeerSelector::AllUpstreams);
        }
        if let Some(tag) = tok.text.strip_prefix("region:") {
            if tag.is_empty() {
                return Err(line.err(tok.column, ParseErrorKind::Expected("a region tag")));
            }
            return Ok(PeerSelector::RegionTag(tag.to_string()));
        }
        let asn: Asn = tok.text.parse().map_err(|e: crate::prefix::AddrError| {
            line.err(tok.column, ParseErrorKind::BadValue(e.to_string()))
        })?;
        if !self.scenario.topology.contains_as(asn) {
            return Err(line.err(tok.column, ParseErrorKind::UnknownAs(asn)));
        }
        Ok(PeerSelector::SpecificAsn(asn))
    }

    fn record(&mut self, line: &mut Line<'_>) -> Result<(), ParseError> {
        let head = line.next("a record")?;
        match head.text {
            "as" => self.as_record(line),
            "link" => self.link_record(line),
            "originate" => self.originate_record(line),
            "policy" => self.policy_record(line, head.column),
            "lp-override" => self.lp_override_record(line),
            "advertise" => self.advertise_record(line, head.column),
            "withhold" => self.withhold_record(line, head.column),
            "objective" => self.objective_record(line),
            other => Err(line.err(head.column, ParseErrorKind::UnknownRecord(other.into()))),
        }?;
        line.finish()
    }

    fn as_record(&mut self, line: &mut Line<'_>) -> Result<(), ParseError> {
        let (asn, col) = line.value("an ASN", |s| s.parse::<Asn>())?;
        let role = match line.peek() {
            None => None,
            Some(t) => {
                line.pos += 1;
                Some(match t.text {
                    "stub" => AsRole::Stub,
                    "transit" => AsRole::Transit,
                    _ => {
                        return Err(line.err(t.column, ParseErrorKind::Expected("stub or transit")))
                    }
                })
            }
        };
        if self.scenario.topology.ases.insert(asn, role).is_some() {
            return Err(line.err(col, ParseErrorKind::DuplicateAs(asn)));
        }
        Ok(())
    }

    fn link_record(&mut self, line: &mut Line<'_>) -> Result<(), ParseError> {
        let id_tok = line.next("a link id")?;
        let a = self.declared(line)?;
        let b = self.declared(line)?;
        let rel_tok = line.next("c2p or p2p")?;
        let relationship = match rel_tok.text {
            "c2p" => Relationship::CustomerToProvider,
            "p2p" => Relationship::PeerToPeer,
            _ => return Err(line.err(rel_tok.column, ParseErrorKind::Expected("c2p or p2p"))),
        };
        let up = match line.peek() {
            Some(t) if t.text == "down" => {
                line.pos += 1;
                false
            }
            _ => true,
        };
        if a == b {
            return Err(line.err(id_tok.column, ParseErrorKind::SelfLink(id_tok.text.into())));
        }
        let id = LinkId::new(id_tok.text);
        if self.scenario.topology.links.contains_key(&id) {
            return Err(line.err(
                id_tok.column,
                ParseErrorKind::DuplicateLink(id_tok.text.into()),
            ));
        }
        self.scenario.topology.links.insert(
            id.clone(),
            InterdomainLink {
                id,
                endpoint_a: a,
                endpoint_b: b,
                relationship,
                up,
            },
        );
        Ok(())
    }

    fn originate_record(&mut self, line: &mut Line<'_>) -> Result<(), ParseError> {
        let asn = self.declared(line)?;
        let (prefix, col) = line.value("a prefix", |s| s.parse::<Prefix>())?;
        if let Some(by) = self.scenario.topology.originator_of(&prefix) {
            return Err(line.err(col, ParseErrorKind::DuplicateOrigination { prefix, by }));
        }
        self.scenario
            .topology
            .originations
            .entry(asn)
            .or_default()
            .insert(prefix);
        Ok(())
    }

    fn policy_record(&mut self, line: &mut Line<'_>, head_col: usize) -> Result<(), ParseError> {
        let owner = self.declared(line)?;
        self.catalog_lines
            .entry(owner)
            .or_insert((line.number, head_col));
        let kind = line.next("lp, prepend, suppress, region or drops-community-updates")?;

        let community = |line: &mut Line<'_>, this: &Self| -> Result<Community, ParseError> {
            let (c, col) = line.value("a community", |s| s.parse::<Community>())?;
            let defined = this
                .scenario
                .topology
                .catalogs
                .get(&owner)
                .is_some_and(|cat| cat.defines(&c));
            if defined {
                return Err(line.err(col, ParseErrorKind::DuplicateRule(c)));
            }
            Ok(c)
        };

        match kind.text {
            "lp" => {
                let c = community(line, self)?;
                let (lp, _) = line.value("a local preference", |s| s.parse::<u32>())?;
                self.catalog(owner).lp_rules.insert(c, lp);
            }
            "prepend" => {
                let c = community(line, self)?;
                let sel = self.selector(line)?;
                let (n, col) = line.value("a prepend count", |s| s.parse::<u8>())?;
                if !(1..=MAX_PREPEND).contains(&n) {
                    return Err(line.err(
                        col,
                        ParseErrorKind::BadValue(format!("prepend count {n} outside 1..=3")),
                    ));
                }
                self.catalog(owner).prepend_rules.insert(c, (sel, n));
            }
            "suppress" => {
                let c = community(line, self)?;
                let sel = self.selector(line)?;
                self.catalog(owner).suppress_rules.insert(c, sel);
            }
            "region" => {
                let peer = self.declared(line)?;
                let tag = line.next("a region tag")?;
                self.catalog(owner)
                    .region_of
                    .insert(peer, tag.text.to_string());
            }
            "drops-community-updates" => {
                self.catalog(owner).drops_community_updates = true;
            }
            other => {
                return Err(line.err(
                    kind.column,
                    ParseErrorKind::UnknownRecord(format!("policy {other}")),
                ))
            }
        }
        Ok(())
    }

    fn catalog(&mut self, owner: Asn) -> &mut PolicyCatalog {
        self.scenario
            .topology
            .catalogs
            .entry(owner)
            .or_insert_with(|| PolicyCatalog::new(owner))
    }

    fn lp_override_record(&mut self, line: &mut Line<'_>) -> Result<(), ParseError> {
        let asn = self.declared(line)?;
        let neighbor = self.declared(line)?;
        let (lp, _) = line.value("a local preference", |s| s.parse::<u32>())?;
        self.scenario
            .topology
            .lp_overrides
            .insert((asn, neighbor), lp);
        Ok(())
    }

    fn advertise_record(&mut self, line: &mut Line<'_>, head_col: usize) -> Result<(), ParseError> {
        let link = self.link_ref(line)?;
        let (prefix, _) = line.value("a prefix", |s| s.parse::<Prefix>())?;
        let topo = &self.scenario.topology;
        TeConfig::announcer(topo, &link, &prefix)
            .map_err(|e| line.err(head_col, ParseErrorKind::Config(e.to_string())))?;

        let ann = self.scenario.te_config.announce(&link, prefix);
        while let Some(key) = line.peek() {
            line.pos += 1;
            match key.text {
                "med" => ann.med = Some(line.value("a MED value", |s| s.parse::<u32>())?.0),
                "prepend" => ann.prepend = line.value("a prepend count", |s| s.parse::<u8>())?.0,
                "community" => {
                    let first = line.value("a community", |s| s.parse::<Community>())?.0;
                    ann.communities.insert(first);
                    while let Some(t) = line.peek() {
                        if !t.text.contains(':') {
                            break;
                        }
                        ann.communities
                            .insert(line.value("a community", |s| s.parse::<Community>())?.0);
                    }
                }
                other => return Err(line.err(key.column, ParseErrorKind::Unexpected(other.into()))),
            }
        }
        Ok(())
    }

    fn withhold_record(&mut self, line: &mut Line<'_>, head_col: usize) -> Result<(), ParseError> {
        let link = self.link_ref(line)?;
        let (prefix, _) = line.value("a prefix", |s| s.parse::<Prefix>())?;
        TeConfig::announcer(&self.scenario.topology, &link, &prefix)
            .map_err(|e| line.err(head_col, ParseErrorKind::Config(e.to_string())))?;
        self.scenario.te_config.withhold(&link, prefix);
        Ok(())
    }

    fn objective_record(&mut self, line: &mut Line<'_>) -> Result<(), ParseError> {
        let dest = self.declared(line)?;
        let src_asn = match line.peek() {
            Some(t) if t.text == "*" => {
                line.pos += 1;
                None
            }
            _ => Some(self.declared(line)?),
        };
        let (dst_prefix, _) = line.value("a prefix", |s| s.parse::<Prefix>())?;
        let required_link = self.link_ref(line)?;
        let src_prefix = match line.peek() {
            Some(t) if t.text == "src-prefix" => {
                line.pos += 1;
                Some(line.value("a prefix", |s| s.parse::<Prefix>())?.0)
            }
            _ => None,
        };
        self.scenario.objectives.push(Objective {
            flow: Flow {
                src_prefix,
                src_asn,
                dst_prefix,
                dst_asn: dest,
            },
            required_link,
        });
        Ok(())
    }

    fn finish(self) -> Result<Scenario, ParseError> {
        let topo = &self.scenario.topology;
        for (owner, cat) in &topo.catalogs {
            let (line, column) = self.catalog_lines.get(owner).copied().unwrap_or((0, 0));
            if !cat.is_empty() && topo.role(*owner) != Some(AsRole::Transit) {
                return Err(ParseError {
                    line,
                    column,
                    kind: ParseErrorKind::CatalogOnNonTransit(*owner),
                });
            }
        }
        if let Err(e) = self.scenario.te_config.validate(topo) {
            return Err(ParseError {
                line: 0,
                column: 0,
                kind: ParseErrorKind::Config(e.to_string()),
            });
        }
        if let Some(f) = topo.validate().errors().next() {
            return Err(ParseError {
                line: 0,
                column: 0,
                kind: ParseErrorKind::Config(f.message.clone()),
            });
        }
        Ok(self.scenario)
    }
}

/// Parses a scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut parser = Parser {
        scenario: Scenario::default(),
        catalog_lines: BTreeMap::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let mut line = Line::new(i + 1, raw);
        if line.tokens.is_empty() {
            continue;
        }
        parser.record(&mut line)?;
    }
    parser.finish()
}

/// Parses a scenario file and keeps only its topology.
pub fn parse_topology(text: &str) -> Result<Topology, ParseError> {
    parse_scenario(text).map(|s| s.topology)
}

fn selector_text(sel: &PeerSelector) -> String {
    sel.to_string()
}

impl Scenario {
    /// Canonical rendering; `parse_scenario` of it yields `self` again.
    pub fn to_canonical(&self) -> String {
        let t = &self.topology;
        let mut out = String::new();
        for (asn, role) in &t.ases {
            match role {
                Some(r) => writeln!(out, "as {asn} {r}"),
                None => writeln!(out, "as {asn}"),
            }
            .ok();
        }
        for l in t.links.values() {
            let rel = match l.relationship {
                Relationship::CustomerToProvider => "c2p",
                Relationship::PeerToPeer => "p2p",
            };
            let down = if l.up { "" } else { " down" };
            writeln!(
                out,
                "link {} {} {} {rel}{down}",
                l.id, l.endpoint_a, l.endpoint_b
            )
            .ok();
        }
        for (asn, prefixes) in &t.originations {
            for p in prefixes {
                writeln!(out, "originate {asn} {p}").ok();
            }
        }
        for (owner, cat) in &t.catalogs {
            for (c, lp) in &cat.lp_rules {
                writeln!(out, "policy {owner} lp {c} {lp}").ok();
            }
            for (c, (sel, n)) in &cat.prepend_rules {
                writeln!(out, "policy {owner} prepend {c} {} {n}", selector_text(sel)).ok();
            }
            for (c, sel) in &cat.suppress_rules {
                writeln!(out, "policy {owner} suppress {c} {}", selector_text(sel)).ok();
            }
            for (peer, tag) in &cat.region_of {
                writeln!(out, "policy {owner} region {peer} {tag}").ok();
            }
            if cat.drops_community_updates {
                writeln!(out, "policy {owner} drops-community-updates").ok();
            }
        }
        for ((asn, neighbor), lp) in &t.lp_overrides {
            writeln!(out, "lp-override {asn} {neighbor} {lp}").ok();
        }
        for ((link, prefix), advert) in &self.te_config.entries {
            match advert {
                LinkAdvert::Withhold => writeln!(out, "withhold {link} {prefix}").ok(),
                LinkAdvert::Announce(a) => {
                    let mut line = format!("advertise {link} {prefix}");
                    if let Some(m) = a.med {
                        write!(line, " med {m}").ok();
                    }
                    if a.prepend > 0 {
                        write!(line, " prepend {}", a.prepend).ok();
                    }
                    if !a.communities.is_empty() {
                        line.push_str(" community");
                        for c in &a.communities {
                            write!(line, " {c}").ok();
                        }
                    }
                    writeln!(out, "{line}").ok()
                }
            };
        }
        for o in &self.objectives {
            let src = o
                .flow
                .src_asn
                .map_or_else(|| "*".to_string(), |a| a.to_string());
            write!(
                out,
                "objective {} {src} {} {}",
                o.flow.dst_asn, o.flow.dst_prefix, o.required_link
            )
            .ok();
            if let Some(sp) = o.flow.src_prefix {
                write!(out, " src-prefix {sp}").ok();
            }
            out.push('\n');
        }
        out
    }

    /// Destination ASes: objective destinations, or else every stub AS that
    /// originates something.
    pub fn destinations(&self) -> BTreeSet<Asn> {
        let from_objectives: BTreeSet<Asn> =
            self.objectives.iter().map(|o| o.flow.dst_asn).collect();
        if !from_objectives.is_empty() {
            return from_objectives;
        }
        self.topology
            .originations
            .iter()
            .filter(|(a, ps)| !ps.is_empty() && self.topology.role(**a) == Some(AsRole::Stub))
            .map(|(a, _)| *a)
            .collect()
    }
}
