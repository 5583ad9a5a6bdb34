//! Flow objects, hop-by-hop forwarding resolution and ingress attribution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::engine::ConvergedState;
use crate::prefix::{Asn, Prefix};
use crate::route::LearnedOn;
use crate::topology::{LinkId, Topology};

/// The routing object `{src prefix, src ASN, dst prefix, dst ASN}`; `None`
/// is the wildcard.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Flow {
    pub src_prefix: Option<Prefix>,
    pub src_asn: Option<Asn>,
    pub dst_prefix: Prefix,
    pub dst_asn: Asn,
}

impl fmt::Display for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sp = self
            .src_prefix
            .map_or_else(|| "*".to_string(), |p| p.to_string());
        let sa = self
            .src_asn
            .map_or_else(|| "*".to_string(), |a| a.to_string());
        write!(f, "{{{sp}, {sa}, {}, {}}}", self.dst_prefix, self.dst_asn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FlowClass {
    DestinationPrefixBased,
    SourceAsnBased,
    SourcePrefixBased,
}

impl fmt::Display for FlowClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowClass::DestinationPrefixBased => "destination-prefix-based",
            FlowClass::SourceAsnBased => "source-ASN-based",
            FlowClass::SourcePrefixBased => "source-prefix-based",
        })
    }
}

/// Granularity class, decided only by which source fields are wildcards.
pub fn classify(f: &Flow) -> FlowClass {
    match (f.src_prefix, f.src_asn) {
        (Some(_), _) => FlowClass::SourcePrefixBased,
        (None, Some(_)) => FlowClass::SourceAsnBased,
        (None, None) => FlowClass::DestinationPrefixBased,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlowError {
    #[error("unknown AS {0}")]
    UnknownAs(Asn),
    #[error("no AS originates a prefix covering {0}")]
    UnknownPrefix(Prefix),
    #[error("forwarding toward {prefix} from AS {src} loops at link `{link}`")]
    ForwardingLoop {
        src: Asn,
        prefix: Prefix,
        link: LinkId,
    },
    #[error("AS {0} originates no prefix")]
    NothingOriginated(Asn),
    #[error("ingress maps differ in key set")]
    KeyMismatch,
    #[error("ingress maps are for different destinations {0} and {1}")]
    DestMismatch(Asn, Asn),
    #[error("malformed ingress CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// Walks from `src` toward `dst_prefix`, at each AS following the learned
/// link of the longest-match selected route. Returns the traversed links, or
/// `None` if some hop has no route.
pub fn resolve_forwarding(
    s: &ConvergedState,
    t: &Topology,
    src: Asn,
    dst_prefix: &Prefix,
) -> Result<Option<Vec<LinkId>>, FlowError> {
    if !t.contains_as(src) {
        return Err(FlowError::UnknownAs(src));
    }
    if !t
        .originations
        .values()
        .flatten()
        .any(|o| o.contains(dst_prefix))
    {
        return Err(FlowError::UnknownPrefix(*dst_prefix));
    }

    let mut at = src;
    let mut links = Vec::new();
    let mut seen = BTreeSet::new();
    loop {
        let route = match s.best_route(at, dst_prefix) {
            Ok(Some(r)) => r,
            Ok(None) => return Ok(None),
            Err(_) => return Err(FlowError::UnknownAs(at)),
        };
        let link = match &route.learned_on {
            LearnedOn::Local => return Ok(Some(links)),
            LearnedOn::Link(l) => l.clone(),
        };
        if !seen.insert(link.clone()) {
            return Err(FlowError::ForwardingLoop {
                src,
                prefix: *dst_prefix,
                link,
            });
        }
        let next = t
            .links
            .get(&link)
            .and_then(|l| l.other(at))
            .ok_or(FlowError::UnknownAs(at))?;
        links.push(link);
        at = next;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ingress {
    Link(LinkId),
    Unreachable,
}

impl fmt::Display for Ingress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ingress::Link(l) => write!(f, "{l}"),
            Ingress::Unreachable => f.write_str("unreachable"),
        }
    }
}

/// Entry link into `dest` for every (source AS, destination prefix) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngressMap {
    pub dest: Asn,
    pub entries: BTreeMap<(Asn, Prefix), Ingress>,
}

pub const CSV_HEADER: [&str; 3] = ["src_asn", "dst_prefix", "link"];

impl IngressMap {
    pub fn get(&self, src: Asn, prefix: &Prefix) -> Option<&Ingress> {
        self.entries.get(&(src, *prefix))
    }

    /// Sorted CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        // Writes into a Vec cannot fail.
        w.write_record(CSV_HEADER).expect("in-memory write");
        for ((src, prefix), ingress) in &self.entries {
            w.write_record([src.to_string(), prefix.to_string(), ingress.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn from_csv(dest: Asn, text: &str) -> Result<Self, FlowError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let bad = |line: usize, reason: String| FlowError::Csv { line, reason };
        let header = r.headers().map_err(|e| bad(1, e.to_string()))?;
        if header.iter().ne(CSV_HEADER) {
            return Err(bad(1, "unexpected header".into()));
        }
        let mut entries = BTreeMap::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| bad(line, e.to_string()))?;
            if rec.len() != 3 {
                return Err(bad(line, format!("expected 3 fields, got {}", rec.len())));
            }
            let src: Asn = rec[0].parse().map_err(|e| bad(line, format!("{e}")))?;
            let prefix: Prefix = rec[1].parse().map_err(|e| bad(line, format!("{e}")))?;
            let ingress = match &rec[2] {
                "unreachable" => Ingress::Unreachable,
                l => Ingress::Link(LinkId::new(l)),
            };
            if entries.insert((src, prefix), ingress).is_some() {
                return Err(bad(line, "duplicate key".into()));
            }
        }
        Ok(Self { dest, entries })
    }
}

/// Ingress link per (source AS, originated prefix of `dest`), for every AS
/// other than `dest`.
pub fn ingress_map(s: &ConvergedState, t: &Topology, dest: Asn) -> Result<IngressMap, FlowError> {
    if !t.contains_as(dest) {
        return Err(FlowError::UnknownAs(dest));
    }
    let prefixes: Vec<Prefix> = t.originated_by(dest).copied().collect();
    if prefixes.is_empty() {
        return Err(FlowError::NothingOriginated(dest));
    }
    let mut entries = BTreeMap::new();
    for src in t.ases.keys().filter(|a| **a != dest) {
        for prefix in &prefixes {
            let ingress = match resolve_forwarding(s, t, *src, prefix) {
                Ok(Some(path)) => path
                    .last()
                    .filter(|l| t.links.get(*l).is_some_and(|l| l.touches(dest)))
                    .map_or(Ingress::Unreachable, |l| Ingress::Link(l.clone())),
                Ok(None) | Err(FlowError::ForwardingLoop { .. }) => Ingress::Unreachable,
                Err(e) => return Err(e),
            };
            entries.insert((*src, *prefix), ingress);
        }
    }
    Ok(IngressMap { dest, entries })
}

/// One (source, prefix) pair whose ingress changed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IngressChange {
    pub src: Asn,
    pub prefix: Prefix,
    pub old: Ingress,
    pub new: Ingress,
}

impl fmt::Display for IngressChange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.src, self.prefix, self.old, self.new)
    }
}

/// Entries whose ingress differs, in key order.
pub fn diff_ingress(base: &IngressMap, new: &IngressMap) -> Result<Vec<IngressChange>, FlowError> {
    if base.dest != new.dest {
        return Err(FlowError::DestMismatch(base.dest, new.dest));
    }
    if base.entries.len() != new.entries.len()
        || base
            .entries
            .keys()
            .zip(new.entries.keys())
            .any(|(a, b)| a != b)
    {
        return Err(FlowError::KeyMismatch);
    }
    Ok(base
        .entries
        .iter()
        .zip(new.entries.values())
        .filter(|((_, old), new)| old != new)
        .map(|(((src, prefix), old), new)| IngressChange {
            src: *src,
            prefix: *prefix,
            old: old.clone(),
            new: new.clone(),
        })
        .collect())
}
