//! Deployments and the PLCTM v1 trace format.
//!
//! A PLCTM v1 file is line-oriented UTF-8 text:
//!
//! ```text
//! plctm 1
//! slots 5
//! subcarriers 917
//! nodes N1 N2
//! meta profile uniform
//! link N1 N2 1 10,10,...,10
//! ```
//!
//! One `link` line per (directed link, slot), slot indices 1-based, exactly
//! 917 comma-separated values. `#` lines are comments and blank lines are
//! ignored. Serialization is canonical: nodes in listed order, metadata sorted
//! by key, links sorted by `(tx, rx)`, slots ascending, no comments.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::tonemap::{validate_tonemap, DirectedLink, Tonemap, MAX_SLOTS, SUBCARRIERS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeploymentError {
    #[error("a deployment needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("duplicate node {0}")]
    DuplicateNode(String),
    #[error("invalid node name {0:?}")]
    InvalidNodeName(String),
    #[error("link {0} references an unknown node")]
    UnknownNode(DirectedLink),
    #[error("link {0} has no reverse tonemap")]
    MissingReverse(DirectedLink),
    #[error("link {link} has {found} slots, deployment has {expected}")]
    SlotCount {
        link: DirectedLink,
        found: usize,
        expected: usize,
    },
    #[error("slot count {0} outside 1..={MAX_SLOTS}")]
    InvalidSlotCount(usize),
}

/// Nodes plus one tonemap per directed link. Always satisfies its invariants:
/// both directions of every traced pair are present and all tonemaps share one
/// slot count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deployment {
    nodes: Vec<String>,
    slot_count: usize,
    links: BTreeMap<DirectedLink, Tonemap>,
    metadata: BTreeMap<String, String>,
}

impl Deployment {
    pub fn new(
        nodes: Vec<String>,
        slot_count: usize,
        links: BTreeMap<DirectedLink, Tonemap>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self, DeploymentError> {
        if nodes.len() < 2 {
            return Err(DeploymentError::TooFewNodes(nodes.len()));
        }
        if slot_count == 0 || slot_count > MAX_SLOTS {
            return Err(DeploymentError::InvalidSlotCount(slot_count));
        }
        let mut seen = HashSet::new();
        for n in &nodes {
            if n.is_empty() || n.chars().any(char::is_whitespace) {
                return Err(DeploymentError::InvalidNodeName(n.clone()));
            }
            if !seen.insert(n.as_str()) {
                return Err(DeploymentError::DuplicateNode(n.clone()));
            }
        }
        for (link, tm) in &links {
            if !seen.contains(link.tx.as_str()) || !seen.contains(link.rx.as_str()) {
                return Err(DeploymentError::UnknownNode(link.clone()));
            }
            if tm.slot_count() != slot_count {
                return Err(DeploymentError::SlotCount {
                    link: link.clone(),
                    found: tm.slot_count(),
                    expected: slot_count,
                });
            }
            if !links.contains_key(&link.reversed()) {
                return Err(DeploymentError::MissingReverse(link.clone()));
            }
        }
        Ok(Self {
            nodes,
            slot_count,
            links,
            metadata,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn links(&self) -> &BTreeMap<DirectedLink, Tonemap> {
        &self.links
    }

    pub fn tonemap(&self, link: &DirectedLink) -> Option<&Tonemap> {
        self.links.get(link)
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn node_index(&self, node: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }

    /// Unordered node pairs that are traced, as `(a, b)` links with `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = &DirectedLink> {
        self.links.keys().filter(|l| l.tx < l.rx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    /// 1-based line number; 0 when the problem is not tied to one line.
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("malformed line: {0}")]
    Syntax(String),
    #[error("wrong subcarrier count: {0} values")]
    SubcarrierCount(usize),
    #[error("bad modulation value {0:?}")]
    Value(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("duplicate line for link {0} slot {1}")]
    Duplicate(DirectedLink, usize),
    #[error("slot index {0} outside 1..={1}")]
    SlotIndex(usize, usize),
    #[error("link {0} is missing slot {1}")]
    MissingSlot(DirectedLink, usize),
    #[error(transparent)]
    Tonemap(#[from] crate::tonemap::TonemapViolation),
    #[error(transparent)]
    Deployment(#[from] DeploymentError),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

type PendingSlots = Vec<Option<Vec<u8>>>;

/// Parses PLCTM v1 text into a validated deployment.
pub fn parse_trace(text: &str) -> Result<Deployment, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));

    let mut header = |expect: &str| -> Result<(usize, Vec<&str>), ParseError> {
        let (n, line) = lines.next().ok_or_else(|| {
            err(
                0,
                ParseErrorKind::Header(format!("missing `{expect}` line")),
            )
        })?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.first() != Some(&expect) {
            return Err(err(
                n,
                ParseErrorKind::Header(format!("expected `{expect}`")),
            ));
        }
        Ok((n, tokens))
    };

    let (n, magic) = header("plctm")?;
    if magic.len() != 2 || magic[1] != "1" {
        return Err(err(n, ParseErrorKind::Header("unsupported version".into())));
    }
    let (n, slots) = header("slots")?;
    let slot_count: usize = match slots.as_slice() {
        [_, v] => v.parse().ok(),
        _ => None,
    }
    .filter(|&s| (1..=MAX_SLOTS).contains(&s))
    .ok_or_else(|| err(n, ParseErrorKind::Header("bad slot count".into())))?;
    let (n, sub) = header("subcarriers")?;
    if sub.len() != 2 || sub[1] != SUBCARRIERS.to_string() {
        return Err(err(
            n,
            ParseErrorKind::Header(format!("subcarriers must be {SUBCARRIERS}")),
        ));
    }
    let (n, node_tokens) = header("nodes")?;
    let nodes: Vec<String> = node_tokens[1..].iter().map(|s| s.to_string()).collect();
    let known: HashSet<&str> = node_tokens[1..].iter().copied().collect();
    if known.len() != nodes.len() {
        return Err(err(n, ParseErrorKind::Header("duplicate node".into())));
    }

    let mut metadata = BTreeMap::new();
    // link -> (line of first appearance, slot vectors seen so far)
    let mut raw: BTreeMap<DirectedLink, (usize, PendingSlots)> = BTreeMap::new();
    for (n, line) in lines {
        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match keyword {
            "meta" => {
                let (key, value) = rest
                    .trim_start()
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| {
                        err(n, ParseErrorKind::Syntax("meta needs key and value".into()))
                    })?;
                metadata.insert(key.to_string(), value.trim().to_string());
            }
            "link" => {
                let tokens: Vec<&str> = rest.split_whitespace().collect();
                let [tx, rx, slot, values] = tokens[..] else {
                    return Err(err(
                        n,
                        ParseErrorKind::Syntax("expected `link <tx> <rx> <slot> <values>`".into()),
                    ));
                };
                for node in [tx, rx] {
                    if !known.contains(node) {
                        return Err(err(n, ParseErrorKind::UnknownNode(node.to_string())));
                    }
                }
                let link = DirectedLink::new(tx, rx)
                    .ok_or_else(|| err(n, ParseErrorKind::Syntax("self-loop link".into())))?;
                let slot: usize = slot
                    .parse()
                    .map_err(|_| err(n, ParseErrorKind::Syntax(format!("bad slot {slot:?}"))))?;
                if !(1..=slot_count).contains(&slot) {
                    return Err(err(n, ParseErrorKind::SlotIndex(slot, slot_count)));
                }
                let parsed = values
                    .split(',')
                    .map(|v| v.parse::<u8>().map_err(|_| v))
                    .collect::<Result<Vec<u8>, &str>>()
                    .map_err(|v| err(n, ParseErrorKind::Value(v.to_string())))?;
                if parsed.len() != SUBCARRIERS {
                    return Err(err(n, ParseErrorKind::SubcarrierCount(parsed.len())));
                }
                let entry = raw
                    .entry(link.clone())
                    .or_insert_with(|| (n, vec![None; slot_count]));
                if entry.1[slot - 1].is_some() {
                    return Err(err(n, ParseErrorKind::Duplicate(link, slot)));
                }
                entry.1[slot - 1] = Some(parsed);
            }
            other => {
                return Err(err(
                    n,
                    ParseErrorKind::Syntax(format!("unknown keyword {other:?}")),
                ))
            }
        }
    }

    let mut links = BTreeMap::new();
    for (link, (first_line, slots)) in raw {
        let mut complete = Vec::with_capacity(slot_count);
        for (k, s) in slots.into_iter().enumerate() {
            complete.push(s.ok_or_else(|| {
                err(first_line, ParseErrorKind::MissingSlot(link.clone(), k + 1))
            })?);
        }
        validate_tonemap(&complete).map_err(|e| err(first_line, e.into()))?;
        links.insert(link, Tonemap::new(complete).expect("validated"));
    }
    Deployment::new(nodes, slot_count, links, metadata).map_err(|e| err(0, e.into()))
}

/// Canonical PLCTM v1 text for a deployment.
pub fn serialize_trace(d: &Deployment) -> String {
    let mut out = String::with_capacity(64 + d.links().len() * d.slot_count() * 2 * SUBCARRIERS);
    out.push_str("plctm 1\n");
    let _ = writeln!(out, "slots {}", d.slot_count());
    let _ = writeln!(out, "subcarriers {SUBCARRIERS}");
    let _ = writeln!(out, "nodes {}", d.nodes().join(" "));
    for (k, v) in d.metadata() {
        let _ = writeln!(out, "meta {k} {v}");
    }
    for (link, tm) in d.links() {
        for (k, slot) in tm.slots().enumerate() {
            let _ = write!(out, "link {} {} {} ", link.tx, link.rx, k + 1);
            for (j, v) in slot.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(v: u8, n: usize) -> String {
        vec![v.to_string(); n].join(",")
    }

    fn minimal(slot_count: usize) -> String {
        let mut s = format!("plctm 1\nslots {slot_count}\nsubcarriers 917\nnodes A B\n");
        for (tx, rx) in [("A", "B"), ("B", "A")] {
            for k in 1..=slot_count {
                s += &format!("link {tx} {rx} {k} {}\n", values(4, 917));
            }
        }
        s
    }

    #[test]
    fn parses_minimal_file() {
        let d = parse_trace(&minimal(5)).unwrap();
        assert_eq!(d.links().len(), 2);
        assert_eq!(d.slot_count(), 5);
        assert_eq!(d.nodes(), ["A", "B"]);
    }

    #[test]
    fn reports_short_line() {
        let mut lines: Vec<String> = minimal(5).lines().map(String::from).collect();
        lines[5] = format!("link A B 2 {}", values(4, 916));
        let text = lines.join("\n");
        let e = parse_trace(&text).unwrap_err();
        // second `link` line after the 4 header lines
        assert_eq!(e.line, 6);
        assert_eq!(e.kind, ParseErrorKind::SubcarrierCount(916));
    }

    #[test]
    fn rejects_unknown_node_and_duplicates() {
        let text = minimal(1) + &format!("link A C 1 {}\n", values(1, 917));
        assert!(matches!(
            parse_trace(&text).unwrap_err().kind,
            ParseErrorKind::UnknownNode(n) if n == "C"
        ));

        let text = minimal(1) + &format!("link A B 1 {}\n", values(1, 917));
        let e = parse_trace(&text).unwrap_err();
        assert_eq!(e.line, 7);
        assert!(matches!(e.kind, ParseErrorKind::Duplicate(..)));
    }

    #[test]
    fn rejects_missing_slot_and_bad_header() {
        let text: String = minimal(2)
            .lines()
            .filter(|l| !l.starts_with("link B A 2"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            parse_trace(&text).unwrap_err().kind,
            ParseErrorKind::MissingSlot(_, 2)
        ));
        let bad = minimal(1).replace("plctm 1", "plctm 2");
        assert!(matches!(
            parse_trace(&bad).unwrap_err().kind,
            ParseErrorKind::Header(_)
        ));
        let bad = minimal(1).replace("slots 1", "slots 9");
        assert_eq!(parse_trace(&bad).unwrap_err().line, 2);
    }

    #[test]
    fn rejects_missing_reverse_link() {
        let text: String = minimal(1)
            .lines()
            .filter(|l| !l.starts_with("link B A"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            parse_trace(&text).unwrap_err().kind,
            ParseErrorKind::Deployment(DeploymentError::MissingReverse(_))
        ));
    }

    #[test]
    fn comments_and_meta_are_accepted() {
        let mut text = minimal(1);
        text.insert_str(0, "# generated\n");
        text = text.replace("nodes A B\n", "nodes A B\nmeta profile hand made\n# x\n");
        let d = parse_trace(&text).unwrap();
        assert_eq!(d.metadata()["profile"], "hand made");
        let canonical = serialize_trace(&d);
        assert!(!canonical.contains('#'));
        assert_eq!(parse_trace(&canonical).unwrap(), d);
    }

    #[test]
    fn canonical_form_sorts_links() {
        let text = minimal(1);
        let reordered = {
            let mut lines: Vec<&str> = text.lines().collect();
            lines.swap(4, 5);
            lines.join("\n") + "\n"
        };
        let d = parse_trace(&reordered).unwrap();
        assert_eq!(serialize_trace(&d), text);
    }
}
