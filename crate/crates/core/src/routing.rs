//! Multi-hop route selection over tonemap-derived link rates.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::tonemap::{expected_throughput, DirectedLink, PhyParams};
use crate::trace::Deployment;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("source and destination are both {0}")]
    SameEndpoints(String),
    #[error("no route from {src} to {dst}")]
    Unreachable { src: String, dst: String },
}

/// Directed graph of expected throughputs in bits per second.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGraph {
    nodes: Vec<String>,
    rates: BTreeMap<DirectedLink, f64>,
}

impl LinkGraph {
    pub fn from_rates(nodes: Vec<String>, rates: BTreeMap<DirectedLink, f64>) -> Self {
        Self { nodes, rates }
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn rate(&self, link: &DirectedLink) -> Option<f64> {
        self.rates.get(link).copied()
    }

    pub fn rates(&self) -> &BTreeMap<DirectedLink, f64> {
        &self.rates
    }
}

/// Keeps links whose expected throughput is at least `min_rate_bps`.
pub fn build_graph(d: &Deployment, phy: &PhyParams, min_rate_bps: f64) -> LinkGraph {
    let rates = d
        .links()
        .iter()
        .map(|(l, tm)| (l.clone(), expected_throughput(tm, phy)))
        .filter(|&(_, r)| r >= min_rate_bps)
        .collect();
    LinkGraph::from_rates(d.nodes().to_vec(), rates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub path: Vec<String>,
    /// End-to-end rate of the path: `1 / sum(1 / r_hop)`.
    pub estimate_bps: f64,
}

impl Route {
    pub fn hops(&self) -> usize {
        self.path.len() - 1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("src,dst,hops,path,estimate_bps\n");
        let _ = writeln!(
            out,
            "{},{},{},{},{:.0}",
            self.path[0],
            self.path[self.path.len() - 1],
            self.hops(),
            self.path.join(">"),
            self.estimate_bps
        );
        out
    }
}

/// End-to-end rate of a path whose hops transmit one after another.
pub fn path_estimate(rates: &[f64]) -> f64 {
    if rates.iter().any(|&r| r <= 0.0) {
        return 0.0;
    }
    1.0 / rates.iter().map(|r| 1.0 / r).sum::<f64>()
}

struct Entry {
    cost: f64,
    path: Vec<usize>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed so the max-heap pops the cheapest, then lexicographically
    // smallest, path first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.path.cmp(&self.path))
    }
}

/// Path maximizing the end-to-end estimate, i.e. minimizing total airtime per
/// bit. Ties go to the path whose node sequence sorts first.
pub fn best_route(g: &LinkGraph, src: &str, dst: &str) -> Result<Route, RouteError> {
    let index = |n: &str| {
        g.nodes
            .iter()
            .position(|x| x == n)
            .ok_or_else(|| RouteError::UnknownNode(n.to_string()))
    };
    let s = index(src)?;
    let t = index(dst)?;
    if s == t {
        return Err(RouteError::SameEndpoints(src.to_string()));
    }
    let n = g.nodes.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (l, &r) in &g.rates {
        if r <= 0.0 {
            continue;
        }
        if let (Some(a), Some(b)) = (
            g.nodes.iter().position(|x| *x == l.tx),
            g.nodes.iter().position(|x| *x == l.rx),
        ) {
            adj[a].push((b, 1.0 / r));
        }
    }

    let mut done = vec![false; n];
    let mut heap = BinaryHeap::from([Entry {
        cost: 0.0,
        path: vec![s],
    }]);
    while let Some(Entry { cost, path }) = heap.pop() {
        let u = *path.last().expect("paths are non-empty");
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == t {
            let names: Vec<String> = path.iter().map(|&i| g.nodes[i].clone()).collect();
            let rates: Vec<f64> = names
                .windows(2)
                .map(|w| g.rates[&DirectedLink::new(w[0].clone(), w[1].clone()).unwrap()])
                .collect();
            return Ok(Route {
                path: names,
                estimate_bps: path_estimate(&rates),
            });
        }
        for &(v, w) in &adj[u] {
            if !done[v] {
                let mut p = path.clone();
                p.push(v);
                heap.push(Entry {
                    cost: cost + w,
                    path: p,
                });
            }
        }
    }
    Err(RouteError::Unreachable {
        src: src.to_string(),
        dst: dst.to_string(),
    })
}
