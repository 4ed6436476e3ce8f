#![allow(dead_code)]

use std::collections::BTreeMap;

use plcnet_core::{Deployment, DirectedLink, Tonemap};

/// Three nodes where A-C is nearly unusable but A-B and B-C are clean.
pub fn weak_direct() -> Deployment {
    let nodes: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let mut links = BTreeMap::new();
    for (a, b, bits) in [("A", "B", 10), ("B", "C", 10), ("A", "C", 1)] {
        let l = DirectedLink::new(a, b).unwrap();
        links.insert(l.reversed(), Tonemap::uniform(5, bits).unwrap());
        links.insert(l, Tonemap::uniform(5, bits).unwrap());
    }
    let meta = BTreeMap::from([("profile".to_string(), "weak-direct".to_string())]);
    Deployment::new(nodes, 5, links, meta).unwrap()
}

/// Two nodes, every subcarrier at 10 bits in both directions.
pub fn all_ten() -> Deployment {
    let nodes = vec!["N1".to_string(), "N2".to_string()];
    let l = DirectedLink::new("N1", "N2").unwrap();
    let links = BTreeMap::from([
        (l.reversed(), Tonemap::uniform(5, 10).unwrap()),
        (l, Tonemap::uniform(5, 10).unwrap()),
    ]);
    Deployment::new(nodes, 5, links, BTreeMap::new()).unwrap()
}
