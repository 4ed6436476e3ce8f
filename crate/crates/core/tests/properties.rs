use std::collections::BTreeMap;

use plcnet_core::generator::{generate_deployment, GeneratorProfile, ProfileKind};
use plcnet_core::metrics::{fsse, jain_index};
use plcnet_core::routing::{best_route, path_estimate, LinkGraph};
use plcnet_core::sharing::{build_decision_table, diff_vector, eligible_indices, gain, SsPolicy};
use plcnet_core::tonemap::{
    asymmetry, phy_rate, spectrum_fraction, DirectedLink, PhyParams, Tonemap, LEGAL_BITS,
    SUBCARRIERS,
};
use plcnet_core::{parse_trace, serialize_trace};
use proptest::prelude::*;

fn slot_vec() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(prop::sample::select(LEGAL_BITS.to_vec()), SUBCARRIERS)
}

fn tonemap(slots: usize) -> impl Strategy<Value = Tonemap> {
    prop::collection::vec(slot_vec(), slots).prop_map(|s| Tonemap::new(s).unwrap())
}

fn index_set() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(0..SUBCARRIERS, 0..200).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_fraction_is_additive(t in tonemap(1), a in index_set(), b in index_set()) {
        let a_only: Vec<usize> = a.iter().copied().filter(|j| !b.contains(j)).collect();
        let union: Vec<usize> = {
            let mut u = a_only.clone();
            u.extend(&b);
            u.sort_unstable();
            u
        };
        let lhs = spectrum_fraction(&t, 0, &union).unwrap();
        let rhs = spectrum_fraction(&t, 0, &a_only).unwrap() + spectrum_fraction(&t, 0, &b).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&lhs));
    }

    #[test]
    fn phy_rate_is_monotone(slot in slot_vec(), j in 0..SUBCARRIERS) {
        let p = PhyParams::default();
        let pos = LEGAL_BITS.iter().position(|&b| b == slot[j]).unwrap();
        prop_assume!(pos + 1 < LEGAL_BITS.len());
        let mut up = slot.clone();
        up[j] = LEGAL_BITS[pos + 1];
        let lo = phy_rate(&Tonemap::new(vec![slot]).unwrap(), 0, &p).unwrap();
        let hi = phy_rate(&Tonemap::new(vec![up]).unwrap(), 0, &p).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn asymmetry_is_a_metric(a in tonemap(2), b in tonemap(2), c in tonemap(2)) {
        let ab = asymmetry(&a, &b).unwrap();
        prop_assert_eq!(ab, asymmetry(&b, &a).unwrap());
        prop_assert_eq!(asymmetry(&a, &a).unwrap(), 0.0);
        prop_assert!(ab <= 9170.0);
        prop_assert!(ab <= asymmetry(&a, &c).unwrap() + asymmetry(&c, &b).unwrap() + 1e-9);
    }

    #[test]
    fn eligible_sets_shrink_with_beta(p in slot_vec(), s in slot_vec(), beta in 1u8..10) {
        let d = diff_vector(&p, &s).unwrap();
        let wide = eligible_indices(&d, beta);
        let narrow = eligible_indices(&d, beta + 1);
        prop_assert!(narrow.iter().all(|j| wide.contains(j)));
        let g_wide = gain(&p, &s, &wide).unwrap();
        let g_narrow = gain(&p, &s, &narrow).unwrap();
        prop_assert!(g_wide >= g_narrow);
        prop_assert!(g_narrow >= 0);
    }

    #[test]
    fn jain_is_bounded_and_scale_free(
        x in prop::collection::vec(0.0f64..1e3, 1..16),
        c in 0.01f64..100.0,
    ) {
        prop_assume!(x.iter().any(|&v| v > 0.0));
        let j = jain_index(&x).unwrap();
        let n = x.len() as f64;
        prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0 + 1e-12);
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        prop_assert!((jain_index(&scaled).unwrap() - j).abs() < 1e-9);
    }

    #[test]
    fn fsse_never_exceeds_total(x in prop::collection::vec(0.0f64..1e3, 1..16)) {
        let m: BTreeMap<String, f64> =
            x.iter().enumerate().map(|(i, &v)| (format!("N{i}"), v)).collect();
        let total: f64 = x.iter().sum();
        prop_assert!(fsse(&m).unwrap() <= total + 1e-9);
    }

    #[test]
    fn best_route_never_loses_to_direct_edge(
        rates in prop::collection::vec(0.0f64..1e8, 12),
        src in 0usize..4,
        dst in 0usize..4,
    ) {
        prop_assume!(src != dst);
        let nodes: Vec<String> = (0..4).map(|i| format!("N{i}")).collect();
        let mut map = BTreeMap::new();
        let mut it = rates.iter();
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    map.insert(DirectedLink::new(nodes[a].clone(), nodes[b].clone()).unwrap(), *it.next().unwrap());
                }
            }
        }
        let direct = map[&DirectedLink::new(nodes[src].clone(), nodes[dst].clone()).unwrap()];
        let g = LinkGraph::from_rates(nodes.clone(), map.clone());
        match best_route(&g, &nodes[src], &nodes[dst]) {
            Ok(r) => {
                prop_assert!(r.estimate_bps >= direct * (1.0 - 1e-12));
                let hops: Vec<f64> = r.path.windows(2)
                    .map(|w| map[&DirectedLink::new(w[0].clone(), w[1].clone()).unwrap()])
                    .collect();
                prop_assert!((path_estimate(&hops) - r.estimate_bps).abs() <= 1e-6 * r.estimate_bps);
                let mut seen = r.path.clone();
                seen.sort();
                seen.dedup();
                prop_assert_eq!(seen.len(), r.path.len());
            }
            Err(_) => prop_assert_eq!(direct, 0.0),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn traces_round_trip(
        n in 2usize..6,
        slots in 1usize..=6,
        seed in any::<u64>(),
        kind in prop::sample::select(vec![
            ProfileKind::Uniform,
            ProfileKind::Complementary,
            ProfileKind::InterferenceNotched,
            ProfileKind::Asymmetric,
        ]),
    ) {
        let d = generate_deployment(n, &GeneratorProfile::new(kind, seed), slots).unwrap();
        let text = serialize_trace(&d);
        let back = parse_trace(&text).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(serialize_trace(&back), text);
    }

    #[test]
    fn decision_tables_are_sorted_disjoint_and_positive(seed in any::<u64>(), beta in 1u8..=8) {
        let d = generate_deployment(4, &GeneratorProfile::new(ProfileKind::Complementary, seed), 2).unwrap();
        let policy = SsPolicy { beta, ..SsPolicy::default() };
        let t = build_decision_table(&d, &policy).unwrap();
        for (p, _, cands) in t.entries() {
            prop_assert!(cands.len() <= policy.top_m);
            for (i, c) in cands.iter().enumerate() {
                prop_assert_eq!(c.rank, i + 1);
                prop_assert!(c.gain > 0);
                prop_assert!(p.is_node_disjoint(&c.secondary));
            }
            prop_assert!(cands.windows(2).all(|w| w[0].gain >= w[1].gain));
        }
    }
}
