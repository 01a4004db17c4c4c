use std::collections::BTreeSet;

use proptest::prelude::*;

use congest_mst::engine::{reassemble, transmit, BitString, EngineConfig, Network};
use congest_mst::graph::{generate_with_density, induced_mask, oracle_msf, random_partition, Family, Partition};
use congest_mst::pwa::{solve_msf, solve_pwa, AggregationSpec};
use congest_mst::routing::{route_next_hop, setup_routing, Hop};
use congest_mst::slots::{validate_slot_set, SlotEntry};
use congest_mst::spanning::build_bfs_tree;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Path), Just(Family::Cycle), Just(Family::Star), Just(Family::RandomConnected), Just(Family::Grid)]
}

/// Consecutive ranges of the given lengths starting at slot 1; the first
/// slot of each range is the leader's.
fn ranges(lens: &[u32]) -> Vec<SlotEntry> {
    let mut out = Vec::new();
    let mut next = 1;
    for (f, &len) in lens.iter().enumerate() {
        for i in 0..len {
            out.push(SlotEntry { fragment: f as u32, slot: next + i, leader: i == 0 });
        }
        next += len;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mst_matches_kruskal(fam in family(), n in 2usize..120, seed in 0u64..1000, dens in 0.0f64..3.0) {
        let g = generate_with_density(fam, n, seed, dens).unwrap();
        let out = solve_msf(&g, None, EngineConfig::default()).unwrap();
        prop_assert_eq!(&out.edges, &oracle_msf(&g, None));
        prop_assert_eq!(out.metrics.congestion_violations + out.metrics.bound_violations + out.metrics.root_store_violations, 0);
        prop_assert!(out.metrics.global_peak <= out.widths.budget);
    }

    #[test]
    fn msf_matches_kruskal_forest(n in 4usize..100, parts in 1usize..8, seed in 0u64..1000) {
        let g = generate_with_density(Family::RandomConnected, n, seed, 1.0).unwrap();
        let p = random_partition(&g, parts.min(n), seed);
        let mask = induced_mask(&g, &p);
        let out = solve_msf(&g, Some(&mask), EngineConfig::default()).unwrap();
        prop_assert_eq!(&out.edges, &oracle_msf(&g, Some(&mask)));
    }

    #[test]
    fn pwa_matches_per_part_fold(n in 2usize..80, parts in 1usize..6, seed in 0u64..500, f in 0usize..4) {
        let g = generate_with_density(Family::RandomConnected, n, seed, 0.5).unwrap();
        let p = random_partition(&g, parts.min(n), seed + 1);
        let spec = AggregationSpec::by_name(["min", "max", "sum", "xor"][f], 8).unwrap();
        let xs: Vec<u64> = (0..n as u64).map(|v| (v * 131 + seed) % 256).collect();
        let out = solve_pwa(&g, &p, &spec, &xs, EngineConfig::default()).unwrap();
        for v in 0..n {
            let want = spec.fold((0..n).filter(|&u| p.part(u as u32) == p.part(v as u32)).map(|u| xs[u]));
            prop_assert_eq!(out.outputs[v], want);
        }
    }

    #[test]
    fn aggregation_laws(f in 0usize..4, a in 0u64..1 << 20, b in 0u64..1 << 20, c in 0u64..1 << 20) {
        let s = AggregationSpec::by_name(["min", "max", "sum", "xor"][f], 20).unwrap();
        let op = s.combine;
        prop_assert_eq!(op(a, b), op(b, a));
        prop_assert_eq!(op(op(a, b), c), op(a, op(b, c)));
        prop_assert_eq!(op(s.identity, a), a);
    }

    #[test]
    fn every_label_routes_in_depth_hops(fam in family(), n in 2usize..150, seed in 0u64..1000) {
        let g = generate_with_density(fam, n, seed, 1.0).unwrap();
        let mut net = Network::new(&g, None, EngineConfig::default());
        build_bfs_tree(&mut net, 0).unwrap();
        setup_routing(&mut net).unwrap();
        for dest in 0..n {
            let label = net.states[dest].routing.as_ref().unwrap().label.clone();
            let mut at = 0u32;
            let mut hops = 0;
            while let Hop::Forward(p) = route_next_hop(&net.states[at as usize].routing.as_ref().unwrap().table, &label).unwrap() {
                at = g.port(at, p).nbr;
                hops += 1;
                prop_assert!(hops <= n);
            }
            prop_assert_eq!(at as usize, dest);
            prop_assert_eq!(hops as u32, net.states[dest].bfs.unwrap().depth);
        }
    }

    #[test]
    fn ports_are_consistent(fam in family(), n in 1usize..100, seed in 0u64..1000) {
        let g = generate_with_density(fam, n, seed, 1.5).unwrap();
        let weights: BTreeSet<u64> = g.edges().iter().map(|e| e.w).collect();
        prop_assert_eq!(weights.len(), g.m());
        for v in 0..n as u32 {
            for a in g.ports(v) {
                let back = g.port(a.nbr, a.rev);
                prop_assert_eq!((back.nbr, back.edge, back.w), (v, a.edge, a.w));
            }
        }
        prop_assert!(g.is_connected());
        prop_assert_eq!(g, generate_with_density(fam, n, seed, 1.5).unwrap());
    }

    #[test]
    fn whole_part_mask_is_identity(n in 1usize..60, seed in 0u64..100) {
        let g = generate_with_density(Family::RandomConnected, n, seed, 1.0).unwrap();
        let mask = induced_mask(&g, &Partition::single(n));
        prop_assert!((0..g.m() as u32).all(|e| mask.contains(e)));
    }

    #[test]
    fn consecutive_ranges_validate(lens in proptest::collection::vec(1u32..5, 1..12)) {
        let entries = ranges(&lens);
        let limit = entries.len() as u32;
        prop_assert!(validate_slot_set(&entries, limit).is_ok());
    }

    #[test]
    fn broken_ranges_are_caught(lens in proptest::collection::vec(1u32..5, 2..12), pick in any::<prop::sample::Index>(), kind in 0usize..3) {
        let mut entries = ranges(&lens);
        let limit = entries.len() as u32;
        let i = pick.index(entries.len());
        match kind {
            // duplicate a slot
            0 => {
                let j = (i + 1) % entries.len();
                entries[j].slot = entries[i].slot;
            }
            // leader flag on a non-first slot or missing
            1 => entries[i].leader = !entries[i].leader,
            // slot beyond the limit
            _ => entries[i].slot = limit + 1 + i as u32,
        }
        prop_assert!(validate_slot_set(&entries, limit).is_err());
    }

    #[test]
    fn frames_reassemble(bits in proptest::collection::vec(any::<bool>(), 0..300), word in 1u32..40, macro_round in 1u64..50) {
        let msg = BitString::from_bits(bits);
        let w = (msg.len() as u32).div_ceil(word).max(1);
        let frames = transmit(&msg, 0, macro_round, word, w).unwrap();
        let window = (macro_round - 1) * w as u64 + 1..=macro_round * w as u64;
        prop_assert!(frames.iter().all(|f| window.contains(&f.round) && f.payload.len() <= word as usize));
        prop_assert_eq!(reassemble(&frames), msg);
        prop_assert!(transmit(&BitString::zeros((word * w + 1) as usize), 0, macro_round, word, w).is_err());
    }
}
