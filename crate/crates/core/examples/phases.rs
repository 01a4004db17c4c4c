//! Part two phase by phase: active fragments, cycles used, and the slot set
//! after every phase.

use congest_mst::engine::{EngineConfig, Network};
use congest_mst::graph::{generate_graph, Family};
use congest_mst::phase2::run_second_part;
use congest_mst::pwa::{check_slots, run_setup};
use congest_mst::slots::slot_entries;

fn main() {
    let g = generate_graph(Family::RandomConnected, 2048, 8).unwrap();
    let mut net = Network::new(&g, None, EngineConfig::default());
    let setup = run_setup(&mut net).unwrap();
    let kb = setup.env.kb;
    println!("{kb} base fragments, threshold k = {}", setup.phase1.k);
    let reports = run_second_part(&mut net, setup.env, |net| {
        let fragments: std::collections::BTreeSet<u32> = slot_entries(net).iter().map(|e| e.fragment).collect();
        println!("  slot set valid, {} fragments", fragments.len());
        check_slots(net, kb)
    })
    .unwrap();
    for r in reports {
        println!("phase {}: {} active fragments, {} cycles", r.phase, r.active_before, r.cycles);
    }
}
