//! Minimum spanning tree of a random graph, checked against Kruskal.
//!
//! `cargo run --example mst -- 512 7`

use congest_mst::engine::EngineConfig;
use congest_mst::graph::{generate_graph, oracle_msf, Family};
use congest_mst::pwa::solve_msf;

fn main() {
    let mut args = std::env::args().skip(1);
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(256);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let g = generate_graph(Family::RandomConnected, n, seed).unwrap();
    let out = solve_msf(&g, None, EngineConfig::default()).unwrap();
    let weight: u64 = out.edges.iter().map(|&e| g.edge(e).w).sum();
    let m = &out.metrics;
    println!("n={n} m={} d(T)={} base fragments={}", g.m(), out.setup.env.dt, out.setup.env.kb);
    println!("tree weight {weight}, {} edges, equals Kruskal: {}", out.edges.len(), out.edges == oracle_msf(&g, None));
    println!("{} frame-rounds, {} frames, peak {} of {} bits", m.rounds_elapsed, m.frames_sent, m.global_peak, out.widths.budget);
    println!("{} phases in part one, {} in part two", out.setup.phase1.phases.len(), out.phases.len());
}
