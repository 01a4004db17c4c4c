//! Minimum spanning forest of the subgraph induced by a random partition.

use congest_mst::engine::EngineConfig;
use congest_mst::graph::{generate_graph, induced_mask, oracle_msf, random_partition, Family};
use congest_mst::pwa::solve_msf;

fn main() {
    let g = generate_graph(Family::RandomConnected, 200, 3).unwrap();
    let p = random_partition(&g, 6, 3);
    let mask = induced_mask(&g, &p);
    let out = solve_msf(&g, Some(&mask), EngineConfig::default()).unwrap();
    println!("{} parts, {} forest edges (n - parts = {})", p.count(), out.edges.len(), g.n() - p.count());
    println!("small components: {}", out.setup.phase1.small_components);
    println!("equals Kruskal on the masked weights: {}", out.edges == oracle_msf(&g, Some(&mask)));
}
