//! Partwise aggregation: every vertex learns the sum, minimum and maximum of
//! its part.

use congest_mst::engine::EngineConfig;
use congest_mst::graph::{generate_graph, random_partition, Family};
use congest_mst::pwa::{solve_pwa, AggregationSpec};

fn main() {
    let g = generate_graph(Family::Grid, 144, 2).unwrap();
    let p = random_partition(&g, 5, 11);
    let xs: Vec<u64> = (0..g.n() as u64).map(|v| (v * 29 + 3) % 100).collect();
    for f in ["sum", "min", "max"] {
        let spec = AggregationSpec::by_name(f, 7).unwrap();
        let out = solve_pwa(&g, &p, &spec, &xs, EngineConfig::default()).unwrap();
        let mut seen = std::collections::BTreeMap::new();
        for v in 0..g.n() {
            seen.entry(p.part(v as u32)).or_insert(out.outputs[v]);
        }
        println!("{f:>3}: {seen:?} in {} frame-rounds", out.msf.metrics.rounds_elapsed);
    }
}
