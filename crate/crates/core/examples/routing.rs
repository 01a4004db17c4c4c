//! Tree routing over the BFS tree: label sizes and a routed walk.

use congest_mst::engine::{EngineConfig, Network};
use congest_mst::graph::{generate_graph, Family};
use congest_mst::routing::{route_next_hop, setup_routing, Hop};
use congest_mst::spanning::build_bfs_tree;

fn main() {
    let g = generate_graph(Family::RandomConnected, 1000, 5).unwrap();
    let mut net = Network::new(&g, None, EngineConfig::default());
    let depth = build_bfs_tree(&mut net, 0).unwrap();
    setup_routing(&mut net).unwrap();
    let w = net.widths;
    let widest = (0..g.n()).max_by_key(|&v| net.states[v].routing.as_ref().unwrap().label.width(&w)).unwrap();
    let label = net.states[widest].routing.as_ref().unwrap().label.clone();
    println!("d(T)={depth}, widest label at vertex {} : {} bits, {} light edges", widest + 1, label.width(&w), label.light.len());
    let mut at = 0;
    let mut path = vec![1];
    while let Hop::Forward(p) = route_next_hop(&net.states[at as usize].routing.as_ref().unwrap().table, &label).unwrap() {
        at = g.port(at, p).nbr;
        path.push(at + 1);
    }
    println!("route from the root: {path:?}");
}
