//! A convergecast cycle then a broadcast cycle: each fragment counts its
//! vertices and tells them the total.

use congest_mst::cycle::{broadcast_cycle, convergecast_cycle};
use congest_mst::engine::{bits_for, EngineConfig, Network};
use congest_mst::graph::{generate_graph, Family};
use congest_mst::phase2::exchange::{XFold, XVal};
use congest_mst::pwa::run_setup;

fn main() {
    let g = generate_graph(Family::RandomConnected, 400, 4).unwrap();
    let mut net = Network::new(&g, None, EngineConfig::default());
    let env = run_setup(&mut net).unwrap().env;
    let bits = bits_for(g.n() as u64);
    let ones = vec![Some(XVal::new(1, bits)); g.n()];
    let at = convergecast_cycle(&mut net, &env, &XFold::sum(bits), ones, |st| !st.frag.small).unwrap().at_leaders;
    let got = broadcast_cycle(
        &mut net,
        &env,
        |v, st| Some((st.cycle.slot?, None, at[v as usize].flatten().filter(|_| st.cycle.is_leader)?)),
        &|_, st| st.cycle.slot.filter(|_| !st.cycle.is_leader).map(|s| (s, None)),
    )
    .unwrap();
    println!("{} base fragments, d(T)={}, fragment sizes seen at vertex 1: {:?}", env.kb, env.dt, got[0].map(|x| x.value));
    for c in &net.metrics.cycles {
        println!("{:?}: {} + {} frame-rounds, bound {}", c.kind, c.extrinsic_rounds, c.intrinsic_rounds, c.bound);
    }
}
