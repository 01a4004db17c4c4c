//! A hand-written protocol on the engine: flood a token from vertex 1 and
//! record the round each vertex first hears it.

use congest_mst::engine::{Ctx, EngineConfig, Footprint, InitCx, Network, Payload, Protocol, Widths};
use congest_mst::error::Fault;
use congest_mst::graph::{generate_graph, Family, Port};
use congest_mst::state::VertexState;

struct Token;

impl Payload for Token {
    fn wire_bits(&self, _: &Widths) -> u64 {
        1
    }
}

#[derive(Default)]
struct Heard(Option<u64>);

impl Footprint for Heard {
    fn bits(&self, w: &Widths) -> u64 {
        1 + self.0.map_or(0, |_| w.count as u64)
    }
}

struct Flood;

impl Protocol for Flood {
    type Msg = Token;
    type Local = Heard;

    fn name(&self) -> &'static str {
        "flood"
    }
    fn max_message_bits(&self, _: &Widths) -> u64 {
        1
    }
    fn init(&self, cx: &mut InitCx<'_>, _: &VertexState) -> Heard {
        if cx.v == 0 {
            cx.wake_at(1);
        }
        Heard::default()
    }
    fn step(&self, cx: &mut Ctx<'_, Token>, _: &mut VertexState, h: &mut Heard) -> Result<(), Fault> {
        if h.0.is_some() {
            return Ok(());
        }
        h.0 = Some(cx.round);
        for p in 0..cx.degree() as Port {
            cx.send(p, Token);
        }
        Ok(())
    }
}

fn main() {
    let g = generate_graph(Family::Grid, 64, 1).unwrap();
    let mut net = Network::new(&g, None, EngineConfig::default());
    let (heard, stats) = net.run(&Flood).unwrap();
    let rounds: Vec<u64> = heard.iter().map(|h| h.0.unwrap()).collect();
    for row in rounds.chunks(8) {
        println!("{row:?}");
    }
    println!("{} rounds, {} frames", stats.macro_rounds, stats.frames);
}
