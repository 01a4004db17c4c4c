//! End-to-end solvers: setup, MST/MSF, and partwise aggregation through the
//! MSF of the part-induced subgraph.

use std::collections::BTreeSet;

use crate::cycle::{broadcast_cycle, convergecast_cycle, CycleEnv};
use crate::engine::{bits_for, EngineConfig, MetricsCounters, Network, TraceEvent, Widths};
use crate::error::Error;
use crate::graph::{Partition, SubgraphMask, VertexId, WeightedGraph};
use crate::phase1::{form_base_fragments, Phase1Report};
use crate::phase2::exchange::{XFold, XVal};
use crate::phase2::{run_second_part, PhaseReport};
use crate::routing::setup_routing;
use crate::slots::{assign_initial_slots, slot_entries, validate_slot_set};
use crate::spanning::{build_bfs_tree, tree_broadcast, tree_convergecast, Known, TreeSel};

#[derive(Clone, Debug)]
pub struct SetupReport {
    pub phase1: Phase1Report,
    pub env: CycleEnv,
    pub max_label_bits: u64,
}

/// BFS tree from vertex 0, routing, base fragments, then one slot per
/// non-small base fragment. Small components get no slot.
pub fn run_setup(net: &mut Network<'_>) -> Result<SetupReport, Error> {
    net.begin_phase("bfs");
    build_bfs_tree(net, 0)?;
    net.begin_phase("routing");
    let max_label_bits = setup_routing(net)?;
    let phase1 = form_base_fragments(net)?;
    net.begin_phase("slots");
    assign_initial_slots(net)?;
    let env = CycleEnv::from_network(net);
    Ok(SetupReport { phase1, env, max_label_bits })
}

#[derive(Clone, Debug)]
pub struct MsfOutcome {
    /// Edge indices recorded by some vertex.
    pub edges: BTreeSet<u32>,
    pub metrics: MetricsCounters,
    pub widths: Widths,
    pub setup: SetupReport,
    pub phases: Vec<PhaseReport>,
    /// How many slot sets were validated (after setup and every phase).
    pub slot_checks: usize,
    /// Slot ownership per round and vertex, if tracing was enabled.
    pub trace: Vec<TraceEvent>,
}

/// Slot-set check run by the harness between phases.
pub fn check_slots(net: &Network<'_>, kb: u32) -> Result<(), Error> {
    validate_slot_set(&slot_entries(net), 2 * kb.max(1)).map_err(|v| Error::Invariant(format!("slot set: {}", v.join("; "))))
}

/// Union of the MST edges recorded at the vertices.
pub fn recorded_edges(net: &Network<'_>) -> Result<BTreeSet<u32>, Error> {
    let g = net.graph();
    let mut out = BTreeSet::new();
    for (v, st) in net.states.iter().enumerate() {
        for &p in &st.frag.mst {
            let e = g.port(v as VertexId, p).edge;
            if !out.insert(e) {
                return Err(Error::Invariant(format!("edge {e} recorded twice")));
            }
        }
    }
    Ok(out)
}

fn drive(net: &mut Network<'_>) -> Result<(SetupReport, Vec<PhaseReport>, usize), Error> {
    let setup = run_setup(net)?;
    let kb = setup.env.kb;
    check_slots(net, kb)?;
    let mut checks = 1;
    let phases = run_second_part(net, setup.env, |net| {
        checks += 1;
        check_slots(net, kb)
    })?;
    Ok((setup, phases, checks))
}

/// MST (no mask) or MSF of the masked subgraph.
pub fn solve_msf(g: &WeightedGraph, mask: Option<&SubgraphMask>, cfg: EngineConfig) -> Result<MsfOutcome, Error> {
    let mut net = Network::new(g, mask, cfg);
    let (setup, phases, slot_checks) = drive(&mut net)?;
    Ok(MsfOutcome {
        edges: recorded_edges(&net)?,
        metrics: net.metrics.clone(),
        widths: net.widths,
        setup,
        phases,
        slot_checks,
        trace: std::mem::take(&mut net.trace),
    })
}

/// A commutative associative fold over fixed-width values.
#[derive(Clone, Copy, Debug)]
pub struct AggregationSpec {
    pub name: &'static str,
    pub identity: u64,
    pub combine: fn(u64, u64) -> u64,
    /// Width of inputs.
    pub input_bits: u32,
}

impl AggregationSpec {
    pub fn by_name(name: &str, input_bits: u32) -> Result<Self, Error> {
        let (name, identity, combine): (&'static str, u64, fn(u64, u64) -> u64) = match name {
            "min" => ("min", u64::MAX, |a, b| a.min(b)),
            "max" => ("max", 0, |a, b| a.max(b)),
            "sum" => ("sum", 0, |a, b| a + b),
            "xor" => ("xor", 0, |a, b| a ^ b),
            other => return Err(Error::Usage(format!("unknown aggregation {other:?}"))),
        };
        Ok(AggregationSpec { name, identity, combine, input_bits })
    }

    /// Width of a fold over at most `n` inputs.
    pub fn output_bits(&self, n: usize) -> u32 {
        match self.name {
            "sum" => self.input_bits + bits_for(n as u64),
            _ => self.input_bits,
        }
    }

    pub fn fold(&self, xs: impl IntoIterator<Item = u64>) -> u64 {
        xs.into_iter().fold(self.identity, self.combine)
    }
}

#[derive(Clone, Debug)]
pub struct PwaOutcome {
    pub outputs: Vec<u64>,
    pub msf: MsfOutcome,
}

/// Every vertex learns the fold of the inputs of its part.
pub fn solve_pwa(g: &WeightedGraph, p: &Partition, spec: &AggregationSpec, inputs: &[u64], cfg: EngineConfig) -> Result<PwaOutcome, Error> {
    if inputs.len() != g.n() {
        return Err(Error::Usage(format!("{} inputs for {} vertices", inputs.len(), g.n())));
    }
    let mut net = Network::new(g, None, cfg);
    if spec.input_bits > net.widths.word {
        return Err(Error::Usage(format!("inputs of {} bits exceed the {}-bit word", spec.input_bits, net.widths.word)));
    }
    if let Some(x) = inputs.iter().find(|&&x| spec.input_bits < 64 && x >> spec.input_bits != 0) {
        return Err(Error::Usage(format!("input {x} does not fit {} bits", spec.input_bits)));
    }
    for (v, st) in net.states.iter_mut().enumerate() {
        st.pwa.part = Some(p.part(v as VertexId));
        st.pwa.input = Some(inputs[v]);
        st.pwa.value_bits = spec.input_bits;
    }
    let (setup, phases, slot_checks) = drive(&mut net)?;
    net.begin_phase("pwa");
    let bits = spec.output_bits(g.n());
    let fold = XFold { op: spec.combine, bits };
    let xs: Vec<Option<XVal>> = net.states.iter().map(|st| st.pwa.input.map(|x| XVal::new(x, bits))).collect();
    let slotted = |st: &crate::state::VertexState| !st.frag.small;
    let at = convergecast_cycle(&mut net, &setup.env, &fold, xs.clone(), slotted)?.at_leaders;
    let got = broadcast_cycle(
        &mut net,
        &setup.env,
        |v, st| {
            let r = at[v as usize].flatten().filter(|_| st.cycle.is_leader && !st.frag.small)?;
            Some((st.cycle.slot?, None, r))
        },
        &|_, st| st.cycle.slot.filter(|_| !st.frag.small && !st.cycle.is_leader).map(|s| (s, None)),
    )?;
    // small components: one fragment spanning the component, plain tree operations
    let small_xs = xs.iter().zip(&net.states).map(|(x, st)| x.filter(|_| st.frag.small)).collect();
    let small = tree_convergecast(&mut net, TreeSel::Fragment, &fold, small_xs)?;
    let origins = small.root_values.into_iter().zip(&net.states).map(|(r, st)| r.flatten().filter(|_| st.frag.small)).collect();
    let small_got = tree_broadcast(&mut net, Known::Parent(TreeSel::Fragment), origins)?;
    let mut outputs = Vec::with_capacity(g.n());
    for (v, (a, b)) in got.into_iter().zip(small_got).enumerate() {
        let out = a.or(b.map(|d| d.value)).ok_or_else(|| Error::Invariant(format!("vertex {} got no aggregate", v + 1)))?;
        net.states[v].pwa.output = Some(out.value);
        outputs.push(out.value);
    }
    let msf = MsfOutcome {
        edges: recorded_edges(&net)?,
        metrics: net.metrics.clone(),
        widths: net.widths,
        setup,
        phases,
        slot_checks,
        trace: std::mem::take(&mut net.trace),
    };
    Ok(PwaOutcome { outputs, msf })
}

/// Edge list of a result, `u v w` per line with 1-based ids, sorted.
pub fn edge_dump(g: &WeightedGraph, edges: &BTreeSet<u32>) -> String {
    let mut lines: Vec<(u32, u32, u64)> = edges
        .iter()
        .map(|&e| {
            let ed = g.edge(e);
            (ed.u.min(ed.v) + 1, ed.u.max(ed.v) + 1, ed.w)
        })
        .collect();
    lines.sort_unstable();
    let mut s = String::new();
    for (u, v, w) in lines {
        s.push_str(&format!("{u} {v} {w}\n"));
    }
    s
}

/// `vertex value` lines with 1-based ids.
pub fn value_dump(outputs: &[u64]) -> String {
    outputs.iter().enumerate().map(|(v, x)| format!("{} {x}\n", v + 1)).collect()
}
