//! Part one: Lenzen-gated GHS/GKP phases run directly on fragment trees until
//! every fragment is large (at least `k = max(d(T), ceil(sqrt n))` vertices)
//! or spans its component. The resulting fragments are the base fragments.

use crate::engine::{Ctx, Footprint, InitCx, Network, Payload, Protocol, Widths};
use crate::error::{Error, Fault};
use crate::graph::{Port, VertexId};
use crate::phase2::exchange::{match_and_attach, reset_virtual, three_coloring, FragmentChannel, XFold, XVal};
use crate::spanning::{global_fold, tree_broadcast, tree_convergecast, AndFold, Flag, Known, MinFold, MinKey, TreeFold, TreeSel};
use crate::state::VertexState;

/// Fragment channel for part one: plain tree operations inside each fragment.
pub struct TreeChannel;

impl FragmentChannel for TreeChannel {
    fn converge(&mut self, net: &mut Network<'_>, fold: &XFold, inputs: Vec<Option<XVal>>) -> Result<Vec<Option<Option<XVal>>>, Error> {
        Ok(tree_convergecast(net, TreeSel::Fragment, fold, inputs)?.root_values)
    }

    fn publish(&mut self, net: &mut Network<'_>, content: Vec<Option<XVal>>) -> Result<Vec<Option<XVal>>, Error> {
        let got = tree_broadcast(net, Known::Parent(TreeSel::Fragment), content)?;
        Ok(got.into_iter().map(|d| d.map(|d| d.value)).collect())
    }

    fn is_leader(&self, st: &VertexState) -> bool {
        st.frag.parent.is_none()
    }
}

/// Subtree summary: two largest downward path lengths, diameter, size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Shape {
    pub height: u32,
    pub second: u32,
    pub diam: u32,
    pub size: u32,
}

impl Payload for Shape {
    fn wire_bits(&self, w: &Widths) -> u64 {
        4 * w.count as u64
    }
}

impl Footprint for Shape {
    fn bits(&self, w: &Widths) -> u64 {
        4 * w.count as u64
    }
}

/// Exact tree diameter in one upward sweep. The left operand is the
/// accumulator of the receiving vertex, the right one a child's summary.
pub struct ShapeFold;

impl TreeFold for ShapeFold {
    type V = Shape;
    fn combine(&self, a: &Shape, b: &Shape) -> Shape {
        let c = b.height + 1;
        let (height, second) = if c > a.height { (c, a.height) } else { (a.height, a.second.max(c)) };
        Shape { height, second, diam: a.diam.max(b.diam).max(height + second), size: a.size + b.size }
    }
    fn max_bits(&self, w: &Widths) -> u64 {
        4 * w.count as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Probe {
    pub frag: VertexId,
    /// The sender records this edge as a member of the input subgraph.
    pub rec: bool,
    pub part: Option<u32>,
}

impl Payload for Probe {
    fn wire_bits(&self, w: &Widths) -> u64 {
        w.id as u64 + 1 + self.part.map_or(0, |_| w.count as u64)
    }
}

struct ProbeRound<C> {
    compute: C,
}

impl<C: Fn(&VertexState) -> bool> Protocol for ProbeRound<C> {
    type Msg = Probe;
    type Local = ();

    fn name(&self) -> &'static str {
        "probe"
    }

    fn max_message_bits(&self, w: &Widths) -> u64 {
        w.id as u64 + 1 + w.count as u64
    }

    fn init(&self, cx: &mut InitCx<'_>, _: &VertexState) {
        if cx.degree() > 0 {
            cx.wake_at(1);
        }
    }

    fn step(&self, cx: &mut Ctx<'_, Probe>, st: &mut VertexState, _: &mut ()) -> Result<(), Fault> {
        if cx.round == 1 {
            st.frag.cand = None;
            for p in 0..cx.degree() as Port {
                let rec = cx.records(p);
                cx.send(p, Probe { frag: st.frag.id, rec, part: st.pwa.part });
            }
            return Ok(());
        }
        let compute = (self.compute)(st);
        for p in cx.fresh().to_vec() {
            let Some(m) = cx.take(p) else { continue };
            if !compute || m.frag == st.frag.id {
                continue;
            }
            let member = match st.pwa.part {
                Some(own) => m.part == Some(own),
                None => !cx.masked() || cx.records(p) || m.rec,
            };
            let w = cx.weight(p);
            if member && st.frag.cand.is_none_or(|(best, _)| w < best) {
                st.frag.cand = Some((w, p));
            }
        }
        Ok(())
    }
}

/// One round of probes over every edge: fragment id, part id and mask
/// membership. Vertices selected by `compute` keep their lightest
/// cross-fragment member edge in `frag.cand`.
pub fn probe_round(net: &mut Network<'_>, compute: impl Fn(&VertexState) -> bool) -> Result<(), Error> {
    for st in &mut net.states {
        st.frag.cand = None;
    }
    net.run(&ProbeRound { compute })?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Notify;

impl Payload for Notify {
    fn wire_bits(&self, _: &Widths) -> u64 {
        1
    }
}

/// The fragment root walks the retrace pointers down to `v_adj`.
struct NotifyChain {
    starts: Vec<bool>,
}

impl NotifyChain {
    fn reach(cx: &mut Ctx<'_, Notify>, st: &mut VertexState) -> Result<(), Fault> {
        match st.frag.e0.take() {
            Some(p) => cx.send(p, Notify),
            None => {
                let (_, port) = st.frag.cand.ok_or_else(|| Fault::protocol("retrace ended at a vertex without a candidate"))?;
                st.frag.mwoe = Some(port);
            }
        }
        Ok(())
    }
}

impl Protocol for NotifyChain {
    type Msg = Notify;
    type Local = ();

    fn name(&self) -> &'static str {
        "mwoe-notify"
    }

    fn max_message_bits(&self, _: &Widths) -> u64 {
        1
    }

    fn init(&self, cx: &mut InitCx<'_>, _: &VertexState) {
        if self.starts[cx.v as usize] {
            cx.wake_at(1);
        }
    }

    fn step(&self, cx: &mut Ctx<'_, Notify>, st: &mut VertexState, _: &mut ()) -> Result<(), Fault> {
        if cx.round == 1 && self.starts[cx.v as usize] {
            return Self::reach(cx, st);
        }
        for p in cx.fresh().to_vec() {
            if cx.take(p).is_some() {
                Self::reach(cx, st)?;
            }
        }
        Ok(())
    }
}

/// Shape of the fragment forest at the start of a phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseShape {
    pub phase: u32,
    pub fragments: u32,
    /// Smallest fragment that is not terminated (`None` if all are).
    pub min_active_size: Option<u32>,
    pub max_diam: u32,
    pub participating: u32,
    /// Fragments found without an outgoing edge this phase.
    pub terminated: u32,
    /// Fragments that merged with at least one other this phase.
    pub merged: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Phase1Report {
    pub k: u32,
    pub phases: Vec<PhaseShape>,
    pub base_fragments: u32,
    pub small_components: u32,
    pub max_depth: u32,
}

/// Threshold `k = max(d(T), ceil(sqrt n))`.
pub fn threshold(n: usize, dt: u32) -> u32 {
    let mut r = (n as f64).sqrt() as u32;
    while (r as usize) * (r as usize) < n {
        r += 1;
    }
    dt.max(r)
}

/// Run one Lenzen phase; returns the shape observed at its start, or `None`
/// when the stop rule holds.
pub fn run_fragment_phase(net: &mut Network<'_>, i: u32, k: u32) -> Result<Option<PhaseShape>, Error> {
    let n = net.n();
    let shape_in = vec![Some(Shape { height: 0, second: 0, diam: 0, size: 1 }); n];
    let shapes = tree_convergecast(net, TreeSel::Fragment, &ShapeFold, shape_in)?.root_values;
    let done: Vec<Option<Flag>> = shapes
        .iter()
        .zip(&net.states)
        .map(|(s, st)| s.flatten().map(|s| Flag(s.size >= k || st.frag.terminated)))
        .collect();
    if global_fold(net, &AndFold, done)?.is_some_and(|f| f.0) {
        return Ok(None);
    }
    let gate = 1u64 << i.min(40);
    let decide: Vec<Option<XVal>> = shapes
        .iter()
        .zip(&net.states)
        .map(|(s, st)| s.flatten().map(|s| XVal::new((!st.frag.terminated && s.diam as u64 <= gate) as u64, 1)))
        .collect();
    let got = TreeChannel.publish(net, decide)?;
    for (st, g) in net.states.iter_mut().zip(got) {
        st.frag.participate = g.is_some_and(|g| g.value == 1);
    }
    probe_round(net, |st| st.frag.participate)?;
    let wb = net.widths.weight;
    let cands = net.states.iter().map(|st| st.frag.cand.filter(|_| st.frag.participate).map(|(w, _)| MinKey(w, wb))).collect();
    let out = tree_convergecast(net, TreeSel::Fragment, &MinFold(wb), cands)?;
    let mut starts = vec![false; n];
    let mut status = vec![None; n];
    for (v, st) in net.states.iter_mut().enumerate() {
        st.frag.e0 = out.retrace[v];
        if let Some(min) = &out.root_values[v] {
            let has = st.frag.participate && min.is_some();
            let term = st.frag.terminated || (st.frag.participate && min.is_none());
            starts[v] = has;
            status[v] = Some(XVal::new(has as u64 | (term as u64) << 1, 2));
        }
    }
    net.run(&NotifyChain { starts })?;
    let got = TreeChannel.publish(net, status)?;
    let flags: Vec<u64> = got.iter().map(|g| g.map_or(0, |g| g.value)).collect();
    for (st, f) in net.states.iter_mut().zip(&flags) {
        st.frag.terminated = f & 2 != 0;
        st.frag.e0 = None;
    }
    reset_virtual(net, |st| st.frag.mwoe.is_some());
    for (st, f) in net.states.iter_mut().zip(&flags) {
        st.virt.has_parent = f & 1 != 0;
    }
    let mut ch = TreeChannel;
    three_coloring(net, &mut ch)?;
    match_and_attach(net, &mut ch)?;
    let (participating, terminated_now) = shapes.iter().zip(&net.states).fold((0, 0), |(p, t), (s, st)| {
        if s.is_some() {
            (p + st.frag.participate as u32, t + (st.frag.participate && st.frag.terminated) as u32)
        } else {
            (p, t)
        }
    });
    let before: Vec<VertexId> = net.states.iter().map(|s| s.frag.id).collect();
    merge_subtrees(net)?;
    let merged = {
        let mut groups = std::collections::BTreeMap::<VertexId, std::collections::BTreeSet<VertexId>>::new();
        for (st, b) in net.states.iter().zip(&before) {
            groups.entry(st.frag.id).or_default().insert(*b);
        }
        groups.values().filter(|g| g.len() > 1).map(|g| g.len() as u32).sum()
    };
    let roots: Vec<&Shape> = shapes.iter().flatten().flatten().collect();
    Ok(Some(PhaseShape {
        phase: i,
        fragments: roots.len() as u32,
        min_active_size: shapes
            .iter()
            .zip(net.states.iter().zip(&flags))
            .filter_map(|(s, (_, f))| s.flatten().filter(|_| f & 2 == 0).map(|s| s.size))
            .min(),
        max_diam: roots.iter().map(|s| s.diam).max().unwrap_or(0),
        participating,
        terminated: terminated_now,
        merged,
    }))
}

/// Record the merge edges and re-root every merge subtree at the root
/// vertex of its subtree-root fragment, which also names the new fragment.
fn merge_subtrees(net: &mut Network<'_>) -> Result<(), Error> {
    let mut known = Vec::with_capacity(net.n());
    let mut content = Vec::with_capacity(net.n());
    for (v, st) in net.states.iter_mut().enumerate() {
        let mut ports: Vec<Port> = st.frag.parent.into_iter().collect();
        if let Some(p) = st.frag.mwoe.filter(|_| st.virt.mwoe_used()) {
            st.frag.mst.push(p);
            ports.push(p);
        }
        known.push(ports);
        let origin = st.frag.parent.is_none() && st.virt.subtree_root;
        content.push(origin.then_some(XVal::new(v as u64, net.widths.id)));
    }
    let got = tree_broadcast(net, Known::Ports(known), content)?;
    for (v, (st, d)) in net.states.iter_mut().zip(got).enumerate() {
        let d = d.ok_or_else(|| Error::Invariant(format!("vertex {} missed its merge broadcast", v + 1)))?;
        st.frag.id = d.value.value as VertexId;
        st.frag.parent = d.from;
        st.frag.children = d.tree_degree - d.from.is_some() as u32;
        st.frag.mwoe = None;
        st.frag.cand = None;
        st.uplink = None;
        st.virt = Default::default();
    }
    Ok(())
}

/// Run phases until the stop rule holds. On return every fragment tree is
/// rooted at its id vertex; fragments without outgoing edges are marked
/// small.
pub fn form_base_fragments(net: &mut Network<'_>) -> Result<Phase1Report, Error> {
    let n = net.n();
    let dt = net.states[0].bfs.and_then(|b| b.tree_depth).unwrap_or(0);
    let k = threshold(n, dt);
    for (v, st) in net.states.iter_mut().enumerate() {
        st.frag = Default::default();
        st.frag.id = v as VertexId;
    }
    let cap = 2 * net.widths.log_n + 6;
    let mut phases = Vec::new();
    for i in 0.. {
        if i > cap {
            return Err(Error::Invariant(format!("fragment threshold {k} not reached within {cap} phases")));
        }
        net.begin_phase(&format!("p1-{i}"));
        match run_fragment_phase(net, i, k)? {
            Some(s) => phases.push(s),
            None => break,
        }
    }
    for st in &mut net.states {
        st.frag.small = st.frag.terminated;
        st.frag.participate = false;
    }
    let roots = net.states.iter().filter(|s| s.frag.parent.is_none());
    let (base, small) = roots.fold((0, 0), |(b, s), st| if st.frag.small { (b, s + 1) } else { (b + 1, s) });
    let max_depth = crate::cycle::CycleEnv::from_network(net).db;
    Ok(Phase1Report { k, phases, base_fragments: base, small_components: small, max_depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use crate::graph::{generate_graph, oracle_msf, Edge, Family, WeightedGraph};
    use crate::spanning::build_bfs_tree;
    use std::collections::BTreeSet;

    /// Edge indices recorded as MST edges.
    pub(crate) fn recorded(net: &Network<'_>) -> BTreeSet<u32> {
        let g = net.graph();
        let mut out = BTreeSet::new();
        for (v, st) in net.states.iter().enumerate() {
            for &p in &st.frag.mst {
                assert!(out.insert(g.port(v as VertexId, p).edge), "edge recorded twice");
            }
        }
        out
    }

    fn run(g: &WeightedGraph) -> (Network<'_>, Phase1Report) {
        let mut net = Network::new(g, None, EngineConfig::default());
        build_bfs_tree(&mut net, 0).unwrap();
        let rep = form_base_fragments(&mut net).unwrap();
        (net, rep)
    }

    /// Fragment trees agree with fragment ids and with the recorded edges.
    fn check_forest(net: &Network<'_>) {
        let g = net.graph();
        for (v, st) in net.states.iter().enumerate() {
            let mut at = v as VertexId;
            let mut steps = 0;
            while let Some(p) = net.states[at as usize].frag.parent {
                let next = g.port(at, p).nbr;
                assert_eq!(net.states[next as usize].frag.id, st.frag.id);
                at = next;
                steps += 1;
                assert!(steps <= g.n());
            }
            assert_eq!(at, st.frag.id, "fragment root names the fragment");
        }
        let rec = recorded(net);
        let frags: BTreeSet<VertexId> = net.states.iter().map(|s| s.frag.id).collect();
        assert_eq!(rec.len() + frags.len(), g.n());
        let oracle = oracle_msf(g, None);
        assert!(rec.is_subset(&oracle));
    }

    #[test]
    fn shape_fold_measures_diameter() {
        let leaf = Shape { height: 0, second: 0, diam: 0, size: 1 };
        let mid = ShapeFold.combine(&leaf, &leaf);
        assert_eq!((mid.height, mid.diam, mid.size), (1, 1, 2));
        let top = ShapeFold.combine(&ShapeFold.combine(&leaf, &mid), &mid);
        assert_eq!((top.height, top.second, top.diam, top.size), (2, 2, 4, 5));
    }

    #[test]
    fn threshold_rounds_up() {
        assert_eq!(threshold(64, 3), 8);
        assert_eq!(threshold(65, 3), 9);
        assert_eq!(threshold(16, 10), 10);
    }

    #[test]
    fn triangle_merges_in_one_phase() {
        let g = WeightedGraph::new(3, vec![Edge { u: 0, v: 1, w: 1 }, Edge { u: 1, v: 2, w: 2 }, Edge { u: 0, v: 2, w: 3 }]).unwrap();
        let (net, rep) = run(&g);
        assert!(net.states.iter().all(|s| s.frag.id == net.states[0].frag.id));
        let rec = recorded(&net);
        let ws: BTreeSet<u64> = rec.iter().map(|&e| g.edge(e).w).collect();
        assert_eq!(ws, BTreeSet::from([1, 2]));
        assert_eq!(rep.phases.len(), 1);
    }

    #[test]
    fn single_edge_roots_at_higher_id() {
        let g = WeightedGraph::new(2, vec![Edge { u: 0, v: 1, w: 1 }]).unwrap();
        let (net, _) = run(&g);
        assert!(net.states.iter().all(|s| s.frag.id == 1));
        assert_eq!(net.states[1].frag.parent, None);
    }

    #[test]
    fn cycle_and_random_graphs_form_valid_forests() {
        for (fam, n, seed) in [(Family::Cycle, 4, 3), (Family::Path, 100, 0), (Family::RandomConnected, 64, 1), (Family::Grid, 64, 2), (Family::Star, 30, 0)] {
            let g = generate_graph(fam, n, seed).unwrap();
            let (net, rep) = run(&g);
            check_forest(&net);
            let roots = net.states.iter().filter(|s| s.frag.parent.is_none());
            for st in roots {
                if !st.frag.small {
                    let size = net.states.iter().filter(|s| s.frag.id == st.frag.id).count() as u32;
                    assert!(size >= rep.k, "{fam} {n}: fragment of {size} < k = {}", rep.k);
                }
            }
        }
    }

    #[test]
    fn complete_graph_saturates() {
        let g = generate_graph(Family::Complete, 8, 0).unwrap();
        let (net, rep) = run(&g);
        check_forest(&net);
        assert!(rep.phases.len() <= 3);
    }
}
