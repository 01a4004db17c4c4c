//! BFS tree construction and the compact tree primitives: request-pinning
//! broadcast, streaming convergecast with retrace pointers, and top-down
//! interval allocation.
//!
//! Trees are stored compactly: a vertex knows its parent port and its child
//! count, never its children's ports.

use crate::engine::{bits_for, Ctx, Footprint, InitCx, Network, Payload, Protocol, RunStats, Widths};
use crate::error::{Error, Fault};
use crate::graph::{Port, VertexId};
use crate::state::VertexState;

/// Position of a vertex in the BFS tree `T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct BfsInfo {
    pub parent: Option<Port>,
    pub depth: u32,
    pub children: u32,
    /// `d(T)`, known once the depth dissemination finished.
    pub tree_depth: Option<u32>,
}

impl Footprint for BfsInfo {
    fn bits(&self, w: &Widths) -> u64 {
        (1 + w.port + 3 * w.count) as u64
    }
}

/// Which stored tree a primitive runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeSel {
    /// The BFS tree `T`.
    Bfs,
    /// The fragment (or base-fragment) forest.
    Fragment,
}

impl TreeSel {
    /// `(parent port, child count)` if the vertex belongs to the tree.
    pub fn link(self, st: &VertexState) -> Option<(Option<Port>, u32)> {
        match self {
            TreeSel::Bfs => st.bfs.map(|b| (b.parent, b.children)),
            TreeSel::Fragment => Some((st.frag.parent, st.frag.children)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BfsMsg {
    Layer(u32),
    Join,
}

impl Payload for BfsMsg {
    fn wire_bits(&self, w: &Widths) -> u64 {
        match self {
            BfsMsg::Layer(_) => 1 + w.count as u64,
            BfsMsg::Join => 1,
        }
    }
}

struct BfsLayering {
    root: VertexId,
}

impl Protocol for BfsLayering {
    type Msg = BfsMsg;
    type Local = ();

    fn name(&self) -> &'static str {
        "bfs-layering"
    }

    fn max_message_bits(&self, w: &Widths) -> u64 {
        1 + w.count as u64
    }

    fn init(&self, cx: &mut InitCx<'_>, _: &VertexState) {
        if cx.v == self.root {
            cx.wake_at(1);
        }
    }

    fn step(&self, cx: &mut Ctx<'_, BfsMsg>, st: &mut VertexState, _: &mut ()) -> Result<(), Fault> {
        if cx.v == self.root && st.bfs.is_none() {
            st.bfs = Some(BfsInfo::default());
            for p in 0..cx.degree() as Port {
                cx.send(p, BfsMsg::Layer(0));
            }
            return Ok(());
        }
        let fresh: Vec<Port> = cx.fresh().to_vec();
        if let Some(b) = st.bfs.as_mut() {
            for p in fresh {
                if let Some(BfsMsg::Join) = cx.take(p) {
                    b.children += 1;
                }
            }
            return Ok(());
        }
        let first = fresh.iter().copied().find_map(|p| match cx.buffered(p) {
            Some(BfsMsg::Layer(d)) => Some((p, *d)),
            _ => None,
        });
        let Some((parent, d)) = first else { return Ok(()) };
        st.bfs = Some(BfsInfo { parent: Some(parent), depth: d + 1, children: 0, tree_depth: None });
        for p in fresh {
            cx.take(p);
        }
        for p in 0..cx.degree() as Port {
            if p == parent {
                cx.send(p, BfsMsg::Join);
            } else {
                cx.send(p, BfsMsg::Layer(d + 1));
            }
        }
        Ok(())
    }
}

/// Depth values combined by maximum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxU32(pub u32);

impl Payload for MaxU32 {
    fn wire_bits(&self, w: &Widths) -> u64 {
        w.count as u64
    }
}

impl Footprint for MaxU32 {
    fn bits(&self, w: &Widths) -> u64 {
        w.count as u64
    }
}

pub struct MaxFold;

impl TreeFold for MaxFold {
    type V = MaxU32;
    fn combine(&self, a: &MaxU32, b: &MaxU32) -> MaxU32 {
        MaxU32(a.0.max(b.0))
    }
    fn max_bits(&self, w: &Widths) -> u64 {
        w.count as u64
    }
}

/// Build `T` from `root`: layering, then `d(T)` by a max convergecast and a
/// broadcast. Every vertex ends with a complete [`BfsInfo`].
pub fn build_bfs_tree(net: &mut Network<'_>, root: VertexId) -> Result<u32, Error> {
    net.run(&BfsLayering { root })?;
    if let Some(v) = net.states.iter().position(|s| s.bfs.is_none()) {
        return Err(Error::Graph(format!("vertex {} unreachable from the BFS root: disconnected graph", v + 1)));
    }
    let inputs = net.states.iter().map(|s| s.bfs.map(|b| MaxU32(b.depth))).collect();
    let out = tree_convergecast(net, TreeSel::Bfs, &MaxFold, inputs)?;
    let dt = out.root_values[root as usize].flatten().map_or(0, |m| m.0);
    let content = (0..net.n()).map(|v| (v as VertexId == root).then_some(MaxU32(dt))).collect();
    let got = tree_broadcast(net, Known::Parent(TreeSel::Bfs), content)?;
    for (st, g) in net.states.iter_mut().zip(got) {
        let b = st.bfs.as_mut().unwrap();
        b.tree_depth = Some(g.map(|d| d.value.0).unwrap_or(dt));
    }
    net.widths.depth = bits_for(dt as u64);
    Ok(dt)
}

/// A commutative associative fold with identity `None`.
pub trait TreeFold {
    type V: Clone + PartialEq + Payload + Footprint;
    fn combine(&self, a: &Self::V, b: &Self::V) -> Self::V;
    fn max_bits(&self, w: &Widths) -> u64;
}

/// Fold `f` over an optional pair.
pub fn fold_opt<F: TreeFold>(f: &F, a: Option<&F::V>, b: Option<&F::V>) -> Option<F::V> {
    match (a, b) {
        (Some(x), Some(y)) => Some(f.combine(x, y)),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Up<V>(pub Option<V>);

impl<V: Payload> Payload for Up<V> {
    fn wire_bits(&self, w: &Widths) -> u64 {
        1 + self.0.as_ref().map_or(0, |v| v.wire_bits(w))
    }
}

pub struct ConvergeLocal<V> {
    pub acc: Option<V>,
    /// Port of the child whose value the accumulator currently holds.
    pub from: Option<Port>,
    got: u32,
    done: bool,
    member: bool,
}

impl<V: Footprint> Footprint for ConvergeLocal<V> {
    fn bits(&self, w: &Widths) -> u64 {
        if !self.member {
            return 0;
        }
        self.acc.bits(w) + 2 * w.count as u64 + 2 + w.port as u64
    }
}

struct TreeConverge<'a, F: TreeFold> {
    tree: TreeSel,
    fold: &'a F,
    inputs: Vec<Option<F::V>>,
}

impl<F: TreeFold> TreeConverge<'_, F> {
    fn complete(&self, cx: &mut Ctx<'_, Up<F::V>>, parent: Option<Port>, l: &mut ConvergeLocal<F::V>) {
        l.done = true;
        if let Some(p) = parent {
            cx.send(p, Up(l.acc.clone()));
        }
    }
}

impl<F: TreeFold> Protocol for TreeConverge<'_, F> {
    type Msg = Up<F::V>;
    type Local = ConvergeLocal<F::V>;

    fn name(&self) -> &'static str {
        "tree-convergecast"
    }

    fn max_message_bits(&self, w: &Widths) -> u64 {
        1 + self.fold.max_bits(w)
    }

    fn init(&self, cx: &mut InitCx<'_>, st: &VertexState) -> Self::Local {
        let member = self.tree.link(st).is_some();
        if let Some((_, 0)) = self.tree.link(st) {
            cx.wake_at(1);
        }
        ConvergeLocal { acc: self.inputs[cx.v as usize].clone(), from: None, got: 0, done: false, member }
    }

    fn step(&self, cx: &mut Ctx<'_, Up<F::V>>, st: &mut VertexState, l: &mut Self::Local) -> Result<(), Fault> {
        let Some((parent, children)) = self.tree.link(st) else { return Ok(()) };
        for p in cx.fresh().to_vec() {
            if Some(p) == parent {
                continue;
            }
            let Some(Up(v)) = cx.take(p) else { continue };
            l.got += 1;
            if let Some(v) = v {
                let next = fold_opt(self.fold, l.acc.as_ref(), Some(&v));
                if next != l.acc {
                    l.acc = next;
                    l.from = Some(p);
                }
            }
        }
        if l.got > children {
            return Err(Fault::protocol("more upcasts than children"));
        }
        if !l.done && l.got == children {
            self.complete(cx, parent, l);
        }
        Ok(())
    }
}

pub struct ConvergeOut<V> {
    /// At tree roots: the fold over the whole tree (`Some(None)` when no
    /// vertex had an input). `None` at non-roots.
    pub root_values: Vec<Option<Option<V>>>,
    /// Value each vertex forwarded upward (its subtree's fold).
    pub partials: Vec<Option<V>>,
    /// Retrace pointer `e_0` per vertex.
    pub retrace: Vec<Option<Port>>,
    pub stats: RunStats,
}

/// Convergecast over every tree of `tree` simultaneously. A vertex sends
/// upward once, in the round its last child's value is read.
pub fn tree_convergecast<F: TreeFold>(
    net: &mut Network<'_>,
    tree: TreeSel,
    fold: &F,
    inputs: Vec<Option<F::V>>,
) -> Result<ConvergeOut<F::V>, Error> {
    let proto = TreeConverge { tree, fold, inputs };
    let (locals, stats) = net.run(&proto)?;
    let mut root_values = Vec::with_capacity(locals.len());
    let mut retrace = Vec::with_capacity(locals.len());
    let mut partials = Vec::with_capacity(locals.len());
    for (st, l) in net.states.iter().zip(locals) {
        let is_root = matches!(tree.link(st), Some((None, _)));
        retrace.push(l.from);
        root_values.push(is_root.then(|| l.acc.clone()));
        partials.push(l.acc);
    }
    Ok(ConvergeOut { root_values, partials, retrace, stats })
}

/// Tree edges each vertex knows for a broadcast.
pub enum Known {
    /// The parent edge of the selected tree.
    Parent(TreeSel),
    /// Explicit per-vertex port lists.
    Ports(Vec<Vec<Port>>),
}

impl Known {
    fn ports(&self, v: VertexId, st: &VertexState) -> Vec<Port> {
        match self {
            Known::Parent(sel) => sel.link(st).and_then(|(p, _)| p).into_iter().collect(),
            Known::Ports(lists) => lists[v as usize].clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BMsg<V> {
    Req,
    Val(V),
}

impl<V: Payload> Payload for BMsg<V> {
    fn wire_bits(&self, w: &Widths) -> u64 {
        match self {
            BMsg::Req => 1,
            BMsg::Val(v) => 1 + v.wire_bits(w),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Delivery<V> {
    pub value: V,
    /// Arrival port (`None` at the origin).
    pub from: Option<Port>,
    /// Tree edges incident to this vertex, the arrival edge included.
    pub tree_degree: u32,
}

pub struct BroadcastLocal<V> {
    got: Option<Delivery<V>>,
    known: Vec<Port>,
}

impl<V: Footprint> Footprint for BroadcastLocal<V> {
    fn bits(&self, w: &Widths) -> u64 {
        self.got.as_ref().map_or(0, |d| d.value.bits(w) + w.port as u64 + w.count as u64)
            + self.known.len() as u64 * w.port as u64
    }
}

struct TreeBroadcast<V> {
    known: Known,
    content: Vec<Option<V>>,
    max_bits: u64,
}

impl<V: Clone + Payload> TreeBroadcast<V> {
    fn forward(&self, cx: &mut Ctx<'_, BMsg<V>>, l: &mut BroadcastLocal<V>, value: V, from: Option<Port>) {
        let mut targets = l.known.clone();
        for p in 0..cx.degree() as Port {
            if matches!(cx.buffered(p), Some(BMsg::Req)) && !targets.contains(&p) {
                targets.push(p);
            }
        }
        targets.sort_unstable();
        let tree_degree = targets.len() as u32 + from.is_some_and(|f| !targets.contains(&f)) as u32;
        for &p in &targets {
            if Some(p) != from {
                cx.send(p, BMsg::Val(value.clone()));
            }
        }
        l.got = Some(Delivery { value, from, tree_degree });
    }
}

impl<V: Clone + Payload + Footprint> Protocol for TreeBroadcast<V> {
    type Msg = BMsg<V>;
    type Local = BroadcastLocal<V>;

    fn name(&self) -> &'static str {
        "tree-broadcast"
    }

    fn max_message_bits(&self, _: &Widths) -> u64 {
        1 + self.max_bits
    }

    fn init(&self, cx: &mut InitCx<'_>, st: &VertexState) -> Self::Local {
        let known = self.known.ports(cx.v, st);
        if !known.is_empty() || self.content[cx.v as usize].is_some() {
            cx.wake_at(1);
        }
        BroadcastLocal { got: None, known }
    }

    fn step(&self, cx: &mut Ctx<'_, BMsg<V>>, _: &mut VertexState, l: &mut Self::Local) -> Result<(), Fault> {
        if cx.round == 1 {
            for p in l.known.clone() {
                cx.send(p, BMsg::Req);
            }
            if self.content[cx.v as usize].is_some() {
                cx.wake_at(2);
            }
            return Ok(());
        }
        if l.got.is_some() {
            return Ok(());
        }
        if cx.round == 2 {
            if let Some(v) = self.content[cx.v as usize].clone() {
                self.forward(cx, l, v, None);
                return Ok(());
            }
        }
        let arrival = cx.fresh().iter().copied().find(|&p| matches!(cx.buffered(p), Some(BMsg::Val(_))));
        if let Some(p) = arrival {
            let Some(BMsg::Val(v)) = cx.take(p) else { unreachable!() };
            self.forward(cx, l, v, Some(p));
        }
        Ok(())
    }
}

/// Request-pinning broadcast: round 1 is the pre-round in which every vertex
/// sends a request over each tree edge it knows; each origin then floods its
/// value over known edges and pinned requests.
pub fn tree_broadcast<V: Clone + Payload + Footprint>(
    net: &mut Network<'_>,
    known: Known,
    content: Vec<Option<V>>,
) -> Result<Vec<Option<Delivery<V>>>, Error> {
    let w = net.widths;
    let max_bits = content.iter().flatten().map(|v| v.wire_bits(&w)).max().unwrap_or(0);
    let proto = TreeBroadcast { known, content, max_bits };
    let (locals, _) = net.run(&proto)?;
    Ok(locals.into_iter().map(|l| l.got).collect())
}

/// Hook for [`tree_interval_allocation`]. Each vertex takes `own` numbers at
/// the start of its interval, then children follow in ascending port order,
/// each receiving as many numbers as it announced in the pre-round.
pub trait IntervalSplit {
    type Extra: Clone + Payload;

    fn max_extra_bits(&self, w: &Widths) -> u64;
    fn own_demand(&self, v: VertexId, st: &VertexState) -> u32;
    /// Size announced to the parent in the pre-round (0 announces nothing).
    fn subtree_demand(&self, v: VertexId, st: &VertexState) -> u32;
    fn child_extra(&self, st: &VertexState, port: Port, child_size: u32) -> Self::Extra;
    fn on_assign(&self, st: &mut VertexState, lo: u32, extra: Option<Self::Extra>);
    fn on_child(&self, _st: &mut VertexState, _port: Port, _lo: u32, _size: u32) {}
}

#[derive(Clone, Debug, PartialEq)]
pub enum AllocMsg<E> {
    Size(u32),
    Assign(u32, E),
}

impl<E: Payload> Payload for AllocMsg<E> {
    fn wire_bits(&self, w: &Widths) -> u64 {
        match self {
            AllocMsg::Size(_) => 1 + w.count as u64,
            AllocMsg::Assign(_, e) => 1 + w.count as u64 + e.wire_bits(w),
        }
    }
}

struct TreeAlloc<'a, S: IntervalSplit> {
    tree: TreeSel,
    split: &'a S,
    starts: Vec<Option<(u32, Option<S::Extra>)>>,
}

impl<S: IntervalSplit> TreeAlloc<'_, S> {
    fn assign(&self, cx: &mut Ctx<'_, AllocMsg<S::Extra>>, st: &mut VertexState, lo: u32, extra: Option<S::Extra>, parent: Option<Port>) {
        let own = self.split.own_demand(cx.v, st);
        self.split.on_assign(st, lo, extra);
        let mut next = lo + own;
        for p in 0..cx.degree() as Port {
            if Some(p) == parent {
                continue;
            }
            if let Some(&AllocMsg::Size(s)) = cx.buffered(p) {
                let e = self.split.child_extra(st, p, s);
                self.split.on_child(st, p, next, s);
                cx.send(p, AllocMsg::Assign(next, e));
                next += s;
            }
        }
    }
}

impl<S: IntervalSplit> Protocol for TreeAlloc<'_, S> {
    type Msg = AllocMsg<S::Extra>;
    type Local = ();

    fn name(&self) -> &'static str {
        "tree-interval-allocation"
    }

    fn max_message_bits(&self, w: &Widths) -> u64 {
        1 + w.count as u64 + self.split.max_extra_bits(w)
    }

    fn init(&self, cx: &mut InitCx<'_>, st: &VertexState) {
        if self.tree.link(st).is_some() {
            cx.wake_at(1);
        }
    }

    fn step(&self, cx: &mut Ctx<'_, Self::Msg>, st: &mut VertexState, _: &mut ()) -> Result<(), Fault> {
        let Some((parent, _)) = self.tree.link(st) else { return Ok(()) };
        if cx.round == 1 {
            let s = self.split.subtree_demand(cx.v, st);
            if let (Some(p), true) = (parent, s > 0) {
                cx.send(p, AllocMsg::Size(s));
            }
            if self.starts[cx.v as usize].is_some() {
                cx.wake_at(2);
            }
            return Ok(());
        }
        if cx.round == 2 {
            if let Some((lo, extra)) = self.starts[cx.v as usize].clone() {
                self.assign(cx, st, lo, extra, parent);
                return Ok(());
            }
        }
        if let Some(p) = parent {
            if cx.fresh().contains(&p) {
                if let Some(AllocMsg::Assign(lo, e)) = cx.take(p) {
                    self.assign(cx, st, lo, Some(e), parent);
                }
            }
        }
        Ok(())
    }
}

/// Top-down allocation of consecutive integer intervals over `tree`,
/// starting at the given roots.
pub fn tree_interval_allocation<S: IntervalSplit>(
    net: &mut Network<'_>,
    tree: TreeSel,
    split: &S,
    starts: Vec<Option<(u32, Option<S::Extra>)>>,
) -> Result<RunStats, Error> {
    let proto = TreeAlloc { tree, split, starts };
    Ok(net.run(&proto)?.1)
}

/// Unit payload for allocations that carry nothing besides the interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoExtra;

impl Payload for NoExtra {
    fn wire_bits(&self, _: &Widths) -> u64 {
        0
    }
}

/// Sum of counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Count(pub u32);

impl Payload for Count {
    fn wire_bits(&self, w: &Widths) -> u64 {
        w.count as u64
    }
}

impl Footprint for Count {
    fn bits(&self, w: &Widths) -> u64 {
        w.count as u64
    }
}

pub struct SumFold;

impl TreeFold for SumFold {
    type V = Count;
    fn combine(&self, a: &Count, b: &Count) -> Count {
        Count(a.0 + b.0)
    }
    fn max_bits(&self, w: &Widths) -> u64 {
        w.count as u64
    }
}

/// Logical AND over flags.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Flag(pub bool);

impl Payload for Flag {
    fn wire_bits(&self, _: &Widths) -> u64 {
        1
    }
}

impl Footprint for Flag {
    fn bits(&self, _: &Widths) -> u64 {
        1
    }
}

pub struct AndFold;

impl TreeFold for AndFold {
    type V = Flag;
    fn combine(&self, a: &Flag, b: &Flag) -> Flag {
        Flag(a.0 && b.0)
    }
    fn max_bits(&self, _: &Widths) -> u64 {
        1
    }
}

/// Generic minimum over an ordered value with a fixed width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct MinKey(pub u64, pub u32);

impl Payload for MinKey {
    fn wire_bits(&self, _: &Widths) -> u64 {
        self.1 as u64
    }
}

impl Footprint for MinKey {
    fn bits(&self, _: &Widths) -> u64 {
        self.1 as u64
    }
}

/// Minimum over [`MinKey`] values of the given width.
pub struct MinFold(pub u32);

impl TreeFold for MinFold {
    type V = MinKey;
    fn combine(&self, a: &MinKey, b: &MinKey) -> MinKey {
        if b.0 < a.0 {
            *b
        } else {
            *a
        }
    }
    fn max_bits(&self, _: &Widths) -> u64 {
        self.0 as u64
    }
}

/// Fold over the BFS tree rooted at `r_T` and return the result to every
/// vertex (convergecast plus broadcast).
pub fn global_fold<F: TreeFold>(net: &mut Network<'_>, fold: &F, inputs: Vec<Option<F::V>>) -> Result<Option<F::V>, Error> {
    let out = tree_convergecast(net, TreeSel::Bfs, fold, inputs)?;
    let root = net.states.iter().position(|s| matches!(s.bfs, Some(b) if b.parent.is_none())).unwrap();
    let result = out.root_values[root].clone().flatten();
    let mut content: Vec<Option<Up<F::V>>> = vec![None; net.n()];
    content[root] = Some(Up(result.clone()));
    tree_broadcast(net, Known::Parent(TreeSel::Bfs), content)?;
    Ok(result)
}

impl<V: Footprint> Footprint for Up<V> {
    fn bits(&self, w: &Widths) -> u64 {
        1 + self.0.bits(w)
    }
}
