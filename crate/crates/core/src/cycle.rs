//! Communication cycles over the BFS tree `T`.
//!
//! Every base fragment (a subset) owns a slot `i`. In macro-round `t` the
//! messages of slot `i` travel at depth `dT + i - t`, so messages of
//! different slots never meet: a vertex at depth `d` only ever receives
//! slot `t - dT + d` from below in round `t`.
//!
//! * convergecast: subset roots inject their subtree fold together with the
//!   leader label, vertices fold same-round arrivals, `r_T` routes the result
//!   down to the leader;
//! * p-q cycles: a leader's P message and its subsets' Q messages climb in
//!   slot order; `r_T` keeps one stored value and answers each Q with a
//!   routed reply. Broadcast and interval allocation are two root policies.

use crate::engine::{CycleKind, CycleRecord, Ctx, Footprint, InitCx, Network, Payload, Protocol, RunStats, Widths};
use crate::error::{Error, Fault};
use crate::graph::{Port, VertexId};
use crate::routing::{route_next_hop, Hop, RoutingLabel};
use crate::spanning::{fold_opt, tree_broadcast, tree_convergecast, Known, TreeFold, TreeSel};
use crate::state::VertexState;

/// Values every vertex knows and the harness needs for checking bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CycleEnv {
    pub dt: u32,
    /// Largest base-fragment tree depth.
    pub db: u32,
    /// Number of base fragments.
    pub kb: u32,
}

impl CycleEnv {
    pub fn from_network(net: &Network<'_>) -> Self {
        let dt = net.states.first().and_then(|s| s.bfs).and_then(|b| b.tree_depth).unwrap_or(0);
        let mut db = 0;
        let mut kb = 0;
        for (v, st) in net.states.iter().enumerate() {
            if st.cycle.slot.is_some() {
                kb += 1;
            }
            let mut d = 0;
            let mut at = v as VertexId;
            while let Some(p) = net.states[at as usize].frag.parent {
                at = net.graph().port(at, p).nbr;
                d += 1;
            }
            db = db.max(d);
        }
        CycleEnv { dt, db, kb }
    }
}

/// Depth owned by slot `i` in macro-round `t`.
pub fn depth_of_slot(i: u32, t: u64, dt: u32) -> Result<u32, Error> {
    let lo = i as u64;
    let hi = i as u64 + dt as u64;
    if t < lo || t > hi {
        return Err(Error::Invariant(format!("round {t} outside the window [{lo}, {hi}] of slot {i}")));
    }
    Ok((hi - t) as u32)
}

/// Round in which a subset root at `depth` injects for slot `slot`.
fn inject_round(dt: u32, slot: u32, depth: u32) -> u64 {
    (dt + slot - depth) as u64
}

fn depth(st: &VertexState) -> u32 {
    st.bfs.map_or(0, |b| b.depth)
}

fn table(st: &VertexState) -> &crate::routing::RoutingTable {
    &st.routing.as_ref().expect("routing set up before cycles").table
}

fn own_label(st: &VertexState) -> RoutingLabel {
    st.routing.as_ref().expect("routing set up before cycles").label.clone()
}

/// Slot expected from below at `v` in round `t`.
fn expected_slot(t: u64, dt: u32, d: u32) -> i64 {
    t as i64 - dt as i64 + d as i64
}

#[derive(Clone, Debug, PartialEq)]
pub enum CMsg<V> {
    Up { slot: u32, tag: Option<u32>, val: Option<V>, label: RoutingLabel },
    Down { val: Option<V>, label: RoutingLabel },
}

impl<V: Payload> Payload for CMsg<V> {
    fn wire_bits(&self, w: &Widths) -> u64 {
        match self {
            CMsg::Up { val, label, .. } => 2 + w.slot as u64 + val.as_ref().map_or(0, |v| v.wire_bits(w)) + label.width(w),
            CMsg::Down { val, label } => 2 + val.as_ref().map_or(0, |v| v.wire_bits(w)) + label.width(w),
        }
    }
}

pub struct ConvergeCycleLocal<V> {
    inject: Option<(u32, Option<V>)>,
    result: Option<Option<V>>,
}

impl<V: Footprint> Footprint for ConvergeCycleLocal<V> {
    fn bits(&self, w: &Widths) -> u64 {
        self.inject.as_ref().map_or(0, |(_, v)| w.slot as u64 + 1 + v.bits(w)) + self.result.as_ref().map_or(0, |r| 1 + r.bits(w))
    }
}

struct ConvergeCycle<'a, F: TreeFold> {
    fold: &'a F,
    dt: u32,
    label_bits: u64,
    roots: Vec<Option<Option<F::V>>>,
}

impl<F: TreeFold> ConvergeCycle<'_, F> {
    fn route(&self, cx: &mut Ctx<'_, CMsg<F::V>>, st: &VertexState, l: &mut ConvergeCycleLocal<F::V>, val: Option<F::V>, label: RoutingLabel) -> Result<(), Fault> {
        match route_next_hop(table(st), &label).map_err(|e| Fault::protocol(e.to_string()))? {
            Hop::Deliver => {
                if !st.cycle.is_leader {
                    return Err(Fault::protocol("cycle reply delivered to a non-leader"));
                }
                // one reply per subset; the leader folds them
                let acc = l.result.take().flatten();
                l.result = Some(fold_opt(self.fold, acc.as_ref(), val.as_ref()));
            }
            Hop::Forward(p) => {
                let label = label.below(table(st).depth);
                let bits = CMsg::Down { val: val.clone(), label: label.clone() }.wire_bits(cx.w);
                cx.charge("cycle-down", bits)?;
                cx.send(p, CMsg::Down { val, label });
                cx.release("cycle-down")?;
            }
        }
        Ok(())
    }
}

impl<F: TreeFold> Protocol for ConvergeCycle<'_, F> {
    type Msg = CMsg<F::V>;
    type Local = ConvergeCycleLocal<F::V>;

    fn name(&self) -> &'static str {
        "convergecast-cycle"
    }

    fn max_message_bits(&self, w: &Widths) -> u64 {
        2 + w.slot as u64 + self.fold.max_bits(w) + self.label_bits
    }

    fn init(&self, cx: &mut InitCx<'_>, st: &VertexState) -> Self::Local {
        let inject = match (&self.roots[cx.v as usize], st.cycle.slot) {
            (Some(val), Some(slot)) => {
                cx.wake_at(inject_round(self.dt, slot, depth(st)));
                Some((slot, val.clone()))
            }
            _ => None,
        };
        ConvergeCycleLocal { inject, result: None }
    }

    fn step(&self, cx: &mut Ctx<'_, CMsg<F::V>>, st: &mut VertexState, l: &mut Self::Local) -> Result<(), Fault> {
        let d = depth(st);
        let parent = st.bfs.and_then(|b| b.parent);
        let want = expected_slot(cx.round, self.dt, d);
        let mut acc: Option<(Option<F::V>, RoutingLabel, Option<u32>, u32)> = None;
        for p in cx.fresh().to_vec() {
            match cx.take(p) {
                Some(CMsg::Down { val, label }) => {
                    if Some(p) != parent {
                        return Err(Fault::protocol("reply from below"));
                    }
                    self.route(cx, st, l, val, label)?;
                }
                Some(CMsg::Up { slot, tag, val, label }) => {
                    merge_up(self.fold, &mut acc, slot, tag, val, label, want)?;
                }
                None => {}
            }
        }
        if let Some((slot, val)) = l.inject.clone() {
            if cx.round == inject_round(self.dt, slot, d) {
                l.inject = None;
                let label = st.cycle.leader_label.clone().ok_or_else(|| Fault::protocol("subset root without leader label"))?;
                merge_up(self.fold, &mut acc, slot, Some(st.frag.id), val, label, want)?;
            }
        }
        let Some((val, label, tag, slot)) = acc else { return Ok(()) };
        cx.note_slot(slot as u64);
        match parent {
            None => self.route(cx, st, l, val, label),
            Some(p) => {
                let msg = CMsg::Up { slot, tag, val, label };
                cx.charge("cycle-up", msg.wire_bits(cx.w))?;
                cx.send(p, msg);
                cx.release("cycle-up")
            }
        }
    }
}

#[allow(clippy::type_complexity)]
fn merge_up<F: TreeFold>(
    fold: &F,
    acc: &mut Option<(Option<F::V>, RoutingLabel, Option<u32>, u32)>,
    slot: u32,
    tag: Option<u32>,
    val: Option<F::V>,
    label: RoutingLabel,
    want: i64,
) -> Result<(), Fault> {
    if slot as i64 != want {
        return Err(Fault::Congestion(format!("slot {slot} outside its window (expected {want})")));
    }
    match acc {
        None => *acc = Some((val, label, tag, slot)),
        Some((a, _, t, _)) => {
            if tag.is_some() && t.is_some() && tag != *t {
                return Err(Fault::Congestion(format!("fragments {} and {} share slot {slot}", t.unwrap(), tag.unwrap())));
            }
            // the label of the incumbent stays unless the value changes
            let next = fold_opt(fold, a.as_ref(), val.as_ref());
            if next != *a {
                *acc = Some((next, label, tag, slot));
            }
        }
    }
    Ok(())
}

pub struct ConvergeCycleOut<V> {
    /// At every fragment leader: the fold over its fragment.
    pub at_leaders: Vec<Option<Option<V>>>,
    /// Subtree folds of the intrinsic step.
    pub partials: Vec<Option<V>>,
}

/// Convergecast cycle: `inject` selects the subset roots that take part.
pub fn convergecast_cycle<F: TreeFold>(
    net: &mut Network<'_>,
    env: &CycleEnv,
    fold: &F,
    inputs: Vec<Option<F::V>>,
    inject: impl Fn(&VertexState) -> bool,
) -> Result<ConvergeCycleOut<F::V>, Error> {
    let intrinsic = tree_convergecast(net, TreeSel::Fragment, fold, inputs)?;
    let roots: Vec<Option<Option<F::V>>> = intrinsic
        .root_values
        .into_iter()
        .zip(&net.states)
        .map(|(r, st)| r.filter(|_| st.cycle.slot.is_some() && inject(st)))
        .collect();
    let max_slot = roots.iter().zip(&net.states).filter(|(r, _)| r.is_some()).filter_map(|(_, s)| s.cycle.slot).max().unwrap_or(0);
    let label_bits = net.states.first().map_or(0, |s| s.label_bits as u64);
    let proto = ConvergeCycle { fold, dt: env.dt, label_bits, roots };
    let (locals, stats) = net.run(&proto)?;
    record(net, CycleKind::Convergecast, env, &stats, &intrinsic.stats, max_slot as u64, 0);
    if intrinsic.stats.macro_rounds > env.db as u64 {
        net.metrics.bound_violations += 1;
    }
    Ok(ConvergeCycleOut { at_leaders: locals.into_iter().map(|l| l.result).collect(), partials: intrinsic.partials })
}

fn record(net: &mut Network<'_>, kind: CycleKind, env: &CycleEnv, ext: &RunStats, int: &RunStats, max_slot: u64, extra: u64) {
    let w = ext.w.max(1) as u64;
    let bound = match kind {
        CycleKind::Broadcast => (2 * env.dt as u64 + max_slot + env.kb as u64) * w + env.db as u64 + extra,
        _ => (2 * env.dt as u64 + max_slot) * w,
    };
    let rec = CycleRecord {
        kind,
        phase: net.metrics.current_phase().to_string(),
        extrinsic_rounds: ext.frame_rounds(),
        intrinsic_rounds: int.frame_rounds(),
        max_slot,
        w: ext.w,
        bound,
        extrinsic_frames: ext.frames,
        intrinsic_frames: int.frames,
    };
    net.record_cycle(rec);
}

/// Root policy of a p-q cycle. `r_T` holds at most one stored value.
pub trait PqRoot {
    type P: Clone + Payload;
    type Q: Clone + Payload;
    type R: Clone + Payload + Footprint;
    type Store: Clone + Footprint;

    fn name(&self) -> &'static str;
    fn p_bits(&self, w: &Widths) -> u64;
    fn q_bits(&self, w: &Widths) -> u64;
    fn r_bits(&self, w: &Widths) -> u64;
    /// Store before any P arrives (`None`: a Q before the first P is an error).
    fn initial(&self) -> Option<Self::Store>;
    fn on_p(&self, p: Self::P) -> Self::Store;
    fn on_q(&self, store: &mut Self::Store, q: &Self::Q) -> Self::R;
}

#[derive(Clone, Debug, PartialEq)]
pub enum PqUp<P, Q> {
    P(P),
    Q(Q),
}

#[derive(Clone, Debug, PartialEq)]
pub enum PqMsg<P, Q, R> {
    Up { slot: u32, tag: Option<u32>, body: PqUp<P, Q>, label: Option<RoutingLabel> },
    Down { reply: R, label: RoutingLabel },
}

impl<P: Payload, Q: Payload, R: Payload> Payload for PqMsg<P, Q, R> {
    fn wire_bits(&self, w: &Widths) -> u64 {
        match self {
            PqMsg::Up { body, label, .. } => {
                2 + w.slot as u64
                    + match body {
                        PqUp::P(p) => p.wire_bits(w),
                        PqUp::Q(q) => q.wire_bits(w),
                    }
                    + label.as_ref().map_or(0, |l| l.width(w))
            }
            PqMsg::Down { reply, label } => 1 + reply.wire_bits(w) + label.width(w),
        }
    }
}

/// A subset root's contribution to a p-q cycle.
pub struct PqSend<P, Q> {
    pub slot: u32,
    /// Test-only provenance (the sender's range); never charged.
    pub tag: Option<u32>,
    pub body: PqUp<P, Q>,
}

pub struct PqLocal<P, Q, R, S> {
    inject: Option<PqSend<P, Q>>,
    store: Option<S>,
    store_tag: Option<u32>,
    /// The store came from a P and is charged as `msg_T`.
    charged: bool,
    reply: Option<R>,
}

impl<P, Q, R: Footprint, S: Footprint> Footprint for PqLocal<P, Q, R, S> {
    fn bits(&self, w: &Widths) -> u64 {
        // the store is charged as `msg_T` while it is live
        self.inject.as_ref().map_or(0, |_| w.slot as u64) + self.reply.bits(w)
    }
}

struct PqCycle<'a, T: PqRoot> {
    root: &'a T,
    dt: u32,
    label_bits: u64,
    /// Last slot of the cycle; the root drops its store once it has passed.
    last: u32,
    sends: Vec<Option<PqSend<T::P, T::Q>>>,
    violations: std::cell::Cell<u64>,
}

impl<T: PqRoot> PqCycle<'_, T> {
    fn down(&self, cx: &mut Ctx<'_, PqMsg<T::P, T::Q, T::R>>, st: &VertexState, l: &mut PqLocal<T::P, T::Q, T::R, T::Store>, reply: T::R, label: RoutingLabel) -> Result<(), Fault> {
        match route_next_hop(table(st), &label).map_err(|e| Fault::protocol(e.to_string()))? {
            Hop::Deliver => l.reply = Some(reply),
            Hop::Forward(p) => {
                let msg = PqMsg::Down { reply, label: label.below(table(st).depth) };
                cx.charge("cycle-down", msg.wire_bits(cx.w))?;
                cx.send(p, msg);
                cx.release("cycle-down")?;
            }
        }
        Ok(())
    }

    fn close(&self, cx: &mut Ctx<'_, PqMsg<T::P, T::Q, T::R>>, l: &mut PqLocal<T::P, T::Q, T::R, T::Store>, parent: Option<Port>) -> Result<(), Fault> {
        if parent.is_none() && cx.round >= inject_round(self.dt, self.last, 0) && l.charged {
            l.store = None;
            l.charged = false;
            cx.release("msg_T")?;
        }
        Ok(())
    }

    fn at_root(&self, cx: &mut Ctx<'_, PqMsg<T::P, T::Q, T::R>>, st: &VertexState, l: &mut PqLocal<T::P, T::Q, T::R, T::Store>, tag: Option<u32>, body: PqUp<T::P, T::Q>, label: Option<RoutingLabel>) -> Result<(), Fault> {
        match body {
            PqUp::P(p) => {
                if l.charged {
                    cx.release("msg_T")?;
                }
                let s = self.root.on_p(p);
                if cx.charge("msg_T", s.bits(cx.w)).is_err() {
                    self.violations.set(self.violations.get() + 1);
                }
                l.store = Some(s);
                l.store_tag = tag;
                l.charged = true;
            }
            PqUp::Q(q) => {
                let Some(store) = l.store.as_mut() else {
                    return Err(Fault::protocol("Q arrived before any P in its range"));
                };
                if let (Some(a), Some(b)) = (tag, l.store_tag) {
                    if a != b {
                        return Err(Fault::protocol(format!("Q of range {a} answered from range {b}")));
                    }
                }
                let reply = self.root.on_q(store, &q);
                let label = label.ok_or_else(|| Fault::protocol("Q without label"))?;
                self.down(cx, st, l, reply, label)?;
            }
        }
        Ok(())
    }
}

impl<T: PqRoot> Protocol for PqCycle<'_, T> {
    type Msg = PqMsg<T::P, T::Q, T::R>;
    type Local = PqLocal<T::P, T::Q, T::R, T::Store>;

    fn name(&self) -> &'static str {
        self.root.name()
    }

    fn max_message_bits(&self, w: &Widths) -> u64 {
        let up = 2 + w.slot as u64 + self.root.p_bits(w).max(self.root.q_bits(w) + self.label_bits);
        let down = 1 + self.root.r_bits(w) + self.label_bits;
        up.max(down)
    }

    fn init(&self, cx: &mut InitCx<'_>, st: &VertexState) -> Self::Local {
        let inject = self.sends[cx.v as usize].as_ref().map(|s| {
            cx.wake_at(inject_round(self.dt, s.slot, depth(st)));
            PqSend { slot: s.slot, tag: s.tag, body: s.body.clone() }
        });
        let is_root = st.bfs.is_some_and(|b| b.parent.is_none());
        let store = if is_root { self.root.initial() } else { None };
        if is_root && self.last > 0 {
            cx.wake_at(inject_round(self.dt, self.last, 0));
        }
        PqLocal { inject, store, store_tag: None, charged: false, reply: None }
    }

    fn step(&self, cx: &mut Ctx<'_, Self::Msg>, st: &mut VertexState, l: &mut Self::Local) -> Result<(), Fault> {
        let d = depth(st);
        let parent = st.bfs.and_then(|b| b.parent);
        let want = expected_slot(cx.round, self.dt, d);
        let mut up: Option<(u32, Option<u32>, PqUp<T::P, T::Q>, Option<RoutingLabel>)> = None;
        for p in cx.fresh().to_vec() {
            match cx.take(p) {
                Some(PqMsg::Down { reply, label }) => {
                    if Some(p) != parent {
                        return Err(Fault::protocol("reply from below"));
                    }
                    self.down(cx, st, l, reply, label)?;
                }
                Some(PqMsg::Up { slot, tag, body, label }) => {
                    if slot as i64 != want {
                        return Err(Fault::Congestion(format!("slot {slot} outside its window (expected {want})")));
                    }
                    if up.is_some() {
                        return Err(Fault::Congestion(format!("two messages of slot {slot}")));
                    }
                    up = Some((slot, tag, body, label));
                }
                None => {}
            }
        }
        if let Some(s) = &l.inject {
            if cx.round == inject_round(self.dt, s.slot, d) {
                let s = l.inject.take().unwrap();
                if up.is_some() {
                    return Err(Fault::Congestion(format!("two messages of slot {}", s.slot)));
                }
                let label = matches!(s.body, PqUp::Q(_)).then(|| own_label(st));
                up = Some((s.slot, s.tag, s.body, label));
            }
        }
        let Some((slot, tag, body, label)) = up else { return self.close(cx, l, parent) };
        cx.note_slot(slot as u64);
        match parent {
            None => {
                self.at_root(cx, st, l, tag, body, label)?;
                self.close(cx, l, parent)
            }
            Some(p) => {
                let msg = PqMsg::Up { slot, tag, body, label };
                cx.charge("cycle-up", msg.wire_bits(cx.w))?;
                cx.send(p, msg);
                cx.release("cycle-up")
            }
        }
    }
}

/// Run the extrinsic part of a p-q cycle; returns replies at Q senders.
pub fn run_pq<T: PqRoot>(
    net: &mut Network<'_>,
    env: &CycleEnv,
    root: &T,
    sends: Vec<Option<PqSend<T::P, T::Q>>>,
) -> Result<(Vec<Option<T::R>>, RunStats, u64), Error> {
    let max_slot = sends.iter().flatten().map(|s| s.slot as u64).max().unwrap_or(0);
    let label_bits = net.states.first().map_or(0, |s| s.label_bits as u64);
    let proto = PqCycle { root, dt: env.dt, label_bits, last: max_slot as u32, sends, violations: std::cell::Cell::new(0) };
    let (locals, stats) = net.run(&proto)?;
    net.metrics.root_store_violations += proto.violations.get();
    Ok((locals.into_iter().map(|l| l.reply).collect(), stats, max_slot))
}

/// `r_T` keeps the latest P and answers every Q with it.
pub struct BroadcastRoot<V> {
    bits: u64,
    _v: std::marker::PhantomData<V>,
}

/// Unit Q payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoBody;

impl Payload for NoBody {
    fn wire_bits(&self, _: &Widths) -> u64 {
        0
    }
}

impl<V: Clone + Payload + Footprint> PqRoot for BroadcastRoot<V> {
    type P = V;
    type Q = NoBody;
    type R = V;
    type Store = V;

    fn name(&self) -> &'static str {
        "broadcast-cycle"
    }
    fn p_bits(&self, _: &Widths) -> u64 {
        self.bits
    }
    fn q_bits(&self, _: &Widths) -> u64 {
        0
    }
    fn r_bits(&self, _: &Widths) -> u64 {
        self.bits
    }
    fn initial(&self) -> Option<V> {
        None
    }
    fn on_p(&self, p: V) -> V {
        p
    }
    fn on_q(&self, store: &mut V, _: &NoBody) -> V {
        store.clone()
    }
}

/// Slot a vertex uses in a cycle, with an optional provenance tag.
pub type SlotOf<'a> = &'a dyn Fn(VertexId, &VertexState) -> Option<(u32, Option<u32>)>;

/// p-q broadcast cycle: `content` gives each publishing leader its p-slot and
/// message; `queries` gives every other subset root its q-slot. Every vertex
/// of a base fragment whose root got the message (or is the publishing
/// leader) receives it.
pub fn broadcast_cycle<V: Clone + Payload + Footprint>(
    net: &mut Network<'_>,
    env: &CycleEnv,
    content: impl Fn(VertexId, &VertexState) -> Option<(u32, Option<u32>, V)>,
    queries: SlotOf<'_>,
) -> Result<Vec<Option<V>>, Error> {
    Ok(broadcast_cycle_split(net, env, content, queries, V::clone)?.1)
}

/// Like [`broadcast_cycle`], but only `inner(msg)` travels down the base
/// fragment trees. Returns the full message at the subset roots (and the
/// publishing leaders) and the inner part everywhere.
pub fn broadcast_cycle_split<V: Clone + Payload + Footprint, U: Clone + Payload + Footprint>(
    net: &mut Network<'_>,
    env: &CycleEnv,
    content: impl Fn(VertexId, &VertexState) -> Option<(u32, Option<u32>, V)>,
    queries: SlotOf<'_>,
    inner: impl Fn(&V) -> U,
) -> Result<(Vec<Option<V>>, Vec<Option<U>>), Error> {
    let w = net.widths;
    let mut own: Vec<Option<V>> = vec![None; net.n()];
    let mut sends = Vec::with_capacity(net.n());
    let mut bits = 0;
    for (v, st) in net.states.iter().enumerate() {
        let v = v as VertexId;
        if let Some((slot, tag, msg)) = content(v, st) {
            bits = bits.max(msg.wire_bits(&w));
            own[v as usize] = Some(msg.clone());
            sends.push(Some(PqSend { slot, tag, body: PqUp::P(msg) }));
        } else if let Some((slot, tag)) = queries(v, st) {
            sends.push(Some(PqSend { slot, tag, body: PqUp::Q(NoBody) }));
        } else {
            sends.push(None);
        }
    }
    let root = BroadcastRoot { bits, _v: std::marker::PhantomData };
    let (replies, ext, max_slot) = run_pq(net, env, &root, sends)?;
    let at_roots: Vec<Option<V>> = own.into_iter().zip(replies).map(|(o, r)| o.or(r)).collect();
    let origins = at_roots.iter().map(|m| m.as_ref().map(&inner)).collect();
    let got = tree_broadcast(net, Known::Parent(TreeSel::Fragment), origins)?;
    let int = net.last_run.unwrap_or_default();
    record(net, CycleKind::Broadcast, env, &ext, &int, max_slot, 1);
    Ok((at_roots, got.into_iter().map(|d| d.map(|d| d.value)).collect()))
}

/// Interval allocation at `r_T`: a P sets the range bottom, each Q of size `S` receives
/// `[bottom, bottom + S)`. A P without a bottom makes the range unavailable
/// and its Qs are answered with nothing.
pub struct IntervalRoot {
    pub rootless: bool,
}

/// Interval allocation value; `None` means not available.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bottom(pub Option<u32>);

impl Payload for Bottom {
    fn wire_bits(&self, w: &Widths) -> u64 {
        1 + self.0.map_or(0, |_| w.slot as u64)
    }
}

impl Footprint for Bottom {
    fn bits(&self, w: &Widths) -> u64 {
        1 + w.slot as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Size(pub u32);

impl Payload for Size {
    fn wire_bits(&self, w: &Widths) -> u64 {
        w.slot as u64
    }
}

impl PqRoot for IntervalRoot {
    type P = Bottom;
    type Q = Size;
    type R = Bottom;
    type Store = Bottom;

    fn name(&self) -> &'static str {
        "interval-allocation-cycle"
    }
    fn p_bits(&self, w: &Widths) -> u64 {
        1 + w.slot as u64
    }
    fn q_bits(&self, w: &Widths) -> u64 {
        w.slot as u64
    }
    fn r_bits(&self, w: &Widths) -> u64 {
        1 + w.slot as u64
    }
    fn initial(&self) -> Option<Bottom> {
        self.rootless.then_some(Bottom(Some(1)))
    }
    fn on_p(&self, p: Bottom) -> Bottom {
        p
    }
    fn on_q(&self, store: &mut Bottom, q: &Size) -> Bottom {
        match store.0 {
            Some(b) => {
                store.0 = Some(b + q.0);
                Bottom(Some(b))
            }
            None => Bottom(None),
        }
    }
}

/// What a subset root contributes to an interval allocation cycle.
pub enum AllocSend {
    /// Leader publishing its range bottom (`None`: not yet known).
    Bottom(Option<u32>),
    Request(u32),
}

/// Interval allocation cycle. Returns, at every requester, the start of its
/// interval (`Some(None)` if its range had no bottom yet).
pub fn interval_allocation_cycle(
    net: &mut Network<'_>,
    env: &CycleEnv,
    rootless: bool,
    sends: impl Fn(VertexId, &VertexState) -> Option<(u32, Option<u32>, AllocSend)>,
) -> Result<Vec<Option<Option<u32>>>, Error> {
    let list = net
        .states
        .iter()
        .enumerate()
        .map(|(v, st)| {
            sends(v as VertexId, st).map(|(slot, tag, s)| PqSend {
                slot,
                tag,
                body: match s {
                    AllocSend::Bottom(b) => PqUp::P(Bottom(b)),
                    AllocSend::Request(r) => PqUp::Q(Size(r)),
                },
            })
        })
        .collect();
    let (replies, ext, max_slot) = run_pq(net, env, &IntervalRoot { rootless }, list)?;
    record(net, CycleKind::IntervalAllocation, env, &ext, &RunStats::default(), max_slot, 0);
    Ok(replies.into_iter().map(|r| r.map(|b| b.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EngineConfig;
    use crate::graph::{generate_graph, Family, WeightedGraph};
    use crate::routing::setup_routing;
    use crate::spanning::{build_bfs_tree, MinFold, MinKey};

    #[test]
    fn slot_windows() {
        assert_eq!(depth_of_slot(1, 1, 3).unwrap(), 3);
        assert_eq!(depth_of_slot(5, 9, 4).unwrap(), 0);
        assert_eq!(depth_of_slot(2, 4, 3).unwrap(), 1);
        assert!(depth_of_slot(2, 1, 3).is_err());
        assert!(depth_of_slot(2, 6, 3).is_err());
    }

    /// Routed network where each listed set of vertices forms one fragment,
    /// rooted at its first vertex along a path order, one base fragment per
    /// fragment.
    fn setup(g: &WeightedGraph) -> Network<'_> {
        let mut net = Network::new(g, None, EngineConfig::default());
        build_bfs_tree(&mut net, 0).unwrap();
        setup_routing(&mut net).unwrap();
        net
    }

    /// On a path, make `[a, b)` ranges fragments rooted at `a` with the given
    /// slots.
    fn path_fragments(net: &mut Network<'_>, ranges: &[(u32, u32, u32)]) {
        for &(a, b, slot) in ranges {
            let label = net.states[a as usize].routing.as_ref().unwrap().label.clone();
            for v in a..b {
                let st = &mut net.states[v as usize];
                st.frag.id = a;
                // port 0 points to v-1 on generated paths (except at vertex 0)
                st.frag.parent = if v == a { None } else { Some(0) };
                st.frag.children = if v + 1 < b { 1 } else { 0 };
            }
            let st = &mut net.states[a as usize];
            st.cycle.slot = Some(slot);
            st.cycle.is_leader = true;
            st.cycle.leader_label = Some(label);
            st.cycle.k = 1;
        }
    }

    #[test]
    fn single_fragment_path_minimum() {
        let g = generate_graph(Family::Path, 5, 0).unwrap();
        let mut net = setup(&g);
        path_fragments(&mut net, &[(0, 5, 1)]);
        let env = CycleEnv::from_network(&net);
        let inputs = [5u64, 4, 3, 2, 1].iter().map(|&x| Some(MinKey(x, 3))).collect();
        let out = convergecast_cycle(&mut net, &env, &MinFold(3), inputs, |_| true).unwrap();
        assert_eq!(out.at_leaders[0], Some(Some(MinKey(1, 3))));
        assert_eq!(net.metrics.bound_violations, 0);
    }

    #[test]
    fn two_slots_reach_the_root_one_round_apart() {
        // P4 rooted at 0 has d(T) = 3; fragments {0,1} and {2,3}
        let g = generate_graph(Family::Path, 4, 0).unwrap();
        let mut net = setup(&g);
        net.config.trace = true;
        path_fragments(&mut net, &[(0, 2, 1), (2, 4, 2)]);
        let env = CycleEnv::from_network(&net);
        assert_eq!(env.dt, 3);
        let inputs = vec![Some(MinKey(9, 4)), Some(MinKey(8, 4)), Some(MinKey(7, 4)), Some(MinKey(6, 4))];
        let out = convergecast_cycle(&mut net, &env, &MinFold(4), inputs, |_| true).unwrap();
        assert_eq!(out.at_leaders[0], Some(Some(MinKey(8, 4))));
        assert_eq!(out.at_leaders[2], Some(Some(MinKey(6, 4))));
        let run = net.trace.iter().map(|e| e.run).max().unwrap();
        let at_root: Vec<(u64, u64)> = net.trace.iter().filter(|e| e.run == run && e.vertex == 0).map(|e| (e.slot, e.round)).collect();
        assert_eq!(at_root, vec![(1, 4), (2, 5)]);
    }

    #[test]
    fn rootless_allocation_is_a_prefix_sum() {
        let g = generate_graph(Family::Path, 6, 0).unwrap();
        let mut net = setup(&g);
        path_fragments(&mut net, &[(0, 2, 1), (2, 4, 2), (4, 6, 3)]);
        let env = CycleEnv::from_network(&net);
        let sizes = [2u32, 0, 3, 0, 1, 0];
        let out = interval_allocation_cycle(&mut net, &env, true, |v, st| st.cycle.slot.map(|s| (s, None, AllocSend::Request(sizes[v as usize])))).unwrap();
        assert_eq!(out[0], Some(Some(1)));
        assert_eq!(out[2], Some(Some(3)));
        assert_eq!(out[4], Some(Some(6)));
    }

    #[test]
    fn rooted_allocation_starts_at_the_bottom() {
        // one fragment with two base fragments: leader at 0 (slot 1), subset at 3 (slot 2)
        let g = generate_graph(Family::Path, 6, 0).unwrap();
        let mut net = setup(&g);
        path_fragments(&mut net, &[(0, 3, 1), (3, 6, 2)]);
        net.states[3].cycle.is_leader = false;
        let env = CycleEnv::from_network(&net);
        let out = interval_allocation_cycle(&mut net, &env, false, |v, st| match (v, st.cycle.slot) {
            (0, Some(s)) => Some((s, Some(0), AllocSend::Bottom(Some(10)))),
            (_, Some(s)) => Some((s, Some(0), AllocSend::Request(4))),
            _ => None,
        })
        .unwrap();
        assert_eq!(out[3], Some(Some(10)));
        assert_eq!(out[0], None);
    }

    #[test]
    fn broadcast_answers_each_query_from_its_own_range() {
        // fragments A = {0..4} with subsets at 0 (p) and 2 (q), slots 1, 2;
        // B = {4..10} with subsets at 4 (p), 6, 8 (q), slots 3, 4, 5
        let g = generate_graph(Family::Path, 10, 0).unwrap();
        let mut net = setup(&g);
        path_fragments(&mut net, &[(0, 2, 1), (2, 4, 2), (4, 6, 3), (6, 8, 4), (8, 10, 5)]);
        for v in [2usize, 6, 8] {
            net.states[v].cycle.is_leader = false;
        }
        let tag = |v: VertexId| if v < 4 { 0 } else { 4 };
        let env = CycleEnv::from_network(&net);
        let got = broadcast_cycle(
            &mut net,
            &env,
            |v, st| st.cycle.is_leader.then(|| (st.cycle.slot.unwrap(), Some(tag(v)), MinKey(100 + v as u64, 8))),
            &|v, st| st.cycle.slot.filter(|_| !st.cycle.is_leader).map(|s| (s, Some(tag(v)))),
        )
        .unwrap();
        for v in 0..10u32 {
            let want = if v < 4 { 100 } else { 104 };
            assert_eq!(got[v as usize], Some(MinKey(want, 8)), "vertex {v}");
        }
        assert_eq!(net.metrics.bound_violations, 0);
        assert_eq!(net.metrics.root_store_violations, 0);
    }

    #[test]
    fn absent_publisher_leaves_others_untouched() {
        let g = generate_graph(Family::Path, 6, 0).unwrap();
        let mut net = setup(&g);
        path_fragments(&mut net, &[(0, 2, 1), (2, 4, 2), (4, 6, 3)]);
        let env = CycleEnv::from_network(&net);
        let got = broadcast_cycle(&mut net, &env, |v, st| st.cycle.slot.filter(|_| v != 2).map(|s| (s, Some(v), MinKey(v as u64, 4))), &|_, _| None).unwrap();
        assert_eq!(got[1], Some(MinKey(0, 4)));
        assert_eq!(got[2], None);
        assert_eq!(got[3], None);
        assert_eq!(got[5], Some(MinKey(4, 4)));
    }

    #[test]
    fn shared_slot_is_a_congestion_fault() {
        let g = generate_graph(Family::Star, 5, 0).unwrap();
        let mut net = setup(&g);
        for v in 1..5u32 {
            let label = net.states[v as usize].routing.as_ref().unwrap().label.clone();
            let st = &mut net.states[v as usize];
            st.frag.id = v;
            st.cycle.slot = Some(1);
            st.cycle.is_leader = true;
            st.cycle.leader_label = Some(label);
        }
        let root_label = net.states[0].routing.as_ref().unwrap().label.clone();
        net.states[0].cycle = crate::state::CycleRegs { slot: Some(2), is_leader: true, leader_label: Some(root_label), k: 1 };
        let env = CycleEnv::from_network(&net);
        let inputs = (0..5).map(|v| Some(MinKey(v, 4))).collect();
        let err = convergecast_cycle(&mut net, &env, &MinFold(4), inputs, |_| true).err().unwrap();
        assert!(matches!(err, Error::Congestion { .. }), "{err}");
        assert_eq!(net.metrics.congestion_violations, 1);
    }
}
