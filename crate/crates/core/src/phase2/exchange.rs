//! Virtual-tree messaging between fragments and the GKP decomposition
//! (3-coloring, maximal matching, attachment) built on it.
//!
//! A fragment is a virtual node. Its state is replicated at every vertex;
//! it talks to neighbouring fragments only over MWOE edges (single rounds)
//! and inside itself through a [`FragmentChannel`]: a converge to the
//! leader and a publish from the leader. Phase one implements the channel
//! with direct tree operations, phase two with communication cycles.

use crate::engine::{Ctx, Footprint, InitCx, Network, Payload, Protocol, Widths};
use crate::error::{Error, Fault};
use crate::graph::{Port, VertexId};
use crate::spanning::TreeFold;
use crate::state::VertexState;

/// An exchange value of a declared width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct XVal {
    pub value: u64,
    pub bits: u32,
}

impl XVal {
    pub fn new(value: u64, bits: u32) -> Self {
        debug_assert!(bits >= 64 || value < 1u64 << bits, "{value} does not fit {bits} bits");
        XVal { value, bits }
    }
}

impl Payload for XVal {
    fn wire_bits(&self, _: &Widths) -> u64 {
        self.bits as u64
    }
}

impl Footprint for XVal {
    fn bits(&self, _: &Widths) -> u64 {
        self.bits as u64
    }
}

/// Semigroup over [`XVal`]s.
#[derive(Clone, Copy)]
pub struct XFold {
    pub op: fn(u64, u64) -> u64,
    pub bits: u32,
}

impl XFold {
    pub fn pick(bits: u32) -> Self {
        XFold { op: |a, _| a, bits }
    }
    pub fn min(bits: u32) -> Self {
        XFold { op: |a, b| a.min(b), bits }
    }
    pub fn sum(bits: u32) -> Self {
        XFold { op: |a, b| a + b, bits }
    }
}

impl TreeFold for XFold {
    type V = XVal;
    fn combine(&self, a: &XVal, b: &XVal) -> XVal {
        XVal::new((self.op)(a.value, b.value), self.bits)
    }
    fn max_bits(&self, _: &Widths) -> u64 {
        self.bits as u64
    }
}

/// Converge to fragment leaders and publish from them.
pub trait FragmentChannel {
    /// Fold the inputs of each fragment; the result appears at its leader
    /// (`Some(None)` when the fragment had no input).
    fn converge(&mut self, net: &mut Network<'_>, fold: &XFold, inputs: Vec<Option<XVal>>) -> Result<Vec<Option<Option<XVal>>>, Error>;

    /// Deliver each leader's value to every vertex of its fragment.
    fn publish(&mut self, net: &mut Network<'_>, content: Vec<Option<XVal>>) -> Result<Vec<Option<XVal>>, Error>;

    fn is_leader(&self, st: &VertexState) -> bool;

    /// Converge then publish: every vertex of a fragment learns the fold.
    fn share(&mut self, net: &mut Network<'_>, fold: &XFold, inputs: Vec<Option<XVal>>) -> Result<Vec<Option<XVal>>, Error> {
        let at = self.converge(net, fold, inputs)?;
        let content = at.into_iter().map(|r| r.flatten()).collect();
        self.publish(net, content)
    }
}

/// Replicated virtual-node state of the fragment a vertex belongs to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VirtualNodeState {
    /// The fragment points at a virtual parent through its MWOE.
    pub has_parent: bool,
    pub color: u32,
    /// Color before the latest shift-down (the children's color).
    pub prev_color: u32,
    pub parent_color: Option<u32>,
    pub matched: Matched,
    /// Own MWOE leads to the subtree parent.
    pub up_via_mwoe: bool,
    /// Own MWOE leads to a subtree child (a flipped attachment).
    pub down_via_mwoe: bool,
    /// The subtree parent is reached through a flipped edge.
    pub flipped_up: bool,
    pub subtree_root: bool,
}

impl VirtualNodeState {
    pub fn mwoe_used(&self) -> bool {
        self.up_via_mwoe || self.down_via_mwoe
    }
}

impl Footprint for VirtualNodeState {
    fn bits(&self, w: &Widths) -> u64 {
        // colors start as fragment ids and shrink after the first reduction
        8 + 3 * w.id as u64 + 2
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Matched {
    #[default]
    No,
    AsParent,
    AsChild,
}

/// Short-lived exchange registers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct XRegs {
    pub val: Option<XVal>,
    /// Best query seen so far: `(querying vertex id, arrival port)`.
    pub query: Option<(VertexId, Port)>,
}

impl Footprint for XRegs {
    fn bits(&self, w: &Widths) -> u64 {
        self.val.bits(w) + self.query.map_or(0, |_| (w.id + w.port) as u64)
    }
}

/// Which edge a fragment uses toward its (virtual or subtree) parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    /// The MWOE, for fragments that have a virtual parent.
    Virtual,
    /// The edge toward the parent in the merge subtree.
    Subtree,
}

impl Link {
    pub fn port(self, st: &VertexState) -> Option<Port> {
        match self {
            Link::Virtual => st.frag.mwoe.filter(|_| st.virt.has_parent),
            Link::Subtree => st.uplink,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EMsg {
    Ping,
    Val(XVal),
}

impl Payload for EMsg {
    fn wire_bits(&self, w: &Widths) -> u64 {
        match self {
            EMsg::Ping => 1,
            EMsg::Val(v) => 1 + v.wire_bits(w),
        }
    }
}

/// One round over fragment-to-fragment edges: senders send, receivers fold
/// what they read into their exchange register. With `reply`, receivers
/// answer every ping in the second round and pingers store the answer.
struct EdgeRound<S, R> {
    send: S,
    reply: Option<R>,
    recv_fold: Option<XFold>,
    bits: u32,
}

impl<S, R> Protocol for EdgeRound<S, R>
where
    S: Fn(&VertexState) -> Option<(Port, EMsg)>,
    R: Fn(&VertexState, Port) -> XVal,
{
    type Msg = EMsg;
    type Local = ();

    fn name(&self) -> &'static str {
        "edge-round"
    }

    fn max_message_bits(&self, _: &Widths) -> u64 {
        1 + self.bits as u64
    }

    fn init(&self, cx: &mut InitCx<'_>, st: &VertexState) {
        if (self.send)(st).is_some() {
            cx.wake_at(1);
        }
    }

    fn step(&self, cx: &mut Ctx<'_, EMsg>, st: &mut VertexState, _: &mut ()) -> Result<(), Fault> {
        if cx.round == 1 {
            if let Some((p, m)) = (self.send)(st) {
                cx.send(p, m);
            }
            return Ok(());
        }
        for p in cx.fresh().to_vec() {
            match cx.take(p) {
                Some(EMsg::Ping) => {
                    let reply = self.reply.as_ref().ok_or_else(|| Fault::protocol("unexpected ping"))?;
                    let v = reply(st, p);
                    cx.send(p, EMsg::Val(v));
                }
                Some(EMsg::Val(v)) => {
                    let fold = self.recv_fold.unwrap_or(XFold::pick(self.bits));
                    st.x.val = Some(match st.x.val {
                        Some(old) => fold.combine(&old, &v),
                        None => v,
                    });
                }
                None => {}
            }
        }
        Ok(())
    }
}

/// Parents' payload travels to every child fragment: children's MWOE
/// endpoints ping, parent endpoints answer with `payload`, then each child
/// converges and publishes the answer. `apply` sees every vertex together
/// with what its fragment received.
pub fn to_all_children<C: FragmentChannel>(
    net: &mut Network<'_>,
    ch: &mut C,
    bits: u32,
    payload: impl Fn(&VertexState, Port) -> XVal,
    mut apply: impl FnMut(&mut VertexState, Option<XVal>),
) -> Result<(), Error> {
    let proto = EdgeRound {
        send: |st: &VertexState| Link::Virtual.port(st).map(|p| (p, EMsg::Ping)),
        reply: Some(payload),
        recv_fold: None,
        bits,
    };
    net.run(&proto)?;
    let inputs = net.states.iter_mut().map(|s| s.x.val.take()).collect();
    let got = ch.share(net, &XFold::pick(bits), inputs)?;
    for (st, g) in net.states.iter_mut().zip(got) {
        apply(st, g);
    }
    Ok(())
}

/// Children's payload travels to the parent: the `link` endpoints send, the
/// parent's receiving endpoints fold with `fold`, then the parent converges
/// and publishes the fold.
pub fn to_parent<C: FragmentChannel>(
    net: &mut Network<'_>,
    ch: &mut C,
    link: Link,
    fold: XFold,
    payload: impl Fn(&VertexState) -> Option<XVal>,
    mut apply: impl FnMut(&mut VertexState, Option<XVal>),
) -> Result<(), Error> {
    let proto = EdgeRound {
        send: |st: &VertexState| link.port(st).and_then(|p| payload(st).map(|v| (p, EMsg::Val(v)))),
        reply: None::<fn(&VertexState, Port) -> XVal>,
        recv_fold: Some(fold),
        bits: fold.bits,
    };
    net.run(&proto)?;
    let inputs = net.states.iter_mut().map(|s| s.x.val.take()).collect();
    let got = ch.share(net, &fold, inputs)?;
    for (st, g) in net.states.iter_mut().zip(got) {
        apply(st, g);
    }
    Ok(())
}

struct QueryRound<Q, A> {
    query: Q,
    accepts: A,
    id_bits: u32,
}

impl<Q, A> Protocol for QueryRound<Q, A>
where
    Q: Fn(&VertexState) -> Option<Port>,
    A: Fn(&VertexState) -> bool,
{
    type Msg = EMsg;
    type Local = ();

    fn name(&self) -> &'static str {
        "child-query"
    }

    fn max_message_bits(&self, _: &Widths) -> u64 {
        1 + self.id_bits as u64
    }

    fn init(&self, cx: &mut InitCx<'_>, st: &VertexState) {
        if (self.query)(st).is_some() {
            cx.wake_at(1);
        }
    }

    fn step(&self, cx: &mut Ctx<'_, EMsg>, st: &mut VertexState, _: &mut ()) -> Result<(), Fault> {
        if cx.round == 1 {
            if let Some(p) = (self.query)(st) {
                cx.send(p, EMsg::Val(XVal::new(cx.v as u64, self.id_bits)));
            }
            return Ok(());
        }
        let accepting = (self.accepts)(st);
        for p in cx.fresh().to_vec() {
            if let Some(EMsg::Val(v)) = cx.take(p) {
                if accepting && st.x.query.is_none_or(|(best, _)| (v.value as VertexId) < best) {
                    st.x.query = Some((v.value as VertexId, p));
                }
            }
        }
        Ok(())
    }
}

/// Each electing parent picks one querying child: the one whose querying
/// endpoint has the smallest vertex id. `on_parent` sees every vertex of
/// every fragment with the elected id (if any); `on_elected_port` runs at
/// the parent endpoint that answers; `on_child` sees every vertex with the
/// answer its fragment received.
#[allow(clippy::too_many_arguments)]
pub fn to_one_child<C: FragmentChannel>(
    net: &mut Network<'_>,
    ch: &mut C,
    link: Link,
    queries: impl Fn(&VertexState) -> bool,
    electing: impl Fn(&VertexState) -> bool,
    answer: impl Fn(&VertexState) -> XVal,
    mut on_parent: impl FnMut(&mut VertexState, Option<XVal>),
    mut on_elected_port: impl FnMut(&mut VertexState, Port),
    mut on_child: impl FnMut(&mut VertexState, Option<XVal>),
) -> Result<(), Error> {
    let id_bits = net.widths.id;
    let q = QueryRound { query: |st: &VertexState| link.port(st).filter(|_| queries(st)), accepts: &electing, id_bits };
    net.run(&q)?;
    let inputs = net.states.iter().map(|s| s.x.query.map(|(id, _)| XVal::new(id as u64, id_bits))).collect();
    let elected = ch.share(net, &XFold::min(id_bits), inputs)?;
    let mut responders: Vec<Option<(Port, XVal)>> = vec![None; net.n()];
    for (v, (st, e)) in net.states.iter_mut().zip(elected).enumerate() {
        if let (Some((id, port)), Some(e)) = (st.x.query.take(), e) {
            if id as u64 == e.value {
                on_elected_port(st, port);
                responders[v] = Some((port, answer(st)));
            }
        }
        on_parent(st, e);
    }
    let bits = responders.iter().flatten().map(|(_, a)| a.bits).max().unwrap_or(1);
    let send = move |v: VertexId| responders[v as usize].map(|(p, a)| (p, EMsg::Val(a)));
    let proto = IndexedRound { send, bits };
    net.run(&proto)?;
    let inputs = net.states.iter_mut().map(|s| s.x.val.take()).collect();
    let got = ch.share(net, &XFold::pick(bits), inputs)?;
    for (st, g) in net.states.iter_mut().zip(got) {
        on_child(st, g);
    }
    Ok(())
}

/// A single round whose senders are chosen per vertex id.
struct IndexedRound<S> {
    send: S,
    bits: u32,
}

impl<S: Fn(VertexId) -> Option<(Port, EMsg)>> Protocol for IndexedRound<S> {
    type Msg = EMsg;
    type Local = ();

    fn name(&self) -> &'static str {
        "child-answer"
    }

    fn max_message_bits(&self, _: &Widths) -> u64 {
        1 + self.bits as u64
    }

    fn init(&self, cx: &mut InitCx<'_>, _: &VertexState) {
        if (self.send)(cx.v).is_some() {
            cx.wake_at(1);
        }
    }

    fn step(&self, cx: &mut Ctx<'_, EMsg>, st: &mut VertexState, _: &mut ()) -> Result<(), Fault> {
        if cx.round == 1 {
            if let Some((p, m)) = (self.send)(cx.v) {
                cx.send(p, m);
            }
            return Ok(());
        }
        for p in cx.fresh().to_vec() {
            if let Some(EMsg::Val(v)) = cx.take(p) {
                st.x.val = Some(v);
            }
        }
        Ok(())
    }
}

/// Color reduction rounds needed to bring `n` distinct ids below six colors.
pub fn cv_iterations(n: usize) -> u32 {
    let mut range = n.max(2) as u64;
    let mut it = 0;
    while range > 6 {
        range = 2 * crate::engine::ceil_log2(range) as u64;
        it += 1;
    }
    it.max(1)
}

/// One Cole-Vishkin step: index of the lowest differing bit, doubled, plus
/// own bit there. Roots pretend their parent differs in bit 0.
pub fn cv_recolor(own: u32, parent: Option<u32>) -> u32 {
    match parent {
        Some(p) => {
            let i = (own ^ p).trailing_zeros();
            2 * i + (own >> i & 1)
        }
        None => own & 1,
    }
}

fn smallest_free(avoid: &[u32]) -> u32 {
    (0..3).find(|c| !avoid.contains(c)).unwrap()
}

/// Cole-Vishkin to six colors, then three shift-down rounds to three colors.
/// Initial colors are fragment ids; the first exchange also settles roots of
/// mutual MWOE pairs (the larger fragment id keeps no parent).
pub fn three_coloring<C: FragmentChannel>(net: &mut Network<'_>, ch: &mut C) -> Result<(), Error> {
    let idb = net.widths.id;
    for st in &mut net.states {
        st.virt.color = st.frag.id;
    }
    let iters = cv_iterations(net.n());
    for it in 0..iters {
        let first = it == 0;
        let payload_bits = if first { 2 * idb + 1 } else { idb };
        to_all_children(
            net,
            ch,
            payload_bits,
            |st, port| {
                if first {
                    let mutual = st.frag.mwoe == Some(port) && st.virt.has_parent;
                    XVal::new(((st.virt.color as u64) << (idb + 1)) | ((st.frag.id as u64) << 1) | mutual as u64, payload_bits)
                } else {
                    XVal::new(st.virt.color as u64, payload_bits)
                }
            },
            |st, got| {
                let own = st.virt.color;
                if !st.virt.has_parent {
                    st.virt.color = cv_recolor(own, None);
                    return;
                }
                let Some(g) = got else {
                    st.virt.color = cv_recolor(own, None);
                    return;
                };
                let (pcolor, pid, mutual) = if first {
                    ((g.value >> (idb + 1)) as u32, ((g.value >> 1) & ((1 << idb) - 1)) as u32, g.value & 1 == 1)
                } else {
                    (g.value as u32, 0, false)
                };
                if mutual && st.frag.id > pid {
                    st.virt.has_parent = false;
                    st.virt.color = cv_recolor(own, None);
                } else {
                    st.virt.color = cv_recolor(own, Some(pcolor));
                }
            },
        )?;
    }
    for c in [5u32, 4, 3] {
        to_all_children(net, ch, 3, |st, _| XVal::new(st.virt.color as u64, 3), |st, got| {
            st.virt.prev_color = st.virt.color;
            st.virt.color = match (st.virt.has_parent, got) {
                (true, Some(g)) => g.value as u32,
                _ => smallest_free(&[st.virt.color]),
            };
        })?;
        to_all_children(net, ch, 3, |st, _| XVal::new(st.virt.color as u64, 3), |st, got| {
            st.virt.parent_color = if st.virt.has_parent { got.map(|g| g.value as u32) } else { None };
            if st.virt.color == c {
                let mut avoid = vec![st.virt.prev_color];
                avoid.extend(st.virt.parent_color);
                st.virt.color = smallest_free(&avoid);
            }
        })?;
    }
    Ok(())
}

/// Matching over color classes, then attachment of unmatched fragments, then
/// subtree roles. Every vertex of a fragment ends with the same
/// [`VirtualNodeState`]; the endpoint of a flipped edge stores it as its
/// uplink.
pub fn match_and_attach<C: FragmentChannel>(net: &mut Network<'_>, ch: &mut C) -> Result<(), Error> {
    for c in 0..3u32 {
        to_one_child(
            net,
            ch,
            Link::Virtual,
            |st| st.virt.matched == Matched::No,
            move |st| st.virt.matched == Matched::No && st.virt.color == c,
            |_| XVal::new(1, 1),
            |st, e| {
                if e.is_some() {
                    st.virt.matched = Matched::AsParent;
                }
            },
            |_, _| {},
            |st, got| {
                if got.is_some() {
                    st.virt.matched = Matched::AsChild;
                }
            },
        )?;
    }
    to_one_child(
        net,
        ch,
        Link::Virtual,
        |_| true,
        |st| !st.virt.has_parent && st.virt.matched == Matched::No,
        |_| XVal::new(1, 1),
        |st, e| {
            if e.is_some() {
                st.virt.flipped_up = true;
            }
        },
        |st, port| st.uplink = Some(port),
        |st, got| {
            if got.is_some() {
                st.virt.down_via_mwoe = true;
            }
        },
    )?;
    for st in &mut net.states {
        let v = &mut st.virt;
        v.up_via_mwoe = v.has_parent && v.matched != Matched::AsParent;
        v.subtree_root = !v.up_via_mwoe && !v.flipped_up;
        if v.up_via_mwoe && st.frag.mwoe.is_some() {
            st.uplink = st.frag.mwoe;
        }
    }
    Ok(())
}

/// Reset the replicated virtual state at the start of a phase.
pub fn reset_virtual(net: &mut Network<'_>, has_parent: impl Fn(&VertexState) -> bool) {
    for st in &mut net.states {
        let hp = has_parent(st);
        st.virt = VirtualNodeState { has_parent: hp, color: st.frag.id, ..Default::default() };
        st.uplink = None;
        st.x = XRegs::default();
    }
}
