//! Slot-set generation for the fragments of the next phase.

use std::collections::BTreeMap;

use crate::cycle::{broadcast_cycle, broadcast_cycle_split, convergecast_cycle, interval_allocation_cycle, AllocSend};
use crate::engine::{Ctx, Footprint, InitCx, Network, Payload, Protocol, Widths};
use crate::error::{Error, Fault};
use crate::graph::{Port, VertexId};
use crate::phase2::exchange::{to_parent, EMsg, Link, XFold, XVal};
use crate::phase2::{is_active, CycleChannel};
use crate::routing::RoutingLabel;
use crate::spanning::{tree_interval_allocation, IntervalSplit, NoExtra, TreeSel};
use crate::state::VertexState;

/// Registers used while generating a slot set; all fit in O(log n) bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SlotRegs {
    /// Children of the fragment in its merge subtree (replicated).
    pub child_count: u32,
    /// Children whose request arrived so far (leader).
    pub responses: u32,
    /// Sum of the children's requests (leader).
    pub pending: u32,
    /// Whether the fragment's subtree request is complete and its total (replicated).
    pub ready: bool,
    pub total: u32,
    /// At the uplink vertex: the request it sent over the merge edge.
    pub sent: Option<u32>,
    /// Request sizes received over merge edges from child fragments.
    pub recv: u32,
    /// Requests received inside this vertex's base-fragment subtree.
    pub partial: u32,
    /// Start of the interval this vertex hands to its child fragments.
    pub recv_lo: Option<u32>,
    /// Start of the fragment's interval (leader).
    pub interval: Option<u32>,
    pub distributed: bool,
    /// Slot of this base fragment in the next slot set (roots).
    pub new_slot: Option<u32>,
}

impl Footprint for SlotRegs {
    fn bits(&self, w: &Widths) -> u64 {
        let c = w.slot as u64;
        4 * c + 2 + [self.sent, self.recv_lo, self.interval, self.new_slot].iter().filter(|x| x.is_some()).count() as u64 * c
            + 2 * c
    }
}

/// Longest parent chain in a merge subtree.
const SUBTREE_DEPTH: u32 = 3;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Ready fragments send their total over the uplink once.
    Request,
    /// Pending requests are sent again and answered with interval starts.
    Resend,
}

struct SlotRound {
    mode: Mode,
    bits: u32,
    pack: u32,
}

impl SlotRound {
    fn sends(&self, st: &VertexState) -> Option<(Port, u32)> {
        let up = st.uplink?;
        match self.mode {
            Mode::Request => (st.slots.ready && st.slots.sent.is_none()).then_some((up, st.slots.total)),
            Mode::Resend => st.slots.sent.map(|s| (up, s)),
        }
    }
}

impl Protocol for SlotRound {
    type Msg = EMsg;
    type Local = ();

    fn name(&self) -> &'static str {
        match self.mode {
            Mode::Request => "slot-request",
            Mode::Resend => "slot-resend",
        }
    }

    fn max_message_bits(&self, _: &Widths) -> u64 {
        1 + self.bits as u64
    }

    fn init(&self, cx: &mut InitCx<'_>, st: &VertexState) {
        if self.sends(st).is_some() {
            cx.wake_at(1);
        }
    }

    fn step(&self, cx: &mut Ctx<'_, EMsg>, st: &mut VertexState, _: &mut ()) -> Result<(), Fault> {
        if cx.round == 1 {
            if let Some((p, s)) = self.sends(st) {
                if self.mode == Mode::Request {
                    st.slots.sent = Some(s);
                }
                cx.send(p, EMsg::Val(XVal::new(s as u64, self.bits)));
            }
            return Ok(());
        }
        let mut ports = cx.fresh().to_vec();
        ports.sort_unstable();
        for p in ports {
            let Some(EMsg::Val(v)) = cx.take(p) else { continue };
            if cx.round == 3 {
                st.x.val = Some(v);
                continue;
            }
            match self.mode {
                Mode::Request => {
                    st.slots.recv += v.value as u32;
                    let packed = (v.value << self.pack) | 1;
                    let old = st.x.val.map_or(0, |o| o.value);
                    st.x.val = Some(XVal::new(old + packed, self.bits + self.pack));
                }
                Mode::Resend => {
                    if let Some(lo) = st.slots.recv_lo {
                        cx.send(p, EMsg::Val(XVal::new(lo as u64, self.bits)));
                        st.slots.recv_lo = Some(lo + v.value as u32);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Intrinsic split of a fragment's child intervals over its base fragments.
struct RecvSplit;

impl IntervalSplit for RecvSplit {
    type Extra = NoExtra;

    fn max_extra_bits(&self, _: &Widths) -> u64 {
        0
    }
    fn own_demand(&self, _: VertexId, st: &VertexState) -> u32 {
        st.slots.recv
    }
    fn subtree_demand(&self, _: VertexId, st: &VertexState) -> u32 {
        st.slots.partial
    }
    fn child_extra(&self, _: &VertexState, _: Port, _: u32) -> NoExtra {
        NoExtra
    }
    fn on_assign(&self, st: &mut VertexState, lo: u32, _: Option<NoExtra>) {
        st.slots.recv_lo = Some(lo);
        st.slots.partial = 0;
    }
}

/// What the leader of a merged fragment tells its base fragments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewFragment {
    pub id: VertexId,
    pub k: u32,
    pub label: Option<RoutingLabel>,
}

impl Payload for NewFragment {
    fn wire_bits(&self, w: &Widths) -> u64 {
        (w.id + w.count) as u64 + self.label.as_ref().map_or(0, |l| l.width(w))
    }
}

impl Footprint for NewFragment {
    fn bits(&self, w: &Widths) -> u64 {
        self.wire_bits(w)
    }
}

fn holds_slot(st: &VertexState) -> bool {
    !st.frag.small && st.cycle.slot.is_some()
}

fn leader_p(st: &VertexState) -> Option<(u32, Option<u32>)> {
    st.cycle.slot.filter(|_| st.cycle.is_leader).map(|s| (s, Some(st.frag.id)))
}

/// Build the slot set of the merged fragments: every merge subtree gets a
/// consecutive range whose first slot belongs to the subtree root's
/// leader, terminated fragments keep a range of their own size, and every
/// vertex learns its new fragment id.
pub fn generate_slot_set(net: &mut Network<'_>, ch: &mut CycleChannel) -> Result<(), Error> {
    let env = ch.env;
    let w = net.widths;
    let sb = w.slot;
    let cb = w.count + 1;

    // children per fragment in its merge subtree
    to_parent(net, ch, Link::Subtree, XFold::sum(w.count), |_| Some(XVal::new(1, w.count)), |st, got| {
        let mut s = SlotRegs::default();
        if is_active(st) {
            s.child_count = got.map_or(0, |g| g.value as u32);
            s.ready = s.child_count == 0;
            s.total = st.cycle.k;
        }
        st.slots = s;
    })?;

    // requests climb the merge subtrees
    for _ in 0..SUBTREE_DEPTH {
        net.run(&SlotRound { mode: Mode::Request, bits: sb, pack: cb })?;
        let inputs = net.states.iter_mut().map(|s| s.x.val.take()).collect();
        let out = convergecast_cycle(net, &env, &XFold::sum(sb + cb), inputs, is_active)?;
        let mask = (1u64 << cb) - 1;
        for (st, (part, top)) in net.states.iter_mut().zip(out.partials.into_iter().zip(out.at_leaders)) {
            if let Some(p) = part {
                st.slots.partial += (p.value >> cb) as u32;
            }
            if let Some(Some(t)) = top {
                st.slots.pending += (t.value >> cb) as u32;
                st.slots.responses += (t.value & mask) as u32;
            }
        }
        let got = broadcast_cycle(
            net,
            &env,
            |_, st| {
                let s = &st.slots;
                let ready = s.responses == s.child_count;
                let total = st.cycle.k + s.pending;
                (is_active(st) && st.cycle.is_leader)
                    .then(|| (st.cycle.slot.unwrap(), Some(st.frag.id), XVal::new(((total as u64) << 1) | ready as u64, sb + 1)))
            },
            &|_, st| leader_q(st),
        )?;
        for (st, g) in net.states.iter_mut().zip(got) {
            if let Some(g) = g.filter(|_| is_active(st)) {
                st.slots.ready = g.value & 1 == 1;
                st.slots.total = (g.value >> 1) as u32;
            }
        }
    }

    // ranges for subtree roots and terminated fragments
    if net.states.iter().any(|st| is_active(st) && st.virt.subtree_root && !st.slots.ready) {
        return Err(Error::Invariant("merge subtree root never became ready".into()));
    }
    let starts = interval_allocation_cycle(net, &env, true, |_, st| {
        let (slot, tag) = leader_p(st).filter(|_| holds_slot(st))?;
        if is_active(st) && st.virt.subtree_root {
            Some((slot, tag, AllocSend::Request(st.slots.total)))
        } else if st.frag.terminated {
            Some((slot, tag, AllocSend::Request(st.cycle.k)))
        } else {
            None
        }
    })?;
    for (st, s) in net.states.iter_mut().zip(starts) {
        if let Some(s) = s {
            st.slots.interval = Some(s.ok_or_else(|| Error::Invariant("rootless allocation without bottom".into()))?);
        }
    }

    // ranges travel down the merge subtrees
    for _ in 0..SUBTREE_DEPTH {
        let replies = interval_allocation_cycle(net, &env, false, |_, st| {
            if !is_active(st) {
                return None;
            }
            if let Some((slot, tag)) = leader_p(st) {
                if st.slots.child_count == 0 || st.slots.distributed {
                    return None;
                }
                let bottom = st.slots.interval.map(|a| a + st.cycle.k + st.slots.partial);
                return Some((slot, tag, AllocSend::Bottom(bottom)));
            }
            let slot = st.cycle.slot?;
            (st.slots.partial > 0).then_some((slot, Some(st.frag.id), AllocSend::Request(st.slots.partial)))
        })?;
        let mut starts: Vec<Option<(u32, Option<NoExtra>)>> = replies.into_iter().map(|r| r.flatten().map(|s| (s, None))).collect();
        for (v, st) in net.states.iter_mut().enumerate() {
            if is_active(st) && st.cycle.is_leader && st.slots.child_count > 0 && !st.slots.distributed {
                if let Some(a) = st.slots.interval {
                    starts[v] = Some((a + st.cycle.k, None));
                    st.slots.distributed = true;
                }
            }
        }
        tree_interval_allocation(net, TreeSel::Fragment, &RecvSplit, starts)?;
        net.run(&SlotRound { mode: Mode::Resend, bits: sb, pack: cb })?;
        for st in &mut net.states {
            if st.slots.recv_lo.take().is_some() {
                st.slots.recv = 0;
            }
            if st.x.val.is_some() {
                st.slots.sent = None;
            }
        }
        let inputs = net.states.iter_mut().map(|s| s.x.val.take()).collect();
        let out = convergecast_cycle(net, &env, &XFold::pick(sb), inputs, is_active)?;
        for (st, r) in net.states.iter_mut().zip(out.at_leaders) {
            if let Some(Some(s)) = r {
                st.slots.interval = Some(s.value as u32);
            }
        }
    }
    if net.states.iter().any(|st| holds_slot(st) && st.cycle.is_leader && st.slots.interval.is_none()) {
        return Err(Error::Invariant("fragment left without an interval".into()));
    }

    // one slot per base fragment
    for st in &mut net.states {
        if holds_slot(st) && st.cycle.is_leader {
            st.slots.new_slot = st.slots.interval;
        }
    }
    let singles = interval_allocation_cycle(net, &env, false, |_, st| {
        if !holds_slot(st) {
            return None;
        }
        if let Some((slot, tag)) = leader_p(st) {
            return Some((slot, tag, AllocSend::Bottom(st.slots.interval.map(|a| a + 1))));
        }
        Some((st.cycle.slot.unwrap(), Some(st.frag.id), AllocSend::Request(1)))
    })?;
    for (st, r) in net.states.iter_mut().zip(singles) {
        if let Some(r) = r {
            st.slots.new_slot = Some(r.ok_or_else(|| Error::Invariant("base fragment without a new slot".into()))?);
        }
    }

    // new fragment ids and leaders; the label stays at the subset roots
    let (full, got) = broadcast_cycle_split(
        net,
        &env,
        |v, st| {
            let heads = st.frag.terminated || st.virt.subtree_root;
            (holds_slot(st) && st.cycle.is_leader && heads).then(|| {
                let k = if st.frag.terminated { st.cycle.k } else { st.slots.total };
                (st.slots.new_slot.unwrap(), None, NewFragment { id: v, k, label: st.cycle.leader_label.clone() })
            })
        },
        &|_, st| st.slots.new_slot.filter(|_| holds_slot(st)).map(|s| (s, None)),
        |m| NewFragment { label: None, ..m.clone() },
    )?;
    for (v, (st, (g, f))) in net.states.iter_mut().zip(got.into_iter().zip(full)).enumerate() {
        if let Some(g) = g {
            st.frag.id = g.id;
            st.cycle.k = g.k;
            if holds_slot(st) {
                st.cycle.slot = st.slots.new_slot;
                st.cycle.is_leader = g.id == v as VertexId;
                st.cycle.leader_label = f.and_then(|f| f.label);
            }
        }
        st.slots = SlotRegs::default();
    }
    Ok(())
}

fn leader_q(st: &VertexState) -> Option<(u32, Option<u32>)> {
    st.cycle.slot.filter(|_| is_active(st) && !st.cycle.is_leader).map(|s| (s, Some(st.frag.id)))
}

/// One base fragment's entry in a slot set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotEntry {
    pub fragment: VertexId,
    pub slot: u32,
    pub leader: bool,
}

/// Check a slot set: each fragment owns a range of consecutive slots whose
/// first slot is held by its leader, ranges are disjoint, each fragment has
/// one leader, and every slot lies in `[1, limit]`.
pub fn validate_slot_set(entries: &[SlotEntry], limit: u32) -> Result<(), Vec<String>> {
    let mut errs = Vec::new();
    let mut owner: BTreeMap<u32, VertexId> = BTreeMap::new();
    let mut frags: BTreeMap<VertexId, Vec<SlotEntry>> = BTreeMap::new();
    for e in entries {
        if e.slot == 0 || e.slot > limit {
            errs.push(format!("slot {} outside [1, {limit}]", e.slot));
        }
        if owner.insert(e.slot, e.fragment).is_some() {
            errs.push(format!("overlap at {}", e.slot));
        }
        frags.entry(e.fragment).or_default().push(*e);
    }
    let mut ranges = Vec::new();
    for (f, mut es) in frags {
        es.sort_by_key(|e| e.slot);
        let lo = es[0].slot;
        let hi = es[es.len() - 1].slot;
        if !es[0].leader {
            errs.push(format!("p-slot owner: slot {lo} of fragment {f} is not held by its leader"));
        }
        let leaders = es.iter().filter(|e| e.leader).count();
        if leaders != 1 {
            errs.push(format!("fragment {f} has {leaders} leaders"));
        }
        if (hi - lo + 1) as usize != es.len() {
            errs.push(format!("fragment {f} range [{lo}, {hi}] has gaps"));
        }
        ranges.push((lo, hi, f));
    }
    ranges.sort_unstable();
    for pair in ranges.windows(2) {
        if pair[1].0 <= pair[0].1 {
            errs.push(format!("overlap at {}", pair[1].0));
        }
    }
    errs.dedup();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

/// Slot set currently held by the network's base-fragment roots.
pub fn slot_entries(net: &Network<'_>) -> Vec<SlotEntry> {
    net.states
        .iter()
        .filter(|st| holds_slot(st))
        .map(|st| SlotEntry { fragment: st.frag.id, slot: st.cycle.slot.unwrap(), leader: st.cycle.is_leader })
        .collect()
}

/// Initial slots: after part one every non-small base fragment is its own
/// fragment. Slots `1..=K_b` go out in DFS order of `T`, the root of each
/// base fragment becomes its leader and stores its own label.
pub fn assign_initial_slots(net: &mut Network<'_>) -> Result<u32, Error> {
    struct Roots;
    impl IntervalSplit for Roots {
        type Extra = NoExtra;
        fn max_extra_bits(&self, _: &Widths) -> u64 {
            0
        }
        fn own_demand(&self, _: VertexId, st: &VertexState) -> u32 {
            is_subset_root(st) as u32
        }
        fn subtree_demand(&self, _: VertexId, st: &VertexState) -> u32 {
            st.slots.partial
        }
        fn child_extra(&self, _: &VertexState, _: Port, _: u32) -> NoExtra {
            NoExtra
        }
        fn on_assign(&self, st: &mut VertexState, lo: u32, _: Option<NoExtra>) {
            if is_subset_root(st) {
                st.cycle.slot = Some(lo);
            }
            st.slots.partial = 0;
        }
    }
    let inputs = net.states.iter().map(|st| Some(crate::spanning::Count(is_subset_root(st) as u32))).collect();
    let out = crate::spanning::tree_convergecast(net, TreeSel::Bfs, &crate::spanning::SumFold, inputs)?;
    let mut kb = 0;
    for (st, p) in net.states.iter_mut().zip(out.partials) {
        st.slots.partial = p.map_or(0, |c| c.0);
        if st.bfs.is_some_and(|b| b.parent.is_none()) {
            kb = st.slots.partial;
        }
    }
    let starts = net.states.iter().map(|st| st.bfs.unwrap().parent.is_none().then_some((1, None))).collect();
    tree_interval_allocation(net, TreeSel::Bfs, &Roots, starts)?;
    for st in &mut net.states {
        st.slots = SlotRegs::default();
        st.cycle.k = 1;
        if is_subset_root(st) {
            st.cycle.is_leader = true;
            st.cycle.leader_label = st.routing.as_ref().map(|r| r.label.clone());
        }
    }
    Ok(kb)
}

fn is_subset_root(st: &VertexState) -> bool {
    !st.frag.small && st.frag.parent.is_none()
}
