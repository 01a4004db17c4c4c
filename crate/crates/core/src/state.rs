//! Persistent per-vertex registers. Everything here is writable memory and
//! is charged to the vertex's ledger on every step.

use crate::engine::{Footprint, Widths};
use crate::graph::{Port, VertexId};
use crate::phase2::exchange::{VirtualNodeState, XRegs};
use crate::routing::{RoutingLabel, RoutingState};
use crate::slots::SlotRegs;
use crate::spanning::BfsInfo;

/// Fragment membership and the fragment-tree edge this vertex knows.
///
/// After part one `parent`/`children` describe the base-fragment tree and
/// stay fixed; `id` keeps tracking the current (merged) fragment.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FragmentLocal {
    pub id: VertexId,
    pub parent: Option<Port>,
    pub children: u32,
    /// Port of this phase's MWOE, at its fragment-side endpoint only.
    pub mwoe: Option<Port>,
    /// Retrace pointer toward the vertex holding the fragment minimum.
    pub e0: Option<Port>,
    /// Lightest candidate outgoing edge at this vertex: `(weight, port)`.
    pub cand: Option<(u64, Port)>,
    /// Ports of MST edges this vertex recorded.
    pub mst: Vec<Port>,
    pub terminated: bool,
    pub participate: bool,
    pub small: bool,
}

impl Footprint for FragmentLocal {
    fn bits(&self, w: &Widths) -> u64 {
        let port = w.port as u64;
        w.id as u64 + (1 + port) + w.count as u64 + 2 * (1 + port) + self.mst.len() as u64 * port + 3
            + self.cand.map_or(0, |_| w.weight as u64 + port)
    }
}

/// Slot bookkeeping of a base fragment, held at its root.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CycleRegs {
    pub slot: Option<u32>,
    /// This vertex is its fragment's leader (and holds the p-slot).
    pub is_leader: bool,
    /// Label of the fragment leader, so cycle replies can be routed to it.
    pub leader_label: Option<RoutingLabel>,
    /// Number of base fragments in the fragment (replicated).
    pub k: u32,
}

impl Footprint for CycleRegs {
    fn bits(&self, w: &Widths) -> u64 {
        self.slot.map_or(0, |_| w.slot as u64) + 1 + self.leader_label.bits(w) + w.count as u64
    }
}

/// Partwise-aggregation registers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PwaRegs {
    pub part: Option<u32>,
    pub input: Option<u64>,
    pub output: Option<u64>,
    pub value_bits: u32,
}

impl Footprint for PwaRegs {
    fn bits(&self, w: &Widths) -> u64 {
        self.part.map_or(0, |_| w.count as u64)
            + (self.input.is_some() as u64 + self.output.is_some() as u64) * self.value_bits as u64
    }
}

#[derive(Clone, Debug, Default)]
pub struct VertexState {
    pub bfs: Option<BfsInfo>,
    pub frag: FragmentLocal,
    pub routing: Option<RoutingState>,
    /// Largest label width in the network (known to all after setup).
    pub label_bits: u32,
    pub cycle: CycleRegs,
    pub virt: VirtualNodeState,
    pub x: XRegs,
    /// Port toward the parent in the current merge subtree, at the vertex
    /// that talks to it.
    pub uplink: Option<Port>,
    pub slots: SlotRegs,
    pub pwa: PwaRegs,
}

impl Footprint for VertexState {
    fn bits(&self, w: &Widths) -> u64 {
        self.bfs.bits(w)
            + self.routing.as_ref().map_or(0, |r| r.bits(w) + w.count as u64)
            + self.frag.bits(w)
            + self.cycle.bits(w)
            + self.virt.bits(w)
            + self.x.bits(w)
            + self.uplink.map_or(0, |_| w.port as u64)
            + self.slots.bits(w)
            + self.pwa.bits(w)
    }
}
