//! Thorup-Zwick style tree routing over the BFS tree `T`.
//!
//! Vertices are numbered in DFS order (children by ascending port). An edge
//! from `u` to child `v` is light when `size(v) < size(u) / 2`; every vertex
//! has at most one heavy child. A label is the destination's DFS number plus
//! one `(depth, port)` entry per light edge on the root path, so it has at
//! most `ceil(log2 n)` entries.
//!
//! Layout: label = `dfs` (id bits) + entry count (bits for `log n`) +
//! entries of `depth` (bits for `d(T)`) and `port` (port bits). Table = own depth, subtree interval
//! (its start is the DFS number), heavy port with its interval.

use crate::engine::{bits_for, Footprint, Network, Payload, Widths};
use crate::error::Error;
use crate::graph::{Port, VertexId};
use crate::spanning::{global_fold, tree_convergecast, tree_interval_allocation, Count, IntervalSplit, MaxFold, MaxU32, SumFold, TreeSel};
use crate::state::VertexState;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RoutingLabel {
    pub dfs: u32,
    /// `(depth of the upper endpoint, port at the upper endpoint)`.
    pub light: Vec<(u32, Port)>,
}

impl RoutingLabel {
    pub fn width(&self, w: &Widths) -> u64 {
        (w.id + bits_for(w.log_n as u64)) as u64 + self.light.len() as u64 * (w.depth + w.port) as u64
    }

    /// The part of the label still needed below a vertex at `depth`: light
    /// entries at or above it have been used.
    pub fn below(mut self, depth: u32) -> RoutingLabel {
        self.light.retain(|(d, _)| *d > depth);
        self
    }

    /// Width bound that holds for every label in an `n`-vertex tree.
    pub fn max_width(w: &Widths) -> u64 {
        (w.id + bits_for(w.log_n as u64)) as u64 + w.log_n as u64 * (w.depth + w.port) as u64
    }
}

impl Footprint for RoutingLabel {
    fn bits(&self, w: &Widths) -> u64 {
        self.width(w)
    }
}

impl Payload for RoutingLabel {
    fn wire_bits(&self, w: &Widths) -> u64 {
        self.width(w)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoutingTable {
    pub depth: u32,
    pub dfs: u32,
    pub lo: u32,
    pub hi: u32,
    /// Heavy child: `(port, lo, hi)`.
    pub heavy: Option<(Port, u32, u32)>,
    pub parent: Option<Port>,
}

impl RoutingTable {
    /// `dfs` equals `lo` and `parent` is the BFS register, so neither is
    /// stored twice.
    pub fn width(&self, w: &Widths) -> u64 {
        (1 + w.depth + 4 * w.count + w.port) as u64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoutingState {
    pub table: RoutingTable,
    pub label: RoutingLabel,
}

impl Footprint for RoutingState {
    fn bits(&self, w: &Widths) -> u64 {
        self.table.width(w) + self.label.width(w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hop {
    Deliver,
    Forward(Port),
}

/// One forwarding decision at the vertex owning `table`.
pub fn route_next_hop(table: &RoutingTable, header: &RoutingLabel) -> Result<Hop, Error> {
    let dest = header.dfs;
    if dest == table.dfs {
        return Ok(Hop::Deliver);
    }
    if dest < table.lo || dest >= table.hi {
        return table.parent.map(Hop::Forward).ok_or_else(|| Error::Invariant(format!("label {dest} outside the tree")));
    }
    if let Some(&(_, p)) = header.light.iter().find(|(d, _)| *d == table.depth) {
        return Ok(Hop::Forward(p));
    }
    match table.heavy {
        Some((p, lo, hi)) if dest >= lo && dest < hi => Ok(Hop::Forward(p)),
        _ => Err(Error::Invariant(format!("no route for label {dest} at dfs {}", table.dfs))),
    }
}

struct DfsSplit;

impl IntervalSplit for DfsSplit {
    type Extra = RoutingLabel;

    fn max_extra_bits(&self, w: &Widths) -> u64 {
        RoutingLabel::max_width(w)
    }

    fn own_demand(&self, _: VertexId, _: &VertexState) -> u32 {
        1
    }

    fn subtree_demand(&self, _: VertexId, st: &VertexState) -> u32 {
        st.routing.as_ref().map_or(0, |r| r.table.hi - r.table.lo)
    }

    fn child_extra(&self, st: &VertexState, port: Port, child_size: u32) -> RoutingLabel {
        let r = st.routing.as_ref().unwrap();
        let mut label = r.label.clone();
        if 2 * child_size < r.table.hi - r.table.lo {
            label.light.push((r.table.depth, port));
        }
        label
    }

    fn on_assign(&self, st: &mut VertexState, lo: u32, extra: Option<RoutingLabel>) {
        let r = st.routing.as_mut().unwrap();
        let size = r.table.hi - r.table.lo;
        r.label = extra.unwrap_or_default();
        r.label.dfs = lo;
        r.table.dfs = lo;
        r.table.lo = lo;
        r.table.hi = lo + size;
    }

    fn on_child(&self, st: &mut VertexState, port: Port, lo: u32, size: u32) {
        let r = st.routing.as_mut().unwrap();
        if 2 * size >= r.table.hi - r.table.lo {
            r.table.heavy = Some((port, lo, lo + size));
        }
    }
}

/// Build tables and labels over `T`: subtree sizes by convergecast, then DFS
/// intervals and labels top-down, then the network-wide maximum label width
/// (needed to size macro-rounds of later cycles). Returns that maximum.
pub fn setup_routing(net: &mut Network<'_>) -> Result<u64, Error> {
    let out = collect_sizes(net)?;
    for (st, size) in net.states.iter_mut().zip(out) {
        let b = st.bfs.expect("BFS before routing");
        st.routing = Some(RoutingState {
            table: RoutingTable { depth: b.depth, dfs: 0, lo: 0, hi: size, heavy: None, parent: b.parent },
            label: RoutingLabel::default(),
        });
    }
    let starts = net.states.iter().map(|s| s.bfs.unwrap().parent.is_none().then_some((0, None))).collect();
    tree_interval_allocation(net, TreeSel::Bfs, &DfsSplit, starts)?;
    let w = net.widths;
    let bits = net.states.iter().map(|s| Some(MaxU32(s.routing.as_ref().unwrap().label.width(&w) as u32))).collect();
    let max = global_fold(net, &MaxFold, bits)?.map_or(0, |m| m.0 as u64);
    for st in &mut net.states {
        st.label_bits = max as u32;
    }
    Ok(max)
}

/// Subtree size at every vertex: the value it upcasts (or holds at the root).
fn collect_sizes(net: &mut Network<'_>) -> Result<Vec<u32>, Error> {
    let out = tree_convergecast(net, TreeSel::Bfs, &SumFold, vec![Some(Count(1)); net.n()])?;
    Ok(out.partials.into_iter().map(|c| c.map_or(0, |c| c.0)).collect())
}
