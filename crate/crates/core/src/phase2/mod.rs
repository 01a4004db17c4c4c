//! Part two: GKP phases over fragments acting as virtual nodes. Fragments
//! talk to each other over MWOE edges in single rounds and internally only
//! through communication cycles.

pub mod exchange;

use crate::cycle::{broadcast_cycle, convergecast_cycle, CycleEnv};
use crate::engine::Network;
use crate::error::Error;
use crate::spanning::{global_fold, Count, MinFold, MinKey, SumFold, Up};
use crate::slots::generate_slot_set;
use crate::state::VertexState;
use exchange::{match_and_attach, reset_virtual, three_coloring, FragmentChannel, XFold, XVal};
#[cfg(test)]
use exchange::{Matched, VirtualNodeState};

/// A fragment that still searches for outgoing edges.
pub fn is_active(st: &VertexState) -> bool {
    !st.frag.small && !st.frag.terminated
}

/// Fragment channel for part two: convergecast and broadcast cycles over
/// the active fragments.
pub struct CycleChannel {
    pub env: CycleEnv,
}

impl FragmentChannel for CycleChannel {
    fn converge(&mut self, net: &mut Network<'_>, fold: &XFold, inputs: Vec<Option<XVal>>) -> Result<Vec<Option<Option<XVal>>>, Error> {
        Ok(convergecast_cycle(net, &self.env, fold, inputs, is_active)?.at_leaders)
    }

    fn publish(&mut self, net: &mut Network<'_>, content: Vec<Option<XVal>>) -> Result<Vec<Option<XVal>>, Error> {
        let got = broadcast_cycle(
            net,
            &self.env,
            |v, st| {
                (st.cycle.is_leader && is_active(st)).then(|| (st.cycle.slot.unwrap(), Some(st.frag.id), Up(content[v as usize])))
            },
            &|_, st| st.cycle.slot.filter(|_| !st.cycle.is_leader && is_active(st)).map(|s| (s, Some(st.frag.id))),
        )?;
        Ok(got.into_iter().map(|u| u.and_then(|u| u.0)).collect())
    }

    fn is_leader(&self, st: &VertexState) -> bool {
        st.cycle.is_leader
    }
}

/// Probe all edges, find each active fragment's MWOE by a convergecast
/// cycle and publish it by a broadcast cycle; `v_adj` recognizes itself by
/// the weight. Fragments without a candidate terminate. Returns the number
/// of fragments still active, counted over `T`.
pub fn discover_mwoes(net: &mut Network<'_>, ch: &mut CycleChannel) -> Result<u32, Error> {
    crate::phase1::probe_round(net, is_active)?;
    let wb = net.widths.weight;
    let inputs = net.states.iter().map(|st| st.frag.cand.filter(|_| is_active(st)).map(|(w, _)| MinKey(w, wb))).collect();
    let mins = convergecast_cycle(net, &ch.env, &MinFold(wb), inputs, is_active)?.at_leaders;
    let got = broadcast_cycle(
        net,
        &ch.env,
        |v, st| (st.cycle.is_leader && is_active(st)).then(|| (st.cycle.slot.unwrap(), Some(st.frag.id), Up(mins[v as usize].flatten()))),
        &|_, st| st.cycle.slot.filter(|_| !st.cycle.is_leader && is_active(st)).map(|s| (s, Some(st.frag.id))),
    )?;
    for (st, g) in net.states.iter_mut().zip(got) {
        if !is_active(st) {
            continue;
        }
        match g {
            Some(Up(Some(MinKey(w, _)))) => {
                st.frag.mwoe = st.frag.cand.filter(|(cw, _)| *cw == w).map(|(_, p)| p);
            }
            Some(Up(None)) => st.frag.terminated = true,
            None => return Err(Error::Invariant("active vertex missed the MWOE broadcast".into())),
        }
        st.frag.cand = None;
    }
    let counts = net.states.iter().map(|st| (st.cycle.is_leader && is_active(st)).then_some(Count(1))).collect();
    Ok(global_fold(net, &SumFold, counts)?.map_or(0, |c| c.0))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseReport {
    pub phase: u32,
    pub active_before: u32,
    pub cycles: usize,
}

/// One GKP phase. Returns `None` when no active fragment is left.
pub fn run_gkp_phase(net: &mut Network<'_>, ch: &mut CycleChannel, phase: u32) -> Result<Option<PhaseReport>, Error> {
    let name = format!("p2-{phase}");
    net.begin_phase(&name);
    let active = discover_mwoes(net, ch)?;
    if active == 0 {
        return Ok(None);
    }
    reset_virtual(net, is_active);
    three_coloring(net, ch)?;
    match_and_attach(net, ch)?;
    for st in &mut net.states {
        if let Some(p) = st.frag.mwoe.filter(|_| st.virt.mwoe_used()) {
            st.frag.mst.push(p);
        }
    }
    generate_slot_set(net, ch)?;
    for st in &mut net.states {
        st.frag.mwoe = None;
        st.uplink = None;
        st.virt = Default::default();
        st.x = Default::default();
    }
    Ok(Some(PhaseReport { phase, active_before: active, cycles: net.metrics.cycles_in_phase(&name) }))
}

/// Run GKP phases until no fragment is active.
pub fn run_second_part(net: &mut Network<'_>, env: CycleEnv, mut check: impl FnMut(&Network<'_>) -> Result<(), Error>) -> Result<Vec<PhaseReport>, Error> {
    let mut ch = CycleChannel { env };
    let cap = 2 * net.widths.log_n;
    let mut reports = Vec::new();
    for phase in 0.. {
        match run_gkp_phase(net, &mut ch, phase)? {
            Some(r) => reports.push(r),
            None => break,
        }
        check(net)?;
        if phase >= cap {
            return Err(Error::Invariant(format!("phase cap {cap} exceeded")));
        }
    }
    Ok(reports)
}
