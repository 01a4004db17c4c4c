//! Synchronous round executor for the CONGEST clean-network model.
//!
//! A [`Protocol`] is a per-vertex handler. In every round the engine steps
//! each vertex that has freshly delivered messages or a scheduled wake-up,
//! collects its outgoing messages and delivers them at the end of the round:
//! a message sent in round `t` is readable from round `t + 1`. Every port
//! keeps the last message that arrived on it until it is overwritten or
//! taken, so requests can stay pinned and unopened.
//!
//! Logical messages wider than a word travel as several frames inside one
//! macro-round of `W` frame-rounds, where `W` is fixed per run from the
//! protocol's widest message.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use crate::error::{Error, Fault};
use crate::graph::{AdjEntry, Port, SubgraphMask, VertexId, WeightedGraph};
use crate::state::VertexState;

/// Bits needed to write any value in `0..=x`.
pub fn bits_for(x: u64) -> u32 {
    (64 - x.leading_zeros()).max(1)
}

pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Field widths shared by every vertex (all derived from `n`, the maximum
/// degree and the maximum weight, which every vertex knows).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Widths {
    pub n: usize,
    pub log_n: u32,
    pub id: u32,
    pub count: u32,
    pub weight: u32,
    pub port: u32,
    pub slot: u32,
    /// Depth fields: `count` bits until `d(T)` is known, then enough for `d(T)`.
    pub depth: u32,
    pub word: u32,
    pub budget: u64,
}

impl Widths {
    pub fn new(g: &WeightedGraph, cfg: &EngineConfig) -> Self {
        let n = g.n();
        // clamped so that two-vertex graphs still fit the fixed-width registers
        let log_n = ceil_log2(n as u64).max(2);
        Widths {
            n,
            log_n,
            id: bits_for(n.saturating_sub(1) as u64),
            count: bits_for(n as u64),
            weight: bits_for(g.max_weight()),
            port: bits_for(g.max_degree().saturating_sub(1) as u64),
            slot: bits_for(2 * n as u64 + 1),
            depth: bits_for(n as u64),
            word: cfg.word_constant * log_n,
            budget: cfg.memory_constant as u64 * (log_n as u64).pow(2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EngineConfig {
    /// `c_w`: a frame carries `c_w * ceil(log2 n)` bits.
    pub word_constant: u32,
    /// `c_m`: each vertex may hold `c_m * ceil(log2 n)^2` writable bits.
    pub memory_constant: u32,
    /// Macro-round cap for a single protocol run.
    pub round_cap: u64,
    pub trace: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { word_constant: 4, memory_constant: 64, round_cap: 1 << 20, trace: false }
    }
}

/// Anything that occupies writable vertex memory.
pub trait Footprint {
    fn bits(&self, w: &Widths) -> u64;
}

impl Footprint for () {
    fn bits(&self, _: &Widths) -> u64 {
        0
    }
}

impl Footprint for bool {
    fn bits(&self, _: &Widths) -> u64 {
        1
    }
}

impl<T: Footprint> Footprint for Option<T> {
    fn bits(&self, w: &Widths) -> u64 {
        self.as_ref().map_or(0, |x| x.bits(w))
    }
}

/// A logical message; `bits` is its encoded width.
pub trait Payload {
    fn wire_bits(&self, w: &Widths) -> u64;
}

pub fn frames_for(bits: u64, word: u32) -> u64 {
    bits.div_ceil(word as u64).max(1)
}

/// Bit string used by [`transmit`] and [`reassemble`].
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    pub fn from_u64(value: u64, width: u32) -> Self {
        BitString { bits: (0..width).map(|i| value >> i & 1 == 1).collect() }
    }

    pub fn zeros(width: usize) -> Self {
        BitString { bits: vec![false; width] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub payload: BitString,
    pub port: Port,
    pub round: u64,
    /// Position of this frame inside its macro-round.
    pub index: u32,
}

/// Split `msg` into word-sized frames for one macro-round of `w` frames.
pub fn transmit(msg: &BitString, port: Port, macro_round: u64, word_bits: u32, w: u32) -> Result<Vec<Frame>, Error> {
    let capacity = word_bits as u64 * w as u64;
    if msg.len() as u64 > capacity {
        return Err(Error::Capacity { bits: msg.len() as u64, capacity });
    }
    let chunks: Vec<&[bool]> = if msg.is_empty() { vec![&[][..]] } else { msg.bits.chunks(word_bits as usize).collect() };
    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(i, c)| Frame {
            payload: BitString::from_bits(c.to_vec()),
            port,
            round: (macro_round - 1) * w as u64 + i as u64 + 1,
            index: i as u32,
        })
        .collect())
}

pub fn reassemble(frames: &[Frame]) -> BitString {
    let mut sorted: Vec<&Frame> = frames.iter().collect();
    sorted.sort_by_key(|f| f.index);
    BitString { bits: sorted.into_iter().flat_map(|f| f.payload.bits.iter().copied()).collect() }
}

/// Named writable slots of one vertex.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MemoryLedger {
    slots: Vec<(String, u64)>,
    pub peak_bits: u64,
    pub budget_bits: u64,
}

impl MemoryLedger {
    pub fn new(budget_bits: u64) -> Self {
        MemoryLedger { slots: Vec::new(), peak_bits: 0, budget_bits }
    }

    pub fn charge(&mut self, name: &str, bits: u64) -> Result<(), Error> {
        if self.slots.iter().any(|(s, _)| s == name) {
            return Err(Error::Ledger(format!("slot {name} already charged")));
        }
        self.slots.push((name.to_string(), bits));
        self.observe();
        Ok(())
    }

    pub fn release(&mut self, name: &str) -> Result<u64, Error> {
        let i = self
            .slots
            .iter()
            .position(|(s, _)| s == name)
            .ok_or_else(|| Error::Ledger(format!("release of unknown slot {name}")))?;
        Ok(self.slots.remove(i).1)
    }

    /// Charge or re-charge a slot whose width changes over time.
    pub fn set(&mut self, name: &str, bits: u64) {
        match self.slots.iter_mut().find(|(s, _)| s == name) {
            Some(slot) => slot.1 = bits,
            None => self.slots.push((name.to_string(), bits)),
        }
        self.observe();
    }

    pub fn total(&self) -> u64 {
        self.slots.iter().map(|(_, b)| b).sum()
    }

    pub fn live_slots(&self) -> impl Iterator<Item = (&str, u64)> {
        self.slots.iter().map(|(s, b)| (s.as_str(), *b))
    }

    fn observe(&mut self) {
        self.peak_bits = self.peak_bits.max(self.total());
    }

    /// End-of-round budget check.
    pub fn end_round(&self, vertex: VertexId, round: u64) -> Result<(), Error> {
        let total = self.total();
        if total > self.budget_bits {
            let slot = self.slots.iter().max_by_key(|(_, b)| *b).map(|(s, _)| s.clone()).unwrap_or_default();
            return Err(Error::Memory { vertex, round, slot, bits: total, budget: self.budget_bits });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CycleKind {
    Convergecast,
    Broadcast,
    IntervalAllocation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleRecord {
    pub kind: CycleKind,
    pub phase: String,
    /// Frame-rounds of the extrinsic step.
    pub extrinsic_rounds: u64,
    /// Rounds of the intrinsic step (single-frame messages).
    pub intrinsic_rounds: u64,
    /// Largest slot index in use.
    pub max_slot: u64,
    pub w: u32,
    /// Frame-round bound this cycle is checked against.
    pub bound: u64,
    pub extrinsic_frames: u64,
    pub intrinsic_frames: u64,
}

impl CycleRecord {
    pub fn within_bound(&self) -> bool {
        match self.kind {
            CycleKind::Broadcast => self.extrinsic_rounds + self.intrinsic_rounds <= self.bound,
            _ => self.extrinsic_rounds <= self.bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PhaseRow {
    pub phase: String,
    pub rounds: u64,
    pub frames: u64,
    pub logical_messages: u64,
    pub peak_bits_global: u64,
    /// Vertex counts per power-of-two bucket of per-vertex peak bits.
    pub peak_bits_histogram: BTreeMap<u64, u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize)]
pub struct MetricsCounters {
    /// Frame-rounds.
    pub rounds_elapsed: u64,
    pub macro_rounds: u64,
    pub frames_sent: u64,
    pub logical_messages_sent: u64,
    pub per_vertex_peak: Vec<u64>,
    pub global_peak: u64,
    pub runs: u64,
    pub phases: Vec<PhaseRow>,
    pub cycles: Vec<CycleRecord>,
    pub congestion_violations: u64,
    pub root_store_violations: u64,
    pub bound_violations: u64,
    #[serde(skip)]
    phase_peak: Vec<u64>,
}

impl MetricsCounters {
    fn new(n: usize) -> Self {
        MetricsCounters { per_vertex_peak: vec![0; n], phase_peak: vec![0; n], ..Default::default() }
    }

    pub fn current_phase(&self) -> &str {
        self.phases.last().map_or("", |p| p.phase.as_str())
    }

    pub fn cycles_in_phase(&self, phase: &str) -> usize {
        self.cycles.iter().filter(|c| c.phase == phase).count()
    }

    fn observe_peak(&mut self, v: VertexId, bits: u64) {
        let slot = &mut self.per_vertex_peak[v as usize];
        *slot = (*slot).max(bits);
        self.global_peak = self.global_peak.max(bits);
        let p = &mut self.phase_peak[v as usize];
        *p = (*p).max(bits);
        if let Some(row) = self.phases.last_mut() {
            row.peak_bits_global = row.peak_bits_global.max(bits);
        }
    }

    fn close_phase(&mut self) {
        if let Some(row) = self.phases.last_mut() {
            row.peak_bits_histogram.clear();
            for &b in &self.phase_peak {
                let bucket = if b == 0 { 0 } else { 1u64 << (63 - b.leading_zeros()) };
                *row.peak_bits_histogram.entry(bucket).or_default() += 1;
            }
        }
        self.phase_peak.iter_mut().for_each(|p| *p = 0);
    }

    /// CSV with columns `phase,rounds,frames,logical_messages,peak_bits_global,peak_bits_histogram`;
    /// the histogram is `bucket:count` pairs joined by `;`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("phase,rounds,frames,logical_messages,peak_bits_global,peak_bits_histogram\n");
        let mut rows = self.phases.clone();
        if let Some(last) = rows.last_mut() {
            last.peak_bits_histogram.clear();
            for &b in &self.phase_peak {
                let bucket = if b == 0 { 0 } else { 1u64 << (63 - b.leading_zeros()) };
                *last.peak_bits_histogram.entry(bucket).or_default() += 1;
            }
        }
        for r in rows {
            let hist: Vec<String> = r.peak_bits_histogram.iter().map(|(b, c)| format!("{b}:{c}")).collect();
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.phase,
                r.rounds,
                r.frames,
                r.logical_messages,
                r.peak_bits_global,
                hist.join(";")
            ));
        }
        s
    }
}

/// Per-run counters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct RunStats {
    pub macro_rounds: u64,
    pub w: u32,
    pub frames: u64,
    pub messages: u64,
}

impl RunStats {
    pub fn frame_rounds(&self) -> u64 {
        self.macro_rounds * self.w as u64
    }
}

/// What a vertex may do before round 1.
pub struct InitCx<'a> {
    pub v: VertexId,
    pub w: &'a Widths,
    degree: usize,
    wake: Option<u64>,
}

impl InitCx<'_> {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn wake_at(&mut self, round: u64) {
        assert!(round >= 1, "wake-ups start at round 1");
        self.wake = Some(self.wake.map_or(round, |r| r.min(round)));
    }
}

/// Handler view of one vertex in one round.
pub struct Ctx<'a, M> {
    pub v: VertexId,
    pub round: u64,
    pub w: &'a Widths,
    entries: &'a [AdjEntry],
    mask_rec: Option<&'a [bool]>,
    inbox: &'a mut [Option<M>],
    fresh: &'a [Port],
    out: &'a mut Vec<(VertexId, Port, M)>,
    sent_round: &'a mut [u64],
    wake: Option<u64>,
    ledger: &'a mut MemoryLedger,
    double_send: bool,
    trace: Option<&'a mut Vec<TraceEvent>>,
}

impl<M> Ctx<'_, M> {
    pub fn degree(&self) -> usize {
        self.entries.len()
    }

    pub fn weight(&self, p: Port) -> u64 {
        self.entries[p as usize].w
    }

    /// Whether the run has an input subgraph mask.
    pub fn masked(&self) -> bool {
        self.mask_rec.is_some()
    }

    /// Whether this vertex records the edge behind `p` as a member of the
    /// input subgraph (always false without a mask).
    pub fn records(&self, p: Port) -> bool {
        self.mask_rec.is_some_and(|r| r[p as usize])
    }

    /// Ports whose message arrived at the end of the previous round, ascending.
    pub fn fresh(&self) -> &[Port] {
        self.fresh
    }

    pub fn buffered(&self, p: Port) -> Option<&M> {
        self.inbox[p as usize].as_ref()
    }

    pub fn take(&mut self, p: Port) -> Option<M> {
        self.inbox[p as usize].take()
    }

    pub fn send(&mut self, p: Port, msg: M) {
        let slot = &mut self.sent_round[p as usize];
        if *slot == self.round {
            self.double_send = true;
        }
        *slot = self.round;
        self.out.push((self.v, p, msg));
    }

    pub fn wake_at(&mut self, round: u64) {
        assert!(round > self.round, "wake-ups must lie in the future");
        self.wake = Some(self.wake.map_or(round, |r| r.min(round)));
    }

    pub fn wake_next(&mut self) {
        let r = self.round + 1;
        self.wake_at(r);
    }

    /// Transient named charge; counts toward this round's peak.
    pub fn charge(&mut self, name: &str, bits: u64) -> Result<(), Fault> {
        self.ledger.charge(name, bits).map_err(|e| Fault::Protocol(e.to_string()))
    }

    pub fn release(&mut self, name: &str) -> Result<(), Fault> {
        self.ledger.release(name).map(|_| ()).map_err(|e| Fault::Protocol(e.to_string()))
    }

    /// Record which slot this vertex serves this round (kept only when tracing).
    pub fn note_slot(&mut self, slot: u64) {
        let (v, round) = (self.v, self.round);
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent { run: 0, round, vertex: v, slot });
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub run: u64,
    pub round: u64,
    pub vertex: VertexId,
    pub slot: u64,
}

pub trait Protocol {
    type Msg: Payload;
    type Local: Footprint;

    fn name(&self) -> &'static str;

    /// Upper bound on the width of any message of this run; fixes `W`.
    fn max_message_bits(&self, w: &Widths) -> u64;

    fn init(&self, cx: &mut InitCx<'_>, st: &VertexState) -> Self::Local;

    fn step(&self, cx: &mut Ctx<'_, Self::Msg>, st: &mut VertexState, local: &mut Self::Local) -> Result<(), Fault>;
}

/// The simulated network: graph, persistent vertex state, ledgers, metrics.
pub struct Network<'g> {
    g: &'g WeightedGraph,
    mask_rec: Option<Vec<bool>>,
    pub widths: Widths,
    pub config: EngineConfig,
    pub states: Vec<VertexState>,
    pub ledgers: Vec<MemoryLedger>,
    pub metrics: MetricsCounters,
    pub trace: Vec<TraceEvent>,
    /// Named charges still live when a run ended.
    pub leaks: Vec<(VertexId, String)>,
    pub last_run: Option<RunStats>,
}

impl<'g> Network<'g> {
    pub fn new(g: &'g WeightedGraph, mask: Option<&SubgraphMask>, config: EngineConfig) -> Self {
        let widths = Widths::new(g, &config);
        let mask_rec = mask.map(|m| {
            let mut rec = vec![false; g.total_ports()];
            for v in 0..g.n() as VertexId {
                for p in 0..g.degree(v) as Port {
                    rec[g.port_offset(v) + p as usize] = m.records(g, v, p);
                }
            }
            rec
        });
        let mut metrics = MetricsCounters::new(g.n());
        metrics.phases.push(PhaseRow {
            phase: "init".into(),
            rounds: 0,
            frames: 0,
            logical_messages: 0,
            peak_bits_global: 0,
            peak_bits_histogram: BTreeMap::new(),
        });
        Network {
            g,
            mask_rec,
            widths,
            config,
            states: (0..g.n()).map(|_| VertexState::default()).collect(),
            ledgers: (0..g.n()).map(|_| MemoryLedger::new(widths.budget)).collect(),
            metrics,
            trace: Vec::new(),
            leaks: Vec::new(),
            last_run: None,
        }
    }

    pub fn graph(&self) -> &'g WeightedGraph {
        self.g
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    /// Start a new metrics row; later runs are attributed to `name`.
    pub fn begin_phase(&mut self, name: &str) {
        self.metrics.close_phase();
        if self.metrics.phases.len() == 1 && self.metrics.phases[0].phase == "init" && self.metrics.runs == 0 {
            self.metrics.phases[0].phase = name.to_string();
            return;
        }
        self.metrics.phases.push(PhaseRow {
            phase: name.to_string(),
            rounds: 0,
            frames: 0,
            logical_messages: 0,
            peak_bits_global: 0,
            peak_bits_histogram: BTreeMap::new(),
        });
    }

    pub fn record_cycle(&mut self, rec: CycleRecord) {
        if !rec.within_bound() {
            self.metrics.bound_violations += 1;
        }
        self.metrics.cycles.push(rec);
    }

    /// Memory a vertex holds between runs (its persistent state).
    pub fn resident_bits(&self, v: VertexId) -> u64 {
        self.states[v as usize].bits(&self.widths)
    }

    /// Run `proto` to quiescence. Returns the final locals and run counters.
    pub fn run<P: Protocol>(&mut self, proto: &P) -> Result<(Vec<P::Local>, RunStats), Error> {
        let n = self.g.n();
        let widths = self.widths;
        let w_frames = frames_for(proto.max_message_bits(&widths), widths.word) as u32;
        let capacity = w_frames as u64 * widths.word as u64;
        let mut locals = Vec::with_capacity(n);
        let mut wake = vec![u64::MAX; n];
        let mut heap = BinaryHeap::new();
        for v in 0..n {
            let mut icx = InitCx { v: v as VertexId, w: &widths, degree: self.g.degree(v as VertexId), wake: None };
            let local = proto.init(&mut icx, &self.states[v]);
            if let Some(r) = icx.wake {
                wake[v] = r;
                heap.push(Reverse((r, v as VertexId)));
            }
            let bits = self.states[v].bits(&widths) + local.bits(&widths);
            self.account(v as VertexId, 0, bits)?;
            locals.push(local);
        }
        let mut inbox: Vec<Option<P::Msg>> = (0..self.g.total_ports()).map(|_| None).collect();
        let mut sent_round = vec![0u64; self.g.total_ports()];
        let mut fresh: Vec<(VertexId, Port)> = Vec::new();
        let mut next_fresh: Vec<(VertexId, Port)> = Vec::new();
        let mut out: Vec<(VertexId, Port, P::Msg)> = Vec::new();
        let mut active: Vec<VertexId> = Vec::new();
        let mut stats = RunStats { w: w_frames, ..Default::default() };
        let mut round = 1u64;
        let mut trace_buf = Vec::new();
        let run_id = self.metrics.runs;
        loop {
            if fresh.is_empty() {
                match heap.peek() {
                    None => break,
                    Some(Reverse((r, _))) => round = round.max(*r),
                }
            }
            if round > self.config.round_cap {
                return Err(Error::RoundCap { protocol: proto.name().into(), cap: self.config.round_cap });
            }
            active.clear();
            active.extend(fresh.iter().map(|&(v, _)| v));
            while let Some(&Reverse((r, v))) = heap.peek() {
                if r > round {
                    break;
                }
                heap.pop();
                if wake[v as usize] == r {
                    wake[v as usize] = u64::MAX;
                    active.push(v);
                }
            }
            active.sort_unstable();
            active.dedup();
            fresh.sort_unstable();
            let mut fi = 0;
            for &v in &active {
                let start = fi;
                while fi < fresh.len() && fresh[fi].0 == v {
                    fi += 1;
                }
                let fresh_ports: Vec<Port> = fresh[start..fi].iter().map(|&(_, p)| p).collect();
                let off = self.g.port_offset(v);
                let deg = self.g.degree(v);
                let mut cx = Ctx {
                    v,
                    round,
                    w: &widths,
                    entries: self.g.ports(v),
                    mask_rec: self.mask_rec.as_ref().map(|r| &r[off..off + deg]),
                    inbox: &mut inbox[off..off + deg],
                    fresh: &fresh_ports,
                    out: &mut out,
                    sent_round: &mut sent_round[off..off + deg],
                    wake: None,
                    ledger: &mut self.ledgers[v as usize],
                    double_send: false,
                    trace: if self.config.trace { Some(&mut trace_buf) } else { None },
                };
                let res = proto.step(&mut cx, &mut self.states[v as usize], &mut locals[v as usize]);
                let new_wake = cx.wake;
                let double = cx.double_send;
                if let Err(f) = res {
                    return Err(match f {
                        Fault::Congestion(detail) => {
                            self.metrics.congestion_violations += 1;
                            Error::Congestion { vertex: v, round, detail }
                        }
                        Fault::Protocol(msg) => Error::Protocol { protocol: proto.name().into(), vertex: v, msg },
                    });
                }
                if double {
                    return Err(Error::Protocol {
                        protocol: proto.name().into(),
                        vertex: v,
                        msg: format!("two messages on one port in round {round}"),
                    });
                }
                if let Some(r) = new_wake {
                    if r < wake[v as usize] {
                        wake[v as usize] = r;
                        heap.push(Reverse((r, v)));
                    }
                }
                let bits = self.states[v as usize].bits(&widths) + locals[v as usize].bits(&widths);
                self.account(v, round, bits)?;
            }
            if !out.is_empty() {
                stats.macro_rounds = round;
            }
            for (v, p, msg) in out.drain(..) {
                let bits = msg.wire_bits(&widths);
                if bits > capacity {
                    return Err(Error::Capacity { bits, capacity });
                }
                stats.frames += frames_for(bits, widths.word);
                stats.messages += 1;
                let a = self.g.port(v, p);
                inbox[self.g.port_offset(a.nbr) + a.rev as usize] = Some(msg);
                next_fresh.push((a.nbr, a.rev));
            }
            std::mem::swap(&mut fresh, &mut next_fresh);
            next_fresh.clear();
            round += 1;
        }
        for (v, ledger) in self.ledgers.iter_mut().enumerate() {
            for (name, _) in ledger.live_slots().filter(|(s, _)| !s.starts_with('@')) {
                self.leaks.push((v as VertexId, name.to_string()));
            }
            ledger.slots.retain(|(s, _)| s.starts_with('@'));
        }
        for mut e in trace_buf {
            e.run = run_id;
            self.trace.push(e);
        }
        self.last_run = Some(stats);
        self.metrics.runs += 1;
        self.metrics.macro_rounds += stats.macro_rounds;
        self.metrics.rounds_elapsed += stats.frame_rounds();
        self.metrics.frames_sent += stats.frames;
        self.metrics.logical_messages_sent += stats.messages;
        if let Some(row) = self.metrics.phases.last_mut() {
            row.rounds += stats.frame_rounds();
            row.frames += stats.frames;
            row.logical_messages += stats.messages;
        }
        Ok((locals, stats))
    }

    fn account(&mut self, v: VertexId, round: u64, bits: u64) -> Result<(), Error> {
        let ledger = &mut self.ledgers[v as usize];
        ledger.set("@resident", bits);
        let peak = ledger.peak_bits;
        self.metrics.observe_peak(v, peak);
        ledger.end_round(v, round)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_graph, Family};

    struct Bit;
    impl Payload for Bit {
        fn wire_bits(&self, _: &Widths) -> u64 {
            1
        }
    }

    /// Flood one bit from vertex 0.
    struct Flood;
    impl Protocol for Flood {
        type Msg = Bit;
        type Local = bool;
        fn name(&self) -> &'static str {
            "flood"
        }
        fn max_message_bits(&self, _: &Widths) -> u64 {
            1
        }
        fn init(&self, cx: &mut InitCx<'_>, _: &VertexState) -> bool {
            if cx.v == 0 {
                cx.wake_at(1);
            }
            false
        }
        fn step(&self, cx: &mut Ctx<'_, Bit>, _: &mut VertexState, seen: &mut bool) -> Result<(), Fault> {
            if *seen {
                return Ok(());
            }
            *seen = true;
            let from: Vec<Port> = cx.fresh().to_vec();
            for p in 0..cx.degree() as Port {
                if !from.contains(&p) {
                    cx.send(p, Bit);
                }
            }
            Ok(())
        }
    }

    #[test]
    fn flood_on_path() {
        let g = generate_graph(Family::Path, 5, 0).unwrap();
        let mut net = Network::new(&g, None, EngineConfig::default());
        let (seen, stats) = net.run(&Flood).unwrap();
        assert!(seen.iter().all(|&s| s));
        assert_eq!(stats.macro_rounds, 4);
        assert_eq!(stats.frames, 4);
    }

    #[test]
    fn deterministic_metrics() {
        let g = generate_graph(Family::RandomConnected, 40, 3).unwrap();
        let once = || {
            let mut net = Network::new(&g, None, EngineConfig::default());
            net.run(&Flood).unwrap();
            net.metrics.clone()
        };
        assert_eq!(once(), once());
    }

    struct Hog(u64);
    #[derive(Debug)]
    struct Blob(u64);
    impl Footprint for Blob {
        fn bits(&self, _: &Widths) -> u64 {
            self.0
        }
    }
    impl Protocol for Hog {
        type Msg = Bit;
        type Local = Blob;
        fn name(&self) -> &'static str {
            "hog"
        }
        fn max_message_bits(&self, _: &Widths) -> u64 {
            1
        }
        fn init(&self, cx: &mut InitCx<'_>, _: &VertexState) -> Blob {
            if cx.v == 2 {
                cx.wake_at(1);
            }
            Blob(0)
        }
        fn step(&self, _: &mut Ctx<'_, Bit>, _: &mut VertexState, b: &mut Blob) -> Result<(), Fault> {
            b.0 = self.0;
            Ok(())
        }
    }

    #[test]
    fn memory_fault_names_vertex() {
        let g = generate_graph(Family::Path, 5, 0).unwrap();
        let mut net = Network::new(&g, None, EngineConfig::default());
        let budget = net.widths.budget - net.resident_bits(2);
        match net.run(&Hog(budget + 1)) {
            Err(Error::Memory { vertex, round, .. }) => assert_eq!((vertex, round), (2, 1)),
            other => panic!("{other:?}"),
        }
        let mut net = Network::new(&g, None, EngineConfig::default());
        assert!(net.run(&Hog(budget)).is_ok());
    }

    /// Reads ten pinned messages one at a time into a 32-bit accumulator.
    struct Stream;
    impl Protocol for Stream {
        type Msg = Bit;
        type Local = Blob;
        fn name(&self) -> &'static str {
            "stream"
        }
        fn max_message_bits(&self, _: &Widths) -> u64 {
            1
        }
        fn init(&self, cx: &mut InitCx<'_>, _: &VertexState) -> Blob {
            cx.wake_at(1);
            Blob(0)
        }
        fn step(&self, cx: &mut Ctx<'_, Bit>, _: &mut VertexState, acc: &mut Blob) -> Result<(), Fault> {
            if cx.v != 0 {
                if cx.round == 1 {
                    cx.send(0, Bit);
                }
                return Ok(());
            }
            for p in cx.fresh().to_vec() {
                cx.take(p);
                acc.0 = 32;
            }
            Ok(())
        }
    }

    #[test]
    fn streaming_reads_are_not_charged() {
        let g = generate_graph(Family::Star, 11, 0).unwrap();
        let mut net = Network::new(&g, None, EngineConfig::default());
        let resident = net.resident_bits(0);
        net.run(&Stream).unwrap();
        assert_eq!(net.ledgers[0].peak_bits, resident + 32);
    }

    #[test]
    fn ledger_charge_release() {
        let mut l = MemoryLedger::new(100);
        l.charge("a", 64).unwrap();
        l.release("a").unwrap();
        assert_eq!((l.peak_bits, l.total()), (64, 0));
        assert!(l.end_round(0, 1).is_ok());
        l.charge("a", 64).unwrap();
        l.charge("b", 64).unwrap();
        assert!(matches!(l.end_round(0, 1), Err(Error::Memory { .. })));
        assert!(l.release("zzz").is_err());
        assert!(l.charge("a", 1).is_err());
    }

    #[test]
    fn transmit_chunks() {
        let one = BitString::zeros(10);
        assert_eq!(transmit(&one, 0, 1, 24, 1).unwrap().len(), 1);
        let label = BitString::zeros(72);
        let frames = transmit(&label, 0, 2, 24, 4).unwrap();
        assert_eq!(frames.len(), 3);
        assert!(frames.iter().all(|f| f.round > 4 && f.round <= 8));
        assert_eq!(reassemble(&frames), label);
        let big = BitString::zeros(5 * 24);
        assert!(matches!(transmit(&big, 0, 1, 24, 4), Err(Error::Capacity { .. })));
    }

    #[test]
    fn transmit_roundtrip_values() {
        let s = BitString::from_u64(0xdead_beef, 32);
        let frames = transmit(&s, 3, 1, 7, 5).unwrap();
        assert_eq!(frames.len(), 5);
        assert_eq!(reassemble(&frames), s);
    }
}
