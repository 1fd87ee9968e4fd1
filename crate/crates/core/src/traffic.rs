//! Packet queues driven by reaction networks.
//!
//! Each enqueued packet injects `⌈bits/quantum⌉` molecules into the bound
//! input species. The bound output species is a credit pool: whenever it
//! holds at least the head packet's cost, that packet departs and the cost is
//! drained from the engine. An optional drop species removes packets from the
//! head the same way.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::{
    CarryOver, EngineError, FiredEvent, InjectionEvent, ReactionEngine, ReconfigOutcome, ScheduledPatch,
    TraceRecord, TraceSink,
};
use crate::network::{ReactionDef, ReactionNetwork, SpeciesId};
use crate::patch::{self, ReconfigPatch};
use crate::rng::SimRng;

pub const DEFAULT_QUANTUM_BITS: u64 = 1000;
pub const DEFAULT_MAX_PACKET_BYTES: u32 = 1500;

/// Molecules standing for a packet of `bytes`.
pub fn molecule_cost(bytes: u32, quantum_bits: u64) -> u64 {
    (bytes as u64 * 8).div_ceil(quantum_bits)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Packet {
    pub bytes: u32,
    pub arrival: f64,
    /// Index of the queue the packet first entered.
    pub flow: u16,
    /// Molecule cost under the binding of the queue currently holding it.
    pub cost: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueueCounters {
    pub arrived: u64,
    pub arrived_bytes: u64,
    pub departed: u64,
    pub departed_bytes: u64,
    pub head_dropped: u64,
    pub head_dropped_bytes: u64,
    pub tail_dropped: u64,
    pub tail_dropped_bytes: u64,
    pub injected_molecules: u64,
    pub consumed_credit: u64,
    pub consumed_drop_credit: u64,
    pub discarded_credit: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PacketQueue {
    pub name: String,
    pub capacity_bytes: Option<u64>,
    fifo: VecDeque<Packet>,
    bytes: u64,
    pub counters: QueueCounters,
}

impl PacketQueue {
    pub fn new(name: &str, capacity_bytes: Option<u64>) -> Self {
        PacketQueue { name: name.to_string(), capacity_bytes, fifo: VecDeque::new(), bytes: 0, counters: QueueCounters::default() }
    }

    /// Appends `p`, or counts a tail drop and returns false when it would
    /// overflow the capacity.
    pub fn push(&mut self, p: Packet) -> bool {
        self.counters.arrived += 1;
        self.counters.arrived_bytes += p.bytes as u64;
        if let Some(cap) = self.capacity_bytes {
            if self.bytes + p.bytes as u64 > cap {
                self.counters.tail_dropped += 1;
                self.counters.tail_dropped_bytes += p.bytes as u64;
                return false;
            }
        }
        self.bytes += p.bytes as u64;
        self.fifo.push_back(p);
        true
    }

    pub fn head(&self) -> Option<&Packet> {
        self.fifo.front()
    }

    fn pop(&mut self) -> Option<Packet> {
        let p = self.fifo.pop_front()?;
        self.bytes -= p.bytes as u64;
        Some(p)
    }

    pub fn depart(&mut self) -> Option<Packet> {
        let p = self.pop()?;
        self.counters.departed += 1;
        self.counters.departed_bytes += p.bytes as u64;
        Some(p)
    }

    pub fn drop_head(&mut self) -> Option<Packet> {
        let p = self.pop()?;
        self.counters.head_dropped += 1;
        self.counters.head_dropped_bytes += p.bytes as u64;
        Some(p)
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.fifo.iter()
    }

    /// arrived = departed + head drops + tail drops + queued.
    pub fn conserved(&self) -> bool {
        let c = &self.counters;
        c.arrived == c.departed + c.head_dropped + c.tail_dropped + self.fifo.len() as u64
            && c.arrived_bytes == c.departed_bytes + c.head_dropped_bytes + c.tail_dropped_bytes + self.bytes
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueueSpec {
    pub name: String,
    pub capacity_bytes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BindingSpec {
    pub queue: String,
    pub input: String,
    pub output: String,
    pub drop: Option<String>,
    pub quantum_bits: u64,
    /// Defaults to ten times the cost of a maximum-size packet.
    pub credit_cap: Option<u64>,
    /// Departing packets are enqueued here instead of leaving the system.
    pub forward_to: Option<String>,
}

impl BindingSpec {
    pub fn new(queue: &str, input: &str, output: &str) -> Self {
        BindingSpec {
            queue: queue.to_string(),
            input: input.to_string(),
            output: output.to_string(),
            drop: None,
            quantum_bits: DEFAULT_QUANTUM_BITS,
            credit_cap: None,
            forward_to: None,
        }
    }

    pub fn with_drop(mut self, drop: &str) -> Self {
        self.drop = Some(drop.to_string());
        self
    }

    pub fn forwarding_to(mut self, q: &str) -> Self {
        self.forward_to = Some(q.to_string());
        self
    }

    pub fn effective_cap(&self) -> u64 {
        self.credit_cap.unwrap_or(10 * molecule_cost(DEFAULT_MAX_PACKET_BYTES, self.quantum_bits))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SizeDist {
    Fixed(u32),
    /// Uniform over whole bytes in `[lo, hi]`.
    Uniform { lo: u32, hi: u32 },
}

impl SizeDist {
    pub fn mean(&self) -> f64 {
        match *self {
            SizeDist::Fixed(b) => b as f64,
            SizeDist::Uniform { lo, hi } => (lo as f64 + hi as f64) / 2.0,
        }
    }

    fn sample(&self, rng: &mut SimRng) -> u32 {
        match *self {
            SizeDist::Fixed(b) => b,
            SizeDist::Uniform { lo, hi } => rng.range_u64(lo as u64, hi as u64) as u32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalProcess {
    Cbr { rate_bps: f64, size: u32 },
    Poisson { rate_bps: f64, size: SizeDist },
    /// Alternating bursts (constant rate inside) and silences. Durations
    /// are exponential with the given means when `exponential`, fixed
    /// otherwise.
    OnOff { on: f64, off: f64, rate_bps: f64, size: u32, exponential: bool },
    /// Absolute `(time, bytes)` pairs.
    Trace(Vec<(f64, u32)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrivalSpec {
    pub queue: String,
    pub process: ArrivalProcess,
    /// Half-open activity windows; empty means the whole run.
    pub windows: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub network: ReactionNetwork,
    pub queues: Vec<QueueSpec>,
    pub bindings: Vec<BindingSpec>,
    pub arrivals: Vec<ArrivalSpec>,
    pub patches: Vec<ScheduledPatch>,
    pub taps: Vec<String>,
    pub duration: f64,
    pub seed: u64,
    /// Length of the sliding measurement window.
    pub window: f64,
    /// Spacing of metric bins and window positions.
    pub hop: f64,
}

impl Scenario {
    pub fn new(name: &str, network: ReactionNetwork, duration: f64) -> Self {
        Scenario {
            name: name.to_string(),
            network,
            queues: Vec::new(),
            bindings: Vec::new(),
            arrivals: Vec::new(),
            patches: Vec::new(),
            taps: Vec::new(),
            duration,
            seed: 0,
            window: 0.1,
            hop: 0.1,
        }
    }

    pub fn bins(&self) -> usize {
        libm::ceil(self.duration / self.hop - 1e-9).max(1.0) as usize
    }

    fn queue_index(&self, name: &str) -> Option<usize> {
        self.queues.iter().position(|q| q.name == name)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidScenario(m));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration must be positive".into());
        }
        if !(self.hop.is_finite() && self.hop > 0.0 && self.window >= self.hop) {
            return bad("need 0 < hop <= window".into());
        }
        for (i, q) in self.queues.iter().enumerate() {
            if self.queues[..i].iter().any(|p| p.name == q.name) {
                return bad(format!("duplicate queue `{}`", q.name));
            }
        }
        let mut bound = vec![false; self.queues.len()];
        for b in &self.bindings {
            let Some(qi) = self.queue_index(&b.queue) else {
                return bad(format!("binding names unknown queue `{}`", b.queue));
            };
            if core::mem::replace(&mut bound[qi], true) {
                return bad(format!("queue `{}` is bound twice", b.queue));
            }
            for s in [Some(&b.input), Some(&b.output), b.drop.as_ref()].into_iter().flatten() {
                if self.network.species_id(s).is_none() {
                    return bad(format!("binding of `{}` names unknown species `{s}`", b.queue));
                }
            }
            if b.quantum_bits == 0 {
                return bad("molecule quantum must be positive".into());
            }
            if let Some(f) = &b.forward_to {
                if self.queue_index(f).is_none() || *f == b.queue {
                    return bad(format!("queue `{}` forwards to invalid queue `{f}`", b.queue));
                }
            }
        }
        for a in &self.arrivals {
            if self.queue_index(&a.queue).is_none() {
                return bad(format!("arrival names unknown queue `{}`", a.queue));
            }
            if a.windows.iter().any(|&(x, y)| !(x.is_finite() && y.is_finite() && x >= 0.0 && y >= x)) {
                return bad(format!("arrival window on `{}` is invalid", a.queue));
            }
            let rate_ok = |r: f64| r.is_finite() && r > 0.0;
            let ok = match &a.process {
                ArrivalProcess::Cbr { rate_bps, size } => rate_ok(*rate_bps) && *size > 0,
                ArrivalProcess::Poisson { rate_bps, size } => {
                    rate_ok(*rate_bps)
                        && size.mean() > 0.0
                        && !matches!(size, SizeDist::Uniform { lo, hi } if lo > hi)
                }
                ArrivalProcess::OnOff { on, off, rate_bps, size, .. } => {
                    rate_ok(*rate_bps) && *on > 0.0 && *off >= 0.0 && *size > 0
                }
                ArrivalProcess::Trace(v) => v.windows(2).all(|w| w[1].0 >= w[0].0),
            };
            if !ok {
                return bad(format!("arrival process on `{}` has invalid parameters", a.queue));
            }
        }
        for p in &self.patches {
            if !(p.time >= 0.0 && p.time <= self.duration) {
                return bad(format!("patch at t={} lies outside [0, {}]", p.time, self.duration));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    InvalidScenario(String),
    Engine(EngineError),
    /// A reconfiguration removed a species a binding relies on.
    UnboundSpecies { queue: String, species: String },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidScenario(m) => write!(f, "invalid scenario: {m}"),
            SimError::Engine(e) => write!(f, "engine error: {e}"),
            SimError::UnboundSpecies { queue, species } => {
                write!(f, "queue `{queue}` lost species `{species}` after reconfiguration")
            }
        }
    }
}

impl core::error::Error for SimError {}

impl From<EngineError> for SimError {
    fn from(e: EngineError) -> Self {
        SimError::Engine(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub queue: usize,
    pub bytes: u32,
}

fn windows_or_all(a: &ArrivalSpec, duration: f64) -> Vec<(f64, f64)> {
    if a.windows.is_empty() {
        vec![(0.0, duration)]
    } else {
        a.windows.iter().map(|&(x, y)| (x, y.min(duration))).filter(|w| w.1 > w.0).collect()
    }
}

/// All arrivals of the scenario, ordered by time then by arrival spec.
/// Spec `i` draws from stream `1 + i` of the scenario seed.
pub fn generate_arrivals(sc: &Scenario) -> Vec<Arrival> {
    let mut out = Vec::new();
    for (i, a) in sc.arrivals.iter().enumerate() {
        let queue = sc.queue_index(&a.queue).expect("validated");
        let mut rng = SimRng::new(sc.seed, 1 + i as u64);
        let mut push = |time: f64, bytes: u32| out.push(Arrival { time, queue, bytes });
        for (w0, w1) in windows_or_all(a, sc.duration) {
            match &a.process {
                ArrivalProcess::Cbr { rate_bps, size } => {
                    let gap = *size as f64 * 8.0 / rate_bps;
                    let mut n = 0u64;
                    loop {
                        let t = w0 + n as f64 * gap;
                        if t >= w1 {
                            break;
                        }
                        push(t, *size);
                        n += 1;
                    }
                }
                ArrivalProcess::Poisson { rate_bps, size } => {
                    let mean_gap = size.mean() * 8.0 / rate_bps;
                    let mut t = w0 + rng.exp_mean(mean_gap);
                    while t < w1 {
                        push(t, size.sample(&mut rng));
                        t += rng.exp_mean(mean_gap);
                    }
                }
                ArrivalProcess::OnOff { on, off, rate_bps, size, exponential } => {
                    let gap = *size as f64 * 8.0 / rate_bps;
                    let mut s = w0;
                    while s < w1 {
                        let (d_on, d_off) =
                            if *exponential { (rng.exp_mean(*on), rng.exp_mean(*off)) } else { (*on, *off) };
                        let end = (s + d_on).min(w1);
                        let mut n = 0u64;
                        loop {
                            let t = s + n as f64 * gap;
                            if t >= end {
                                break;
                            }
                            push(t, *size);
                            n += 1;
                        }
                        s += d_on + d_off;
                    }
                }
                ArrivalProcess::Trace(v) => {
                    for &(t, b) in v {
                        if t >= w0 && t < w1 {
                            push(t, b);
                        }
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    out
}

/// Per-queue counters for one metric bin.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bin {
    pub offered_bits: u64,
    pub tx_bits: u64,
    pub head_drop_bits: u64,
    pub tail_drop_bits: u64,
    /// Departed bits by originating queue.
    pub tx_bits_by_flow: Vec<u64>,
    /// Snapshot at the end of the bin.
    pub occupancy_bytes: u64,
    pub occupancy_packets: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Offered,
    Tx,
    HeadDrop,
    TailDrop,
}

impl Bin {
    pub fn bits(&self, m: Metric) -> u64 {
        match m {
            Metric::Offered => self.offered_bits,
            Metric::Tx => self.tx_bits,
            Metric::HeadDrop => self.head_drop_bits,
            Metric::TailDrop => self.tail_drop_bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueueReport {
    pub name: String,
    pub bins: Vec<Bin>,
    pub totals: QueueCounters,
}

/// One position of the sliding window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSample {
    /// Window end.
    pub t: f64,
    pub offered_bps: f64,
    pub tx_bps: f64,
    pub head_drop_bps: f64,
    pub tail_drop_bps: f64,
    pub occupancy_bytes: u64,
    pub occupancy_packets: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: u64,
    pub duration: f64,
    pub window: f64,
    pub hop: f64,
    /// Flow `i` is traffic that first entered queue `i`.
    pub flows: Vec<String>,
    pub queues: Vec<QueueReport>,
    pub taps: Vec<String>,
    /// Tap values at every bin end.
    pub tap_samples: Vec<(f64, Vec<Option<u64>>)>,
    pub reconfigs: Vec<ReconfigOutcome>,
    pub firings: u64,
    pub injections: u64,
    /// Bin ends at which some queue failed the packet balance.
    pub conservation_violations: u64,
}

impl MetricsReport {
    pub fn queue(&self, name: &str) -> Option<&QueueReport> {
        self.queues.iter().find(|q| q.name == name)
    }

    pub fn bin_end(&self, i: usize) -> f64 {
        ((i + 1) as f64 * self.hop).min(self.duration)
    }

    fn bin_range(&self, t0: f64, t1: f64) -> core::ops::Range<usize> {
        let eps = 1e-9 * self.hop;
        let n = self.queues.first().map_or(0, |q| q.bins.len());
        let lo = libm::ceil(t0 / self.hop - eps).max(0.0) as usize;
        let hi = (libm::floor(t1 / self.hop + eps).max(0.0) as usize).min(n);
        lo..hi.max(lo)
    }

    /// Mean rate in bits/s over the bins fully inside `[t0, t1]`.
    pub fn rate(&self, queue: &str, m: Metric, t0: f64, t1: f64) -> f64 {
        let Some(q) = self.queue(queue) else { return 0.0 };
        let r = self.bin_range(t0, t1);
        if r.is_empty() {
            return 0.0;
        }
        let bits: u64 = q.bins[r.clone()].iter().map(|b| b.bits(m)).sum();
        bits as f64 / (r.len() as f64 * self.hop)
    }

    /// Departure rate of one flow at `queue` over `[t0, t1]`.
    pub fn flow_rate(&self, queue: &str, flow: usize, t0: f64, t1: f64) -> f64 {
        let Some(q) = self.queue(queue) else { return 0.0 };
        let r = self.bin_range(t0, t1);
        if r.is_empty() {
            return 0.0;
        }
        let bits: u64 = q.bins[r.clone()].iter().map(|b| b.tx_bits_by_flow.get(flow).copied().unwrap_or(0)).sum();
        bits as f64 / (r.len() as f64 * self.hop)
    }

    /// Sliding-window series, one sample per bin end once a full window has
    /// elapsed.
    pub fn series(&self, queue: &str) -> Vec<WindowSample> {
        let Some(q) = self.queue(queue) else { return Vec::new() };
        let w = (libm::round(self.window / self.hop) as usize).max(1);
        let span = w as f64 * self.hop;
        let mut out = Vec::new();
        let mut acc = [0u64; 4];
        let ms = [Metric::Offered, Metric::Tx, Metric::HeadDrop, Metric::TailDrop];
        for (i, b) in q.bins.iter().enumerate() {
            for (a, m) in acc.iter_mut().zip(ms) {
                *a += b.bits(m);
            }
            if i >= w {
                for (a, m) in acc.iter_mut().zip(ms) {
                    *a -= q.bins[i - w].bits(m);
                }
            }
            if i + 1 >= w {
                out.push(WindowSample {
                    t: self.bin_end(i),
                    offered_bps: acc[0] as f64 / span,
                    tx_bps: acc[1] as f64 / span,
                    head_drop_bps: acc[2] as f64 / span,
                    tail_drop_bps: acc[3] as f64 / span,
                    occupancy_bytes: b.occupancy_bytes,
                    occupancy_packets: b.occupancy_packets,
                });
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub record_firings: bool,
    pub record_injections: bool,
}

struct Binding {
    spec: BindingSpec,
    queue: usize,
    input: SpeciesId,
    output: SpeciesId,
    drop: Option<SpeciesId>,
    forward: Option<usize>,
    cap: u64,
}

struct Harness {
    queues: Vec<PacketQueue>,
    bindings: Vec<Binding>,
    /// queue → binding
    bound: Vec<Option<usize>>,
    /// species index → bindings watching it as output or drop
    watchers: Vec<Vec<usize>>,
    bins: Vec<Vec<Bin>>,
    hop: f64,
    injections: u64,
    opts: RunOptions,
}

impl Harness {
    fn bin(&self, t: f64) -> usize {
        let n = self.bins[0].len();
        ((t / self.hop) as usize).min(n - 1)
    }

    fn resolve(&mut self, net: &ReactionNetwork) -> Result<(), SimError> {
        let look = |q: &str, s: &str| {
            net.species_id(s).ok_or_else(|| SimError::UnboundSpecies { queue: q.to_string(), species: s.to_string() })
        };
        self.watchers = vec![Vec::new(); net.species_count()];
        for (bi, b) in self.bindings.iter_mut().enumerate() {
            b.input = look(&b.spec.queue, &b.spec.input)?;
            b.output = look(&b.spec.queue, &b.spec.output)?;
            b.drop = match &b.spec.drop {
                Some(d) => Some(look(&b.spec.queue, d)?),
                None => None,
            };
            self.watchers[b.output.index()].push(bi);
            if let Some(d) = b.drop {
                self.watchers[d.index()].push(bi);
            }
        }
        Ok(())
    }

    fn enqueue<E: ReactionEngine, S: TraceSink>(
        &mut self,
        engine: &mut E,
        sink: &mut S,
        qi: usize,
        bytes: u32,
        flow: u16,
    ) -> Result<(), SimError> {
        let t = engine.clock();
        let bin = self.bin(t);
        self.bins[qi][bin].offered_bits += bytes as u64 * 8;
        let binding = self.bound[qi];
        let cost = binding.map_or(0, |b| molecule_cost(bytes, self.bindings[b].spec.quantum_bits));
        if !self.queues[qi].push(Packet { bytes, arrival: t, flow, cost }) {
            self.bins[qi][bin].tail_drop_bits += bytes as u64 * 8;
            return Ok(());
        }
        if let Some(b) = binding {
            if cost > 0 {
                let species = self.bindings[b].input;
                engine.adjust(species, cost as i64)?;
                self.injections += 1;
                self.queues[qi].counters.injected_molecules += cost;
                if self.opts.record_injections {
                    let ev = InjectionEvent { time: t, species, amount: cost as i64 };
                    sink.record(&TraceRecord::Injected(ev), engine.network());
                }
            }
            self.settle(engine, sink, b)?;
        }
        Ok(())
    }

    /// Spends available output and drop credit on head packets.
    fn settle<E: ReactionEngine, S: TraceSink>(
        &mut self,
        engine: &mut E,
        sink: &mut S,
        bi: usize,
    ) -> Result<(), SimError> {
        let (qi, out, drop, forward, cap) = {
            let b = &self.bindings[bi];
            (b.queue, b.output, b.drop, b.forward, b.cap)
        };
        let t = engine.clock();
        let bin = self.bin(t);
        let mut forwarded: Vec<(u32, u16)> = Vec::new();
        let credit = engine.concentration(out);
        let mut used = 0u64;
        while let Some(h) = self.queues[qi].head() {
            if credit - used < h.cost {
                break;
            }
            let p = self.queues[qi].depart().expect("head exists");
            used += p.cost;
            let b = &mut self.bins[qi][bin];
            b.tx_bits += p.bytes as u64 * 8;
            if b.tx_bits_by_flow.len() <= p.flow as usize {
                b.tx_bits_by_flow.resize(p.flow as usize + 1, 0);
            }
            b.tx_bits_by_flow[p.flow as usize] += p.bytes as u64 * 8;
            if forward.is_some() {
                forwarded.push((p.bytes, p.flow));
            }
        }
        let mut drain = used;
        self.queues[qi].counters.consumed_credit += used;
        if self.queues[qi].is_empty() && credit - used > cap {
            let extra = credit - used - cap;
            drain += extra;
            self.queues[qi].counters.discarded_credit += extra;
        }
        if drain > 0 {
            engine.adjust(out, -(drain as i64))?;
        }
        if let Some(d) = drop {
            let credit = engine.concentration(d);
            let mut used = 0u64;
            while let Some(h) = self.queues[qi].head() {
                if credit - used < h.cost {
                    break;
                }
                let p = self.queues[qi].drop_head().expect("head exists");
                used += p.cost;
                self.bins[qi][bin].head_drop_bits += p.bytes as u64 * 8;
            }
            let mut drain = used;
            self.queues[qi].counters.consumed_drop_credit += used;
            if self.queues[qi].is_empty() && credit - used > cap {
                let extra = credit - used - cap;
                drain += extra;
                self.queues[qi].counters.discarded_credit += extra;
            }
            if drain > 0 {
                engine.adjust(d, -(drain as i64))?;
            }
        }
        if let Some(fq) = forward {
            for (bytes, flow) in forwarded {
                self.enqueue(engine, sink, fq, bytes, flow)?;
            }
        }
        Ok(())
    }

    fn on_fire<E: ReactionEngine, S: TraceSink>(
        &mut self,
        engine: &mut E,
        sink: &mut S,
        f: &FiredEvent,
    ) -> Result<(), SimError> {
        let mut hit: Vec<usize> = Vec::new();
        for d in f.delta.iter() {
            for &b in &self.watchers[d.species.index()] {
                if !hit.contains(&b) {
                    hit.push(b);
                }
            }
        }
        for b in hit {
            self.settle(engine, sink, b)?;
        }
        Ok(())
    }
}

/// Runs `sc` on the reference engine.
pub fn run_scenario(sc: &Scenario) -> Result<MetricsReport, SimError> {
    let mut engine = crate::ssa::Engine::new(sc.network.clone(), sc.seed);
    run_scenario_with(&mut engine, sc, &mut crate::engine::NullSink, RunOptions::default())
}

/// Runs `sc` on a caller-supplied engine holding `sc.network`. At equal
/// times firings come first, then bin ends, patches and arrivals.
pub fn run_scenario_with<E: ReactionEngine, S: TraceSink>(
    engine: &mut E,
    sc: &Scenario,
    sink: &mut S,
    opts: RunOptions,
) -> Result<MetricsReport, SimError> {
    sc.validate()?;
    let nbins = sc.bins();
    let nq = sc.queues.len();
    let mut h = Harness {
        queues: sc.queues.iter().map(|q| PacketQueue::new(&q.name, q.capacity_bytes)).collect(),
        bindings: Vec::new(),
        bound: vec![None; nq],
        watchers: Vec::new(),
        bins: vec![vec![Bin { tx_bits_by_flow: vec![0; nq], ..Bin::default() }; nbins]; nq.max(1)],
        hop: sc.hop,
        injections: 0,
        opts,
    };
    for b in &sc.bindings {
        let queue = sc.queue_index(&b.queue).expect("validated");
        h.bound[queue] = Some(h.bindings.len());
        h.bindings.push(Binding {
            queue,
            input: SpeciesId(1),
            output: SpeciesId(1),
            drop: None,
            forward: b.forward_to.as_deref().and_then(|f| sc.queue_index(f)),
            cap: b.effective_cap(),
            spec: b.clone(),
        });
    }
    h.resolve(engine.network())?;
    let arrivals = generate_arrivals(sc);
    let mut patches = sc.patches.clone();
    patches.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut reconfigs = Vec::new();
    let mut tap_samples = Vec::new();
    let (mut ai, mut pi, mut bi) = (0usize, 0usize, 0usize);
    let mut firings = 0u64;
    let mut violations = 0u64;
    let end = sc.duration;
    loop {
        let t_a = arrivals.get(ai).map_or(f64::INFINITY, |a| if a.time <= end { a.time } else { f64::INFINITY });
        let t_p = patches.get(pi).map_or(f64::INFINITY, |p| p.time);
        let t_b = if bi < nbins { ((bi + 1) as f64 * sc.hop).min(end) } else { f64::INFINITY };
        let next = t_a.min(t_p).min(t_b);
        if next == f64::INFINITY {
            break;
        }
        while let Some(f) = engine.step_until(next) {
            firings += 1;
            if opts.record_firings {
                sink.record(&TraceRecord::Fired(f.clone()), engine.network());
            }
            h.on_fire(engine, sink, &f)?;
        }
        engine.advance_to(next);
        if next == t_b {
            for (qi, q) in h.queues.iter().enumerate() {
                let b = &mut h.bins[qi][bi];
                b.occupancy_bytes = q.bytes();
                b.occupancy_packets = q.len() as u64;
                if !q.conserved() {
                    violations += 1;
                }
            }
            let net = engine.network();
            let values: Vec<Option<u64>> =
                sc.taps.iter().map(|n| net.species_id(n).map(|id| engine.concentration(id))).collect();
            sink.record(&TraceRecord::Sample { time: next, values: values.clone() }, net);
            tap_samples.push((next, values));
            bi += 1;
        } else if next == t_p {
            let sp = &patches[pi];
            let outcome = engine.reconfigure(&sp.patch, sp.policy)?;
            let network = (outcome.kind == patch::PatchKind::Structural)
                .then(|| alloc::boxed::Box::new(engine.network().clone()));
            sink.record(&TraceRecord::Reconfig { outcome: outcome.clone(), network }, engine.network());
            reconfigs.push(outcome);
            h.resolve(engine.network())?;
            for b in 0..h.bindings.len() {
                h.settle(engine, sink, b)?;
            }
            pi += 1;
        } else {
            let a = arrivals[ai];
            h.enqueue(engine, sink, a.queue, a.bytes, a.queue as u16)?;
            ai += 1;
        }
    }
    let queues = h
        .queues
        .iter()
        .zip(h.bins)
        .map(|(q, bins)| QueueReport { name: q.name.clone(), bins, totals: q.counters.clone() })
        .collect();
    Ok(MetricsReport {
        scenario: sc.name.clone(),
        seed: sc.seed,
        duration: sc.duration,
        window: sc.window,
        hop: sc.hop,
        flows: sc.queues.iter().map(|q| q.name.clone()).collect(),
        queues,
        taps: sc.taps.clone(),
        tap_samples,
        reconfigs,
        firings,
        injections: h.injections,
        conservation_violations: violations,
    })
}

/// Enzymatic rate controller: `S + E → ES`, `ES → E + P`.
pub fn rnet1(e0: u64, k1: f64, k2: f64) -> ReactionNetwork {
    ReactionNetwork::builder()
        .species("S", 0)
        .species("E", e0)
        .species("ES", 0)
        .species("P", 0)
        .reaction("r1", &[("S", 1), ("E", 1)], &[("ES", 1)], k1)
        .reaction("r2", &[("ES", 1)], &[("E", 1), ("P", 1)], k2)
        .input("S")
        .output("P")
        .build()
        .expect("valid")
}

/// Pacer: `S → P`.
pub fn rnet2(k0: f64) -> ReactionNetwork {
    ReactionNetwork::builder()
        .species("S", 0)
        .species("P", 0)
        .reaction("r0", &[("S", 1)], &[("P", 1)], k0)
        .input("S")
        .output("P")
        .build()
        .expect("valid")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rnet3Params {
    pub e0: u64,
    pub k1: f64,
    pub k2: f64,
    pub kd: f64,
}

fn rnet3_reactions(sfx: &str, p: &Rnet3Params) -> (Vec<(String, u64)>, Vec<ReactionDef>) {
    let n = |b: &str| format!("{b}{sfx}");
    let species = vec![(n("S"), 0), (n("E"), p.e0), (n("ES"), 0), (n("P"), 0), (n("D"), 0)];
    let (s, e, es, pp, d) = (n("S"), n("E"), n("ES"), n("P"), n("D"));
    let reactions = vec![
        ReactionDef::new(&n("r1"), &[(&s, 1), (&e, 1)], &[(&es, 1)], p.k1),
        ReactionDef::new(&n("r2"), &[(&es, 1)], &[(&e, 1), (&pp, 1)], p.k2),
        ReactionDef::new(&n("r3"), &[(&s, 2)], &[(&s, 1), (&d, 1)], p.kd),
    ];
    (species, reactions)
}

/// Rate controller with head-drop tokens: adds `2S → S + D`.
pub fn rnet3(p: Rnet3Params) -> ReactionNetwork {
    let (species, reactions) = rnet3_reactions("", &p);
    ReactionNetwork::from_parts(species, reactions, vec!["S".into()], vec!["P".into()], vec!["D".into()])
        .expect("valid")
}

/// Class servers sharing a token pool, feeding an AQM egress stage.
///
/// Per class `i` (species `Si`, `Ti`, `TSi`, `Pi`):
///
/// ```text
/// bind_i    Si + Ti -> TSi        k1
/// serve_i   TSi -> Ti + Pi        k2 * w_i
/// release_i Ti -> T               kf
/// evict_i   TSi -> Si + T         ke
/// grant_i   T -> Ti               kg
/// ```
///
/// `T` starts with `tokens`. Under overload every class holds
/// `TSi ≈ kg·T/ke` tokens, so throughput is proportional to `w_i`; an idle
/// class releases its tokens back to `T`. The egress stage is a suffixed
/// Rnet3 (`Sx`, `Ex`, `ESx`, `Px`, `Dx`).
#[derive(Clone, Debug, PartialEq)]
pub struct Rnet4Params {
    pub weights: Vec<f64>,
    pub k1: f64,
    pub k2: f64,
    pub kf: f64,
    pub ke: f64,
    pub kg: f64,
    pub tokens: u64,
    pub egress: Rnet3Params,
}

impl Default for Rnet4Params {
    fn default() -> Self {
        Rnet4Params {
            weights: vec![1.0, 1.0, 1.0],
            k1: 10.0,
            k2: 20.0,
            kf: 100.0,
            ke: 1.0,
            kg: 10.0,
            tokens: 120,
            egress: Rnet3Params { e0: 100, k1: 10.0, k2: 20.0, kd: 0.01 },
        }
    }
}

pub fn rnet4(p: &Rnet4Params) -> ReactionNetwork {
    let mut species: Vec<(String, u64)> = vec![("T".into(), p.tokens)];
    let mut reactions = Vec::new();
    let (mut inputs, mut outputs) = (Vec::new(), Vec::new());
    for (i, w) in p.weights.iter().enumerate() {
        let i = i + 1;
        let (s, t, ts, pp) = (format!("S{i}"), format!("T{i}"), format!("TS{i}"), format!("P{i}"));
        species.extend([(s.clone(), 0), (t.clone(), 0), (ts.clone(), 0), (pp.clone(), 0)]);
        reactions.push(ReactionDef::new(&format!("bind{i}"), &[(&s, 1), (&t, 1)], &[(&ts, 1)], p.k1));
        reactions.push(ReactionDef::new(&format!("serve{i}"), &[(&ts, 1)], &[(&t, 1), (&pp, 1)], p.k2 * w));
        reactions.push(ReactionDef::new(&format!("release{i}"), &[(&t, 1)], &[("T", 1)], p.kf));
        reactions.push(ReactionDef::new(&format!("evict{i}"), &[(&ts, 1)], &[(&s, 1), ("T", 1)], p.ke));
        reactions.push(ReactionDef::new(&format!("grant{i}"), &[("T", 1)], &[(&t, 1)], p.kg));
        inputs.push(s);
        outputs.push(pp);
    }
    let (sx, rx) = rnet3_reactions("x", &p.egress);
    species.extend(sx);
    reactions.extend(rx);
    inputs.push("Sx".into());
    outputs.push("Px".into());
    ReactionNetwork::from_parts(species, reactions, inputs, outputs, vec!["Dx".into()]).expect("valid")
}

fn single_queue(name: &str, net: ReactionNetwork, duration: f64, drop: bool) -> Scenario {
    let mut sc = Scenario::new(name, net, duration);
    sc.queues.push(QueueSpec { name: "q".into(), capacity_bytes: None });
    let b = BindingSpec::new("q", "S", "P");
    sc.bindings.push(if drop { b.with_drop("D") } else { b });
    sc
}

fn window(queue: &str, process: ArrivalProcess, w: (f64, f64)) -> ArrivalSpec {
    ArrivalSpec { queue: queue.to_string(), process, windows: vec![w] }
}

fn poisson(rate_bps: f64) -> ArrivalProcess {
    ArrivalProcess::Poisson { rate_bps, size: SizeDist::Fixed(DEFAULT_MAX_PACKET_BYTES) }
}

/// Pacer until t=5 s, then reprogrammed into the rate controller
/// (e0=25000, k1=1, k2=20) with bursts, an overload phase and bursts again.
pub fn fig7() -> Scenario {
    let mut sc = single_queue("fig7", rnet2(20.0), 27.0, false);
    sc.seed = 7;
    let bursty = |rate_bps, on, off| ArrivalProcess::OnOff { on, off, rate_bps, size: 1500, exponential: true };
    sc.arrivals.push(window("q", bursty(0.4e9, 0.2, 0.2), (0.5, 4.5)));
    sc.arrivals.push(window("q", poisson(0.75e9), (6.5, 14.0)));
    sc.arrivals.push(window("q", bursty(0.4e9, 0.3, 0.2), (19.0, 27.0)));
    let to = rnet1(25000, 1.0, 20.0);
    sc.patches.push(ScheduledPatch {
        time: 5.0,
        patch: patch::diff(&sc.network, &to),
        policy: CarryOver::MatchByName,
    });
    sc.taps = vec!["S".into(), "E".into(), "ES".into(), "P".into()];
    sc
}

/// Rate controller with the given (k2, e0): overload, silence, then bursty
/// traffic below the cap with a periodic component near 6.7 Hz.
pub fn fig8(k2: f64, e0: u64) -> Scenario {
    let mut sc = single_queue(&format!("fig8-k2={k2}"), rnet1(e0, 1.0, k2), 20.0, false);
    sc.seed = 8;
    sc.hop = 0.01;
    sc.arrivals.push(window("q", poisson(0.6e9), (0.0, 8.5)));
    sc.arrivals.push(window("q", poisson(0.15e9), (12.5, 20.0)));
    sc.arrivals.push(window(
        "q",
        ArrivalProcess::OnOff { on: 0.075, off: 0.075, rate_bps: 0.3e9, size: 1500, exponential: false },
        (12.5, 20.0),
    ));
    sc.taps = vec!["S".into(), "ES".into()];
    sc
}

/// AQM: cap 0.4 Gbps, Poisson load of 0.2 then 1 Gbps.
pub fn fig10() -> Scenario {
    let p = Rnet3Params { e0: 20000, k1: 1.0, k2: 20.0, kd: 0.01 };
    let mut sc = single_queue("fig10", rnet3(p), 26.0, true);
    sc.seed = 10;
    sc.arrivals.push(window("q", poisson(0.2e9), (2.0, 13.0)));
    sc.arrivals.push(window("q", poisson(1.0e9), (14.0, 25.0)));
    sc.taps = vec!["S".into(), "D".into()];
    sc
}

/// Three class queues with weights `w`, forwarding into a 2 Mbps AQM egress.
/// Load (0.4, 0.8, 0.4) Mbps for t < 10 s, then (3, 2, 3) Mbps.
pub fn fig12(weights: [f64; 3]) -> Scenario {
    let params = Rnet4Params { weights: weights.to_vec(), ..Rnet4Params::default() };
    let mut sc = Scenario::new("fig12", rnet4(&params), 20.0);
    sc.seed = 12;
    for i in 1..=3 {
        let q = format!("q{i}");
        sc.queues.push(QueueSpec { name: q.clone(), capacity_bytes: Some(1_000_000) });
        sc.bindings.push(BindingSpec::new(&q, &format!("S{i}"), &format!("P{i}")).forwarding_to("qx"));
    }
    sc.queues.push(QueueSpec { name: "qx".into(), capacity_bytes: None });
    sc.bindings.push(BindingSpec::new("qx", "Sx", "Px").with_drop("Dx"));
    let phases = [[0.4e6, 0.8e6, 0.4e6], [3e6, 2e6, 3e6]];
    for (i, (lo, hi)) in phases[0].iter().zip(phases[1]).enumerate() {
        let q = format!("q{}", i + 1);
        sc.arrivals.push(window(&q, ArrivalProcess::Cbr { rate_bps: *lo, size: 500 }, (0.0, 10.0)));
        sc.arrivals.push(window(&q, ArrivalProcess::Cbr { rate_bps: hi, size: 500 }, (10.0, 20.0)));
    }
    sc.taps = vec!["T".into(), "TS1".into(), "TS2".into(), "TS3".into(), "Sx".into()];
    sc
}

pub const BUILTIN_SCENARIOS: &[&str] = &["fig7", "fig8", "fig8-k10", "fig10", "fig12", "fig12-equal"];

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "fig7" => Some(fig7()),
        "fig8" => Some(fig8(20.0, 25000)),
        "fig8-k10" => Some(fig8(10.0, 50000)),
        "fig10" => Some(fig10()),
        "fig12" => Some(fig12([2.0, 1.0, 1.0])),
        "fig12-equal" => Some(fig12([1.0, 1.0, 1.0])),
        _ => None,
    }
}

pub fn builtin_network(name: &str) -> Option<ReactionNetwork> {
    match name {
        "rnet1" => Some(rnet1(25000, 1.0, 20.0)),
        "rnet2" => Some(rnet2(20.0)),
        "rnet3" => Some(rnet3(Rnet3Params { e0: 20000, k1: 1.0, k2: 20.0, kd: 0.01 })),
        "rnet4" => Some(rnet4(&Rnet4Params { weights: vec![2.0, 1.0, 1.0], ..Rnet4Params::default() })),
        _ => None,
    }
}

pub fn retune_patch(from: &ReactionNetwork, to: &ReactionNetwork) -> ReconfigPatch {
    patch::diff(from, to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::NullSink;
    use crate::fluid::{build_odes, steady_state, SteadyOptions, SteadyState};

    #[test]
    fn costs() {
        assert_eq!(molecule_cost(1500, 1000), 12);
        assert_eq!(molecule_cost(0, 1000), 0);
        assert_eq!(molecule_cost(500, 1000), 4);
    }

    #[test]
    fn tail_drop_counts() {
        let mut q = PacketQueue::new("q", Some(2000));
        let p = Packet { bytes: 1500, arrival: 0.0, flow: 0, cost: 12 };
        assert!(q.push(p));
        assert!(!q.push(p));
        assert_eq!(q.counters.tail_dropped, 1);
        assert!(q.conserved());
    }

    fn manual(quantum: u64) -> Scenario {
        let net = ReactionNetwork::builder()
            .species("S", 0)
            .species("P", 0)
            .species("X", 0)
            .reaction("r", &[("X", 1)], &[("P", 1)], 1.0)
            .build()
            .unwrap();
        let mut sc = Scenario::new("t", net, 1.0);
        sc.queues.push(QueueSpec { name: "q".into(), capacity_bytes: None });
        let mut b = BindingSpec::new("q", "S", "P");
        b.quantum_bits = quantum;
        sc.bindings.push(b);
        sc
    }

    fn harness(sc: &Scenario, engine: &crate::ssa::Engine) -> Harness {
        let mut h = Harness {
            queues: vec![PacketQueue::new("q", None)],
            bindings: vec![Binding {
                spec: sc.bindings[0].clone(),
                queue: 0,
                input: SpeciesId(1),
                output: SpeciesId(2),
                drop: None,
                forward: None,
                cap: sc.bindings[0].effective_cap(),
            }],
            bound: vec![Some(0)],
            watchers: Vec::new(),
            bins: vec![vec![Bin { tx_bits_by_flow: vec![0], ..Bin::default() }; 10]],
            hop: 0.1,
            injections: 0,
            opts: RunOptions::default(),
        };
        h.resolve(engine.network()).unwrap();
        h
    }

    #[test]
    fn credit_thresholds() {
        let sc = manual(1000);
        let mut e = crate::ssa::Engine::new(sc.network.clone(), 1);
        let mut h = harness(&sc, &e);
        h.enqueue(&mut e, &mut NullSink, 0, 1500, 0).unwrap();
        h.enqueue(&mut e, &mut NullSink, 0, 1500, 0).unwrap();
        assert_eq!(e.concentration(SpeciesId(1)), 24);
        e.adjust(SpeciesId(2), 11).unwrap();
        h.settle(&mut e, &mut NullSink, 0).unwrap();
        assert_eq!(h.queues[0].len(), 2);
        e.adjust(SpeciesId(2), 19).unwrap();
        h.settle(&mut e, &mut NullSink, 0).unwrap();
        assert_eq!(h.queues[0].len(), 0);
        assert_eq!(e.concentration(SpeciesId(2)), 6);
        e.adjust(SpeciesId(2), 500).unwrap();
        h.settle(&mut e, &mut NullSink, 0).unwrap();
        assert_eq!(e.concentration(SpeciesId(2)), 120);
        assert_eq!(h.queues[0].counters.discarded_credit, 386);
        h.enqueue(&mut e, &mut NullSink, 0, 0, 0).unwrap();
        assert_eq!(h.queues[0].counters.departed, 3);
    }

    #[test]
    fn arrivals_are_deterministic_and_windowed() {
        let mut sc = fig7();
        sc.duration = 27.0;
        let a = generate_arrivals(&sc);
        assert_eq!(a, generate_arrivals(&sc));
        assert!(a.windows(2).all(|w| w[1].time >= w[0].time));
        assert!(a.iter().all(|x| (0.5..4.5).contains(&x.time) || (6.5..14.0).contains(&x.time) || x.time >= 19.0));
        let n_mid = a.iter().filter(|x| (6.5..14.0).contains(&x.time)).count() as f64;
        let want = 0.75e9 * 7.5 / 12000.0;
        assert!((n_mid / want - 1.0).abs() < 0.01);
    }

    #[test]
    fn pacer_passes_traffic() {
        let mut sc = single_queue("p", rnet2(20.0), 3.0, false);
        sc.arrivals.push(window("q", ArrivalProcess::Cbr { rate_bps: 12e6, size: 1500 }, (0.0, 2.0)));
        let rep = run_scenario(&sc).unwrap();
        let q = &rep.queues[0].totals;
        assert_eq!(q.arrived, 2000);
        assert!(q.departed >= 1990, "{q:?}");
        assert_eq!(rep.conservation_violations, 0);
    }

    #[test]
    fn validation_catches_bad_refs() {
        let mut sc = fig10();
        sc.bindings[0].output = "nope".into();
        assert!(sc.validate().is_err());
        let mut sc = fig10();
        sc.patches.push(ScheduledPatch { time: 99.0, patch: ReconfigPatch::default(), policy: CarryOver::Reset });
        assert!(sc.validate().is_err());
    }

    #[test]
    fn rnet4_shares_follow_weights_in_fluid() {
        let net = rnet4(&Rnet4Params { weights: vec![2.0, 1.0, 1.0], ..Rnet4Params::default() });
        let inflow: Vec<_> = (1..=3).map(|i| (net.species_id(&format!("S{i}")).unwrap(), 5000.0)).collect();
        let sys = build_odes(&net, &inflow).unwrap();
        let c0: Vec<f64> = net.initial_concentrations().iter().map(|&x| x as f64).collect();
        let ss = steady_state(&sys, &c0, &SteadyOptions { t_max: Some(50.0), ..SteadyOptions::default() }).unwrap();
        let c = ss.state();
        let tput: Vec<f64> = (1..=3)
            .map(|i| {
                let r = net.reaction_id(&format!("serve{i}")).unwrap();
                sys.rates(c)[r.index()]
            })
            .collect();
        let total: f64 = tput.iter().sum();
        for (t, want) in tput.iter().zip([0.5, 0.25, 0.25]) {
            assert!((t / total - want).abs() < 0.02, "{tput:?}");
        }
    }

    #[test]
    fn builtins_validate() {
        for n in BUILTIN_SCENARIOS {
            builtin(n).unwrap().validate().unwrap();
        }
        assert!(matches!(steady_state(
            &build_odes(&rnet2(20.0), &[]).unwrap(), &[0.0, 0.0], &SteadyOptions::default()).unwrap(), SteadyState::Fixed { .. }));
    }
}
