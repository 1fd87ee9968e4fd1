//! Engine-independent event types, the engine trait and the timeline runner
//! that interleaves firings, injections, samples and reconfigurations.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::network::{ReactionId, ReactionNetwork, SpeciesId};
use crate::patch::{PatchError, PatchKind, ReconfigPatch};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpeciesDelta {
    pub species: SpeciesId,
    pub delta: i64,
}

/// One reaction firing. `delta` is column `reaction` of Ξ.
#[derive(Clone, Debug, PartialEq)]
pub struct FiredEvent {
    pub time: f64,
    pub reaction: ReactionId,
    pub delta: Arc<[SpeciesDelta]>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Fired(FiredEvent),
    Quiescent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InjectionEvent {
    pub time: f64,
    pub species: SpeciesId,
    pub amount: i64,
}

/// What structural reconfiguration does with existing molecules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CarryOver {
    /// Species that keep their name keep their count; new ones start at
    /// their declared initial value.
    #[default]
    MatchByName,
    /// Every species restarts at its declared initial value.
    Reset,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconfigOutcome {
    pub time: f64,
    pub kind: PatchKind,
    pub edits: usize,
    /// Register cells written (hardware engine); zero for the reference engine.
    pub register_writes: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EngineError {
    NegativeConcentration { species: String, current: u64, amount: i64 },
    EventInPast { time: f64, clock: f64 },
    EventsOutOfOrder { time: f64, previous: f64 },
    UnknownSpecies(SpeciesId),
    PatchConflict(PatchError),
    ResourceExceeded(String),
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::NegativeConcentration { species, current, amount } => {
                write!(f, "injection of {amount} into {species} (holding {current}) would go negative")
            }
            EngineError::EventInPast { time, clock } => write!(f, "event at t={time} precedes clock {clock}"),
            EngineError::EventsOutOfOrder { time, previous } => {
                write!(f, "event at t={time} follows a later event at t={previous}")
            }
            EngineError::UnknownSpecies(s) => write!(f, "unknown species id {}", s.0),
            EngineError::PatchConflict(e) => write!(f, "patch conflict: {e}"),
            EngineError::ResourceExceeded(b) => write!(f, "patched network exceeds engine limits: {b}"),
        }
    }
}

impl core::error::Error for EngineError {}

impl From<PatchError> for EngineError {
    fn from(e: PatchError) -> Self {
        EngineError::PatchConflict(e)
    }
}

/// Common surface of the reference and hardware engines.
pub trait ReactionEngine {
    fn network(&self) -> &ReactionNetwork;
    fn clock(&self) -> f64;
    fn concentration(&self, s: SpeciesId) -> u64;
    fn concentrations(&self) -> Vec<u64>;
    /// Earliest scheduled firing, `+∞` when quiescent.
    fn next_event_time(&self) -> f64;
    /// Fires the earliest reaction if it is scheduled at or before `limit`.
    fn step_until(&mut self, limit: f64) -> Option<FiredEvent>;
    /// Moves the clock forward without firing. No firing may be pending
    /// strictly before `t`.
    fn advance_to(&mut self, t: f64);
    /// Adds `amount` molecules of `s` at the current clock and reschedules
    /// the consumers of `s`.
    fn adjust(&mut self, s: SpeciesId, amount: i64) -> Result<(), EngineError>;
    fn reconfigure(&mut self, patch: &ReconfigPatch, policy: CarryOver) -> Result<ReconfigOutcome, EngineError>;
    fn fire_counts(&self) -> &[u64];

    fn step(&mut self) -> Step {
        match self.step_until(f64::INFINITY) {
            Some(ev) => Step::Fired(ev),
            None => Step::Quiescent,
        }
    }

    /// Processes firings up to `ev.time`, then applies the injection.
    fn inject(&mut self, ev: &InjectionEvent, mut on_fire: impl FnMut(&FiredEvent)) -> Result<(), EngineError>
    where
        Self: Sized,
    {
        if ev.time < self.clock() {
            return Err(EngineError::EventInPast { time: ev.time, clock: self.clock() });
        }
        while let Some(f) = self.step_until(ev.time) {
            on_fire(&f);
        }
        self.advance_to(ev.time);
        self.adjust(ev.species, ev.amount)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceRecord {
    Fired(FiredEvent),
    Injected(InjectionEvent),
    /// Tap values in `Trace::taps` order; `None` for a tap the current
    /// network lacks.
    Sample { time: f64, values: Vec<Option<u64>> },
    /// `network` holds the new network after a structural change.
    Reconfig { outcome: ReconfigOutcome, network: Option<Box<ReactionNetwork>> },
}

/// Receives records in time order together with the network they refer to.
pub trait TraceSink {
    fn record(&mut self, rec: &TraceRecord, net: &ReactionNetwork);
}

/// In-memory trace.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub taps: Vec<String>,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn firings(&self) -> impl Iterator<Item = &FiredEvent> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Fired(f) => Some(f),
            _ => None,
        })
    }
}

impl TraceSink for Trace {
    fn record(&mut self, rec: &TraceRecord, _net: &ReactionNetwork) {
        self.records.push(rec.clone());
    }
}

/// Discards everything.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _rec: &TraceRecord, _net: &ReactionNetwork) {}
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceConfig {
    pub taps: Vec<String>,
    pub sample_period: Option<f64>,
    pub record_firings: bool,
    pub record_injections: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { taps: Vec::new(), sample_period: None, record_firings: true, record_injections: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledPatch {
    pub time: f64,
    pub patch: ReconfigPatch,
    pub policy: CarryOver,
}

/// Runs to `t_end` with injections only.
pub fn run_until<E: ReactionEngine>(
    engine: &mut E,
    t_end: f64,
    events: &[InjectionEvent],
    cfg: &TraceConfig,
) -> Result<Trace, EngineError> {
    let mut trace = Trace { taps: cfg.taps.clone(), records: Vec::new() };
    run_schedule(engine, t_end, events, &[], cfg, &mut trace)?;
    Ok(trace)
}

fn check_order(times: impl Iterator<Item = f64>, clock: f64) -> Result<(), EngineError> {
    let mut prev = clock;
    let mut first = true;
    for t in times {
        if first && t < clock {
            return Err(EngineError::EventInPast { time: t, clock });
        }
        if t < prev {
            return Err(EngineError::EventsOutOfOrder { time: t, previous: prev });
        }
        prev = t;
        first = false;
    }
    Ok(())
}

/// Runs to `t_end`, interleaving firings with injections, patches and tap
/// samples. At equal times the order is: firings, samples, patches,
/// injections.
pub fn run_schedule<E: ReactionEngine, S: TraceSink>(
    engine: &mut E,
    t_end: f64,
    events: &[InjectionEvent],
    patches: &[ScheduledPatch],
    cfg: &TraceConfig,
    sink: &mut S,
) -> Result<(), EngineError> {
    let start = engine.clock();
    check_order(events.iter().map(|e| e.time), start)?;
    check_order(patches.iter().map(|p| p.time), start)?;
    let period = cfg.sample_period.filter(|p| *p > 0.0);
    let mut sample_k: u64 = match period {
        Some(p) => libm::ceil(start / p) as u64,
        None => 0,
    };
    let (mut ei, mut pi) = (0usize, 0usize);
    loop {
        let pick = |t: f64| if t <= t_end { t } else { f64::INFINITY };
        let t_ev = events.get(ei).map_or(f64::INFINITY, |e| pick(e.time));
        let t_p = patches.get(pi).map_or(f64::INFINITY, |p| pick(p.time));
        let t_s = period.map_or(f64::INFINITY, |p| pick(sample_k as f64 * p));
        let next = t_ev.min(t_p).min(t_s).min(t_end);
        while let Some(f) = engine.step_until(next) {
            if cfg.record_firings {
                sink.record(&TraceRecord::Fired(f), engine.network());
            }
        }
        if next == f64::INFINITY {
            return Ok(());
        }
        engine.advance_to(next);
        if next == t_s {
            let net = engine.network();
            let values = cfg.taps.iter().map(|n| net.species_id(n).map(|id| engine.concentration(id))).collect();
            sink.record(&TraceRecord::Sample { time: next, values }, engine.network());
            sample_k += 1;
        } else if next == t_p {
            let sp = &patches[pi];
            let outcome = engine.reconfigure(&sp.patch, sp.policy)?;
            let network = (outcome.kind == PatchKind::Structural).then(|| Box::new(engine.network().clone()));
            sink.record(&TraceRecord::Reconfig { outcome, network }, engine.network());
            pi += 1;
        } else if next == t_ev {
            let ev = events[ei];
            engine.adjust(ev.species, ev.amount)?;
            if cfg.record_injections {
                sink.record(&TraceRecord::Injected(ev), engine.network());
            }
            ei += 1;
        } else {
            return Ok(());
        }
    }
}
