//! Register-level model of the chemical engine.
//!
//! A network is compiled into four memories: `c_mem` (concentrations, cell 0
//! pinned to 1), `alpha_mem`/`beta_mem` (per reaction, per slot, per record:
//! a species address, 0 = inactive) and `k_mem` (binary32 coefficients).
//! [`HwEngine`] executes directly on those memories with saturating integer
//! updates and a single-precision scheduler, charging clock cycles from a
//! [`CycleCostModel`].

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::{
    run_schedule, CarryOver, EngineError, FiredEvent, InjectionEvent, ReactionEngine, ReconfigOutcome,
    ScheduledPatch, SpeciesDelta, Trace, TraceConfig,
};
use crate::network::{
    dependency_graph, species_consumers, validate_against_limits, EngineLimits, ReactionDef, ReactionId,
    ReactionNetwork, SpeciesId, Violation,
};
use crate::patch::{self, Edit, PatchKind, ReconfigPatch};
use crate::rng::SimRng;

#[derive(Clone, Debug, PartialEq)]
pub enum HwError {
    ResourceExceeded(Vec<Violation>),
    /// `k` does not survive conversion to binary32.
    CoefficientRange { reaction: String, k: f64 },
    MalformedMap(String),
    IneligibleReaction(ReactionId),
}

impl fmt::Display for HwError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HwError::ResourceExceeded(v) => {
                write!(f, "resource exceeded:")?;
                for x in v {
                    write!(f, " [{x}]")?;
                }
                Ok(())
            }
            HwError::CoefficientRange { reaction, k } => {
                write!(f, "coefficient width: k={k} of `{reaction}` is not representable in binary32")
            }
            HwError::MalformedMap(why) => write!(f, "malformed register map: {why}"),
            HwError::IneligibleReaction(r) => write!(f, "reaction {} is not eligible", r.0),
        }
    }
}

impl core::error::Error for HwError {}

/// Level-2 configuration image. Memory dimensions follow `limits`; the two
/// count registers say how many species cells and reaction rows are live.
#[derive(Clone, Debug, PartialEq)]
pub struct RegisterMap {
    pub limits: EngineLimits,
    pub species_count: u16,
    pub reaction_count: u16,
    /// `max_species + 1` cells.
    pub c_mem: Vec<u32>,
    /// `[reaction][slot][record]`, `max_reactions × max_slots × max_reactant_order`.
    pub alpha_mem: Vec<u16>,
    /// `[reaction][slot][record]`, `max_reactions × max_slots × max_product_order`.
    pub beta_mem: Vec<u16>,
    pub k_mem: Vec<f32>,
}

impl RegisterMap {
    /// Zeroed memories with the constant cell set.
    pub fn blank(limits: EngineLimits) -> Self {
        let r = limits.max_reactions as usize;
        let p = limits.max_slots as usize;
        let mut c_mem = vec![0; limits.max_species as usize + 1];
        c_mem[0] = 1;
        RegisterMap {
            limits,
            species_count: 0,
            reaction_count: 0,
            c_mem,
            alpha_mem: vec![0; r * p * limits.max_reactant_order as usize],
            beta_mem: vec![0; r * p * limits.max_product_order as usize],
            k_mem: vec![0.0; r],
        }
    }

    #[inline]
    pub fn alpha_index(&self, r: usize, slot: usize, rec: usize) -> usize {
        let a = self.limits.max_reactant_order as usize;
        (r * self.limits.max_slots as usize + slot) * a + rec
    }

    #[inline]
    pub fn beta_index(&self, r: usize, slot: usize, rec: usize) -> usize {
        let b = self.limits.max_product_order as usize;
        (r * self.limits.max_slots as usize + slot) * b + rec
    }

    pub fn alpha_slot(&self, r: usize, slot: usize) -> &[u16] {
        let i = self.alpha_index(r, slot, 0);
        &self.alpha_mem[i..i + self.limits.max_reactant_order as usize]
    }

    pub fn beta_slot(&self, r: usize, slot: usize) -> &[u16] {
        let i = self.beta_index(r, slot, 0);
        &self.beta_mem[i..i + self.limits.max_product_order as usize]
    }

    /// Total addressable cells across the four memories plus the two count
    /// registers.
    pub fn cell_count(&self) -> usize {
        self.c_mem.len() + self.alpha_mem.len() + self.beta_mem.len() + self.k_mem.len() + 2
    }

    /// Cells whose contents differ, i.e. writes needed to turn `self` into
    /// `other`. Maps with different geometry differ everywhere.
    pub fn differing_cells(&self, other: &RegisterMap) -> u64 {
        if self.limits != other.limits {
            return other.cell_count() as u64;
        }
        let count = |a: &[u16], b: &[u16]| a.iter().zip(b).filter(|(x, y)| x != y).count() as u64;
        let mut n = (self.species_count != other.species_count) as u64
            + (self.reaction_count != other.reaction_count) as u64;
        n += self.c_mem.iter().zip(&other.c_mem).filter(|(x, y)| x != y).count() as u64;
        n += count(&self.alpha_mem, &other.alpha_mem);
        n += count(&self.beta_mem, &other.beta_mem);
        n += self.k_mem.iter().zip(&other.k_mem).filter(|(x, y)| x.to_bits() != y.to_bits()).count() as u64;
        n
    }
}

fn check_fits(net: &ReactionNetwork, lim: &EngineLimits) -> Result<(), HwError> {
    let report = validate_against_limits(net, lim);
    if !report.is_ok() {
        return Err(HwError::ResourceExceeded(report.violations));
    }
    for r in net.reactions() {
        let k = r.k as f32;
        if !(k.is_finite() && k > 0.0) {
            return Err(HwError::CoefficientRange { reaction: r.name.clone(), k: r.k });
        }
    }
    Ok(())
}

/// Lays `net` out in memories sized by `lim`. Each distinct reactant takes
/// one slot, its address repeated α times from record 0; products mirror
/// this in `beta_mem`.
pub fn compile(net: &ReactionNetwork, lim: &EngineLimits) -> Result<RegisterMap, HwError> {
    check_fits(net, lim)?;
    let mut m = RegisterMap::blank(*lim);
    m.species_count = net.species_count() as u16;
    m.reaction_count = net.reaction_count() as u16;
    for s in net.species() {
        m.c_mem[s.id.0 as usize] = s.initial as u32;
    }
    for r in net.reactions() {
        let ri = r.id.index();
        for (slot, t) in r.reactants.iter().enumerate() {
            for rec in 0..t.count as usize {
                let i = m.alpha_index(ri, slot, rec);
                m.alpha_mem[i] = t.species.0;
            }
        }
        for (slot, t) in r.products.iter().enumerate() {
            for rec in 0..t.count as usize {
                let i = m.beta_index(ri, slot, rec);
                m.beta_mem[i] = t.species.0;
            }
        }
        m.k_mem[ri] = r.k as f32;
    }
    Ok(m)
}

fn read_slots(
    records: impl Fn(usize) -> Vec<u16>,
    slots: usize,
    species: u16,
    what: &str,
    r: usize,
) -> Result<Vec<(String, u32)>, HwError> {
    let mut out: Vec<(String, u32)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut ended = false;
    for slot in 0..slots {
        let recs = records(slot);
        let n = recs.iter().take_while(|&&a| a != 0).count();
        if recs[n..].iter().any(|&a| a != 0) {
            return Err(HwError::MalformedMap(format!("{what} slot {slot} of reaction {r} is not contiguous")));
        }
        if n == 0 {
            ended = true;
            continue;
        }
        if ended {
            return Err(HwError::MalformedMap(format!("{what} slot {slot} of reaction {r} follows an empty slot")));
        }
        let addr = recs[0];
        if recs[..n].iter().any(|&a| a != addr) {
            return Err(HwError::MalformedMap(format!("{what} slot {slot} of reaction {r} mixes addresses")));
        }
        if addr > species {
            return Err(HwError::MalformedMap(format!("{what} address {addr} of reaction {r} is out of range")));
        }
        if !seen.insert(addr) {
            return Err(HwError::MalformedMap(format!("species {addr} occupies two {what} slots of reaction {r}")));
        }
        out.push((format!("S{addr}"), n as u32));
    }
    Ok(out)
}

/// Rebuilds a network from a map, naming species `S<id>` and reactions
/// `r<index>`. Concentrations become initial values.
pub fn decompile(m: &RegisterMap) -> Result<ReactionNetwork, HwError> {
    let lim = &m.limits;
    let expect = |len: usize, want: usize, what: &str| {
        if len == want {
            Ok(())
        } else {
            Err(HwError::MalformedMap(format!("{what} has {len} cells, expected {want}")))
        }
    };
    let (rr, pp) = (lim.max_reactions as usize, lim.max_slots as usize);
    expect(m.c_mem.len(), lim.max_species as usize + 1, "c_mem")?;
    expect(m.alpha_mem.len(), rr * pp * lim.max_reactant_order as usize, "alpha_mem")?;
    expect(m.beta_mem.len(), rr * pp * lim.max_product_order as usize, "beta_mem")?;
    expect(m.k_mem.len(), rr, "k_mem")?;
    if m.c_mem[0] != 1 {
        return Err(HwError::MalformedMap("constant cell does not hold 1".to_string()));
    }
    if m.species_count > lim.max_species || m.reaction_count > lim.max_reactions {
        return Err(HwError::MalformedMap("count register exceeds memory size".to_string()));
    }
    let cmax = lim.max_concentration();
    if m.c_mem.iter().any(|&c| c as u64 > cmax) {
        return Err(HwError::MalformedMap("concentration cell exceeds its width".to_string()));
    }
    let species: Vec<(String, u64)> =
        (1..=m.species_count as usize).map(|s| (format!("S{s}"), m.c_mem[s] as u64)).collect();
    let mut reactions = Vec::new();
    for r in 0..rr {
        let live = r < m.reaction_count as usize;
        let reactants = read_slots(|s| m.alpha_slot(r, s).to_vec(), pp, m.species_count, "reactant", r)?;
        let products = read_slots(|s| m.beta_slot(r, s).to_vec(), pp, m.species_count, "product", r)?;
        let k = m.k_mem[r];
        if !live {
            if !reactants.is_empty() || !products.is_empty() || k.to_bits() != 0 {
                return Err(HwError::MalformedMap(format!("row {r} beyond the reaction count is not blank")));
            }
            continue;
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(HwError::MalformedMap(format!("k of reaction {r} is not positive")));
        }
        if reactants.is_empty() && products.is_empty() {
            return Err(HwError::MalformedMap(format!("reaction {r} has no records")));
        }
        reactions.push(ReactionDef { name: format!("r{r}"), reactants, products, k: k as f64 });
    }
    ReactionNetwork::from_parts(species, reactions, Vec::new(), Vec::new(), Vec::new())
        .map_err(|e| HwError::MalformedMap(e.to_string()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Topology {
    /// One pipeline walks the dependents one after another.
    #[default]
    SingleCore,
    /// One scheduler core per reaction, all dependents in parallel.
    PerReactionCores,
    /// Per-reaction cores with a multiplier tree instead of a chain.
    PerReactionLog,
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::SingleCore => "serial",
            Topology::PerReactionCores => "per-core",
            Topology::PerReactionLog => "log",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "serial" | "single-core" => Some(Topology::SingleCore),
            "per-core" | "cores" => Some(Topology::PerReactionCores),
            "log" | "per-core-log" => Some(Topology::PerReactionLog),
            _ => None,
        }
    }
}

/// Clock-cycle prices of the datapath stages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleCostModel {
    pub hls_step: u64,
    pub mult: u64,
    pub div: u64,
    pub convert: u64,
    pub clock_hz: f64,
    pub topology: Topology,
}

impl Default for CycleCostModel {
    fn default() -> Self {
        CycleCostModel { hls_step: 1, mult: 8, div: 8, convert: 1, clock_hz: 80e6, topology: Topology::SingleCore }
    }
}

fn ceil_log2(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros() as u64
    }
}

impl CycleCostModel {
    pub fn with_topology(mut self, t: Topology) -> Self {
        self.topology = t;
        self
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if self.hls_step == 0 || self.mult == 0 || self.div == 0 || self.convert == 0 {
            return Err("every stage costs at least one cycle");
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err("clock frequency must be positive");
        }
        Ok(())
    }

    /// Cycles to recompute one reaction's propensity and next time. `order`
    /// is the number of active reactant records.
    pub fn reaction_cycles(&self, order: u32) -> u64 {
        let n = order as u64;
        match self.topology {
            Topology::PerReactionLog => 2 * self.convert + self.mult * ceil_log2(n + 1) + self.div,
            _ => 2 * self.convert + self.mult * (n + 1) + 2 * self.div + self.mult,
        }
    }

    /// Cycles to reschedule a set of reactions given their orders.
    pub fn schedule_cycles(&self, orders: impl IntoIterator<Item = u32>) -> u64 {
        let it = orders.into_iter().map(|o| self.reaction_cycles(o));
        match self.topology {
            Topology::SingleCore => it.sum(),
            _ => it.max().unwrap_or(0),
        }
    }

    /// Cycles when every reaction of `net` is rescheduled at once.
    pub fn full_reschedule_cycles(&self, net: &ReactionNetwork) -> u64 {
        self.schedule_cycles(net.reactions().iter().map(|r| r.order()))
    }
}

/// How next-reaction delays are formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScheduleMode {
    /// Exponential variate over propensity.
    #[default]
    Sampled,
    /// Expected interval `1/a`.
    ExpectedInterval,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Saturation {
    pub species: SpeciesId,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HwConfig {
    pub limits: EngineLimits,
    pub cost: CycleCostModel,
    pub mode: ScheduleMode,
}

impl Default for HwConfig {
    fn default() -> Self {
        HwConfig { limits: EngineLimits::default(), cost: CycleCostModel::default(), mode: ScheduleMode::Sampled }
    }
}

/// Engine executing on a [`RegisterMap`].
#[derive(Clone, Debug)]
pub struct HwEngine {
    net: ReactionNetwork,
    map: RegisterMap,
    cfg: HwConfig,
    deps: Vec<Vec<usize>>,
    consumers: Vec<Vec<usize>>,
    delta: Vec<Arc<[SpeciesDelta]>>,
    order: Vec<u32>,
    prop: Vec<f32>,
    base: Vec<f64>,
    delay: Vec<f32>,
    clock: f64,
    rng: SimRng,
    cycles: u64,
    events: u64,
    fire_counts: Vec<u64>,
    saturation: Option<Saturation>,
}

impl HwEngine {
    pub fn new(net: ReactionNetwork, cfg: HwConfig, seed: u64) -> Result<Self, HwError> {
        Self::with_rng(net, cfg, SimRng::new(seed, 0))
    }

    pub fn with_rng(net: ReactionNetwork, cfg: HwConfig, rng: SimRng) -> Result<Self, HwError> {
        let map = compile(&net, &cfg.limits)?;
        let n = net.reaction_count();
        let mut e = HwEngine {
            deps: Vec::new(),
            consumers: Vec::new(),
            delta: Vec::new(),
            order: Vec::new(),
            prop: vec![0.0; n],
            base: vec![0.0; n],
            delay: vec![f32::INFINITY; n],
            clock: 0.0,
            rng,
            cycles: 0,
            events: 0,
            fire_counts: vec![0; n],
            saturation: None,
            net,
            map,
            cfg,
        };
        e.rebuild_tables();
        e.redraw_all();
        Ok(e)
    }

    fn rebuild_tables(&mut self) {
        let g = dependency_graph(&self.net);
        self.deps = self.net.reactions().iter().map(|r| g.dependents(r.id).iter().map(|x| x.index()).collect()).collect();
        self.consumers = species_consumers(&self.net)
            .into_iter()
            .map(|v| v.into_iter().map(ReactionId::index).collect())
            .collect();
        self.delta = self
            .net
            .reactions()
            .iter()
            .map(|r| r.delta().into_iter().map(|(species, delta)| SpeciesDelta { species, delta }).collect())
            .collect();
        self.order = self.net.reactions().iter().map(|r| r.order()).collect();
    }

    fn redraw_all(&mut self) {
        let n = self.net.reaction_count();
        for r in 0..n {
            self.prop[r] = 0.0;
            self.delay[r] = f32::INFINITY;
            self.reschedule(r, true);
        }
        self.cycles += self.cfg.cost.schedule_cycles(self.order.iter().copied());
    }

    pub fn register_map(&self) -> &RegisterMap {
        &self.map
    }

    pub fn config(&self) -> &HwConfig {
        &self.cfg
    }

    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    /// Firings plus injections processed.
    pub fn events(&self) -> u64 {
        self.events
    }

    /// First saturating update, if any (sticky).
    pub fn saturation(&self) -> Option<Saturation> {
        self.saturation
    }

    pub fn propensities(&self) -> &[f32] {
        &self.prop
    }

    pub fn next_time(&self, r: usize) -> f64 {
        if self.delay[r].is_infinite() {
            f64::INFINITY
        } else {
            self.base[r] + self.delay[r] as f64
        }
    }

    /// Datapath propensity: selected cells multiplied in binary32, slot
    /// major, record minor, k last. Inactive records select the constant
    /// cell. Zero when a slot's cell holds fewer molecules than its active
    /// record count.
    pub fn propensity(&self, r: usize) -> (f32, u64) {
        let m = &self.map;
        let mut a = 1.0f32;
        let mut muls = 0u64;
        for slot in 0..m.limits.max_slots as usize {
            let recs = m.alpha_slot(r, slot);
            let active = recs.iter().take_while(|&&x| x != 0).count();
            if active == 0 {
                break;
            }
            let c = m.c_mem[recs[0] as usize];
            if (c as usize) < active {
                return (0.0, self.cfg.cost.mult * (muls + 1));
            }
            for &addr in &recs[..active] {
                a *= m.c_mem[addr as usize] as f32;
                muls += 1;
            }
        }
        a *= m.k_mem[r];
        muls += 1;
        (a, self.cfg.cost.mult * muls)
    }

    fn reschedule(&mut self, r: usize, fresh: bool) {
        let (a_new, _) = self.propensity(r);
        let a_old = self.prop[r];
        if a_new <= 0.0 {
            self.delay[r] = f32::INFINITY;
        } else if fresh || a_old <= 0.0 {
            let d = match self.cfg.mode {
                ScheduleMode::Sampled => self.rng.exp1() as f32 / a_new,
                ScheduleMode::ExpectedInterval => 1.0 / a_new,
            };
            self.base[r] = self.clock;
            self.delay[r] = d;
        } else if a_new != a_old {
            let rem = (self.next_time(r) - self.clock) as f32;
            self.base[r] = self.clock;
            self.delay[r] = rem * (a_old / a_new);
        }
        self.prop[r] = a_new;
    }

    /// Reschedules after reaction `fired` (fresh draw) and its dependents
    /// (rescaled), returning the cycles charged.
    pub fn reschedule_after(&mut self, fired: usize) -> u64 {
        self.reschedule(fired, true);
        for i in 0..self.deps[fired].len() {
            let d = self.deps[fired][i];
            if d != fired {
                self.reschedule(d, false);
            }
        }
        let cost = self.cfg.cost.schedule_cycles(self.deps[fired].iter().map(|&d| self.order[d]));
        self.cycles += cost;
        cost
    }

    fn saturate(&mut self, s: usize) {
        if self.saturation.is_none() {
            self.saturation = Some(Saturation { species: SpeciesId::from_index(s), time: self.clock });
        }
    }

    /// HLS update for one firing: every reactant slot steps down in
    /// parallel, then every product slot steps up with saturation.
    pub fn apply_reaction(&mut self, r: usize) -> Result<u64, HwError> {
        let lim = self.map.limits;
        let cmax = lim.max_concentration() as u32;
        let mut sub_steps = 0usize;
        for slot in 0..lim.max_slots as usize {
            let recs = self.map.alpha_slot(r, slot);
            let n = recs.iter().take_while(|&&x| x != 0).count();
            if n > 0 && (self.map.c_mem[recs[0] as usize] as usize) < n {
                return Err(HwError::IneligibleReaction(ReactionId(r as u16)));
            }
        }
        for slot in 0..lim.max_slots as usize {
            let i = self.map.alpha_index(r, slot, 0);
            let n = self.map.alpha_slot(r, slot).iter().take_while(|&&x| x != 0).count();
            for rec in 0..n {
                let addr = self.map.alpha_mem[i + rec] as usize;
                self.map.c_mem[addr] -= 1;
            }
            sub_steps = sub_steps.max(n);
        }
        let mut add_steps = 0usize;
        for slot in 0..lim.max_slots as usize {
            let i = self.map.beta_index(r, slot, 0);
            let n = self.map.beta_slot(r, slot).iter().take_while(|&&x| x != 0).count();
            for rec in 0..n {
                let addr = self.map.beta_mem[i + rec] as usize;
                if self.map.c_mem[addr] >= cmax {
                    self.saturate(addr - 1);
                } else {
                    self.map.c_mem[addr] += 1;
                }
            }
            add_steps = add_steps.max(n);
        }
        let cost = self.cfg.cost.hls_step * (sub_steps + add_steps) as u64;
        self.cycles += cost;
        Ok(cost)
    }

    /// Rewrites registers for `patch` and returns the number of cells
    /// written. Parametric edits touch single k/c cells; anything else
    /// recompiles and writes the cells that changed.
    pub fn patch_registers(&mut self, patch: &ReconfigPatch, policy: CarryOver) -> Result<u64, EngineError> {
        let kind = patch.kind();
        if kind == PatchKind::Empty {
            return Ok(0);
        }
        let new_net = patch::apply(&self.net, patch)?;
        check_fits(&new_net, &self.cfg.limits).map_err(|e| EngineError::ResourceExceeded(e.to_string()))?;
        if kind == PatchKind::Parametric {
            let mut writes = 0u64;
            let mut touched = BTreeSet::new();
            for e in &patch.edits {
                match e {
                    Edit::SetK { reaction, .. } => {
                        let r = new_net.reaction_id(reaction).expect("validated").index();
                        self.map.k_mem[r] = new_net.reactions()[r].k as f32;
                        touched.insert(r);
                    }
                    Edit::SetConcentration { species, value } => {
                        let s = new_net.species_id(species).expect("validated");
                        self.map.c_mem[s.0 as usize] = *value as u32;
                        touched.extend(self.consumers[s.index()].iter().copied());
                    }
                    _ => unreachable!("parametric patch"),
                }
                writes += 1;
            }
            self.net = new_net;
            for &r in &touched {
                self.reschedule(r, false);
            }
            self.cycles += writes + self.cfg.cost.schedule_cycles(touched.iter().map(|&r| self.order[r]));
            return Ok(writes);
        }
        let mut map = compile(&new_net, &self.cfg.limits).expect("fits");
        if policy == CarryOver::MatchByName {
            for s in new_net.species() {
                if let Some(old) = self.net.species_id(&s.name) {
                    map.c_mem[s.id.0 as usize] = self.map.c_mem[old.0 as usize];
                }
            }
        }
        let writes = self.map.differing_cells(&map);
        let counts = new_net
            .reactions()
            .iter()
            .map(|r| self.net.reaction_id(&r.name).map_or(0, |o| self.fire_counts[o.index()]))
            .collect();
        let n = new_net.reaction_count();
        self.net = new_net;
        self.map = map;
        self.fire_counts = counts;
        self.prop = vec![0.0; n];
        self.base = vec![0.0; n];
        self.delay = vec![f32::INFINITY; n];
        self.rebuild_tables();
        self.cycles += writes;
        self.redraw_all();
        Ok(writes)
    }

    fn earliest(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.delay.len() {
            let t = self.next_time(r);
            if t < best.map_or(f64::INFINITY, |b| b.1) {
                best = Some((r, t));
            }
        }
        best
    }
}

impl ReactionEngine for HwEngine {
    fn network(&self) -> &ReactionNetwork {
        &self.net
    }

    fn clock(&self) -> f64 {
        self.clock
    }

    fn concentration(&self, s: SpeciesId) -> u64 {
        self.map.c_mem[s.0 as usize] as u64
    }

    fn concentrations(&self) -> Vec<u64> {
        self.map.c_mem[1..=self.net.species_count()].iter().map(|&c| c as u64).collect()
    }

    fn next_event_time(&self) -> f64 {
        self.earliest().map_or(f64::INFINITY, |b| b.1)
    }

    fn step_until(&mut self, limit: f64) -> Option<FiredEvent> {
        let (r, t) = self.earliest()?;
        if t > limit {
            return None;
        }
        self.clock = t;
        self.apply_reaction(r).expect("scheduled reactions are eligible");
        self.fire_counts[r] += 1;
        self.events += 1;
        self.reschedule_after(r);
        Some(FiredEvent { time: t, reaction: ReactionId(r as u16), delta: self.delta[r].clone() })
    }

    fn advance_to(&mut self, t: f64) {
        if t > self.clock {
            self.clock = t;
        }
    }

    fn adjust(&mut self, s: SpeciesId, amount: i64) -> Result<(), EngineError> {
        if s.0 == 0 || s.index() >= self.net.species_count() {
            return Err(EngineError::UnknownSpecies(s));
        }
        let cell = s.0 as usize;
        let cur = self.map.c_mem[cell] as i128;
        let next = cur + amount as i128;
        if next < 0 {
            return Err(EngineError::NegativeConcentration {
                species: self.net.species_name(s).to_string(),
                current: cur as u64,
                amount,
            });
        }
        self.events += 1;
        if amount == 0 {
            return Ok(());
        }
        let cmax = self.map.limits.max_concentration() as i128;
        if next > cmax {
            self.saturate(s.index());
        }
        self.map.c_mem[cell] = next.min(cmax) as u32;
        let consumers = core::mem::take(&mut self.consumers[s.index()]);
        for &r in &consumers {
            self.reschedule(r, false);
        }
        self.cycles += self.cfg.cost.hls_step + self.cfg.cost.schedule_cycles(consumers.iter().map(|&r| self.order[r]));
        self.consumers[s.index()] = consumers;
        Ok(())
    }

    fn reconfigure(&mut self, patch: &ReconfigPatch, policy: CarryOver) -> Result<ReconfigOutcome, EngineError> {
        let time = self.clock;
        let writes = self.patch_registers(patch, policy)?;
        Ok(ReconfigOutcome { time, kind: patch.kind(), edits: patch.edits.len(), register_writes: writes })
    }

    fn fire_counts(&self) -> &[u64] {
        &self.fire_counts
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HwRunReport {
    pub trace: Trace,
    pub cycles: u64,
    pub events: u64,
    /// `cycles / events`, 0 with no events.
    pub cycles_per_event: f64,
    /// `clock_hz / cycles_per_event`, infinite with no events.
    pub max_event_rate: f64,
}

/// Runs like [`crate::engine::run_until`] and reports the cycle budget.
pub fn hw_run(
    engine: &mut HwEngine,
    t_end: f64,
    events: &[InjectionEvent],
    patches: &[ScheduledPatch],
    cfg: &TraceConfig,
) -> Result<HwRunReport, EngineError> {
    let (c0, e0) = (engine.cycles, engine.events);
    let mut trace = Trace { taps: cfg.taps.clone(), records: Vec::new() };
    run_schedule(engine, t_end, events, patches, cfg, &mut trace)?;
    let cycles = engine.cycles - c0;
    let n = engine.events - e0;
    let cpe = if n == 0 { 0.0 } else { cycles as f64 / n as f64 };
    let rate = if cpe == 0.0 { f64::INFINITY } else { engine.cfg.cost.clock_hz / cpe };
    Ok(HwRunReport { trace, cycles, events: n, cycles_per_event: cpe, max_event_rate: rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Step;
    use crate::ssa::Engine;

    fn lim3() -> EngineLimits {
        EngineLimits {
            max_reactions: 3,
            max_slots: 3,
            max_species: 3,
            concentration_bits: 16,
            max_reactant_order: 3,
            max_product_order: 3,
            k_bits: 32,
        }
    }

    fn worked(c2: u64, c3: u64, k: f64) -> ReactionNetwork {
        ReactionNetwork::builder()
            .species("S1", 0)
            .species("S2", c2)
            .species("S3", c3)
            .reaction("r", &[("S3", 2), ("S2", 1)], &[("S1", 1)], k)
            .build()
            .unwrap()
    }

    fn rnet1(s: u64) -> ReactionNetwork {
        ReactionNetwork::builder()
            .species("S", s)
            .species("E", 25000)
            .species("ES", 0)
            .species("P", 0)
            .reaction("r1", &[("S", 1), ("E", 1)], &[("ES", 1)], 1.0)
            .reaction("r2", &[("ES", 1)], &[("E", 1), ("P", 1)], 20.0)
            .build()
            .unwrap()
    }

    #[test]
    fn worked_example_layout() {
        let m = compile(&worked(5, 7, 2.0), &lim3()).unwrap();
        assert_eq!(m.alpha_slot(0, 0), &[3, 3, 0]);
        assert_eq!(m.alpha_slot(0, 1), &[2, 0, 0]);
        assert_eq!(m.alpha_slot(0, 2), &[0, 0, 0]);
        assert_eq!(m.c_mem, vec![1, 0, 5, 7]);
        let empty = compile(&ReactionNetwork::empty(), &lim3()).unwrap();
        assert!(empty.alpha_mem.iter().chain(&empty.beta_mem).all(|&a| a == 0));
        assert_eq!(empty.c_mem, vec![1, 0, 0, 0]);
        let r1 = compile(&rnet1(0), &EngineLimits::default()).unwrap();
        assert_eq!((r1.k_mem[0], r1.k_mem[1]), (1.0f32, 20.0f32));
        assert_eq!(r1.reaction_count, 2);
    }

    #[test]
    fn too_big_is_rejected() {
        let mut lim = lim3();
        lim.max_reactant_order = 1;
        let Err(HwError::ResourceExceeded(v)) = compile(&worked(5, 7, 2.0), &lim) else { panic!() };
        assert_eq!(v[0].bound(), "reactant order");
    }

    #[test]
    fn decompile_round_trip() {
        let m = compile(&rnet1(3), &EngineLimits::default()).unwrap();
        let d = decompile(&m).unwrap();
        assert_eq!(compile(&d, &EngineLimits::default()).unwrap(), m);
        assert_eq!(d.reactions()[1].k, 20.0);
        assert_eq!(d.species_name(SpeciesId(3)), "S3");
        let blank = RegisterMap::blank(lim3());
        assert_eq!(decompile(&blank).unwrap().species_count(), 0);
        let mut bad = compile(&worked(5, 7, 2.0), &lim3()).unwrap();
        let i = bad.alpha_index(0, 0, 0);
        bad.alpha_mem[i..i + 3].copy_from_slice(&[3, 0, 3]);
        assert!(matches!(decompile(&bad), Err(HwError::MalformedMap(_))));
        bad.alpha_mem[i..i + 3].copy_from_slice(&[3, 2, 0]);
        assert!(matches!(decompile(&bad), Err(HwError::MalformedMap(_))));
    }

    #[test]
    fn hls_update_and_propensity() {
        let cfg = HwConfig { limits: lim3(), ..HwConfig::default() };
        let mut e = HwEngine::new(worked(5, 7, 2.0), cfg.clone(), 1).unwrap();
        assert_eq!(e.propensity(0).0, 490.0);
        let before = e.cycles();
        assert_eq!(e.apply_reaction(0).unwrap(), 3);
        assert_eq!(e.cycles() - before, 3);
        assert_eq!(e.concentrations(), vec![1, 4, 5]);
        let mut e = HwEngine::new(worked(0, 1, 2.0), cfg, 1).unwrap();
        assert_eq!(e.propensity(0).0, 0.0);
        assert!(matches!(e.apply_reaction(0), Err(HwError::IneligibleReaction(_))));
    }

    #[test]
    fn source_reaction_and_constant_product() {
        let net = ReactionNetwork::builder().species("A", 65535).reaction("src", &[], &[("A", 1)], 3.5).build().unwrap();
        let mut e = HwEngine::new(net, HwConfig::default(), 1).unwrap();
        assert_eq!(e.propensity(0).0, 3.5);
        assert_eq!(e.apply_reaction(0).unwrap(), 1);
        assert_eq!(e.concentration(SpeciesId(1)), 65535);
        assert!(e.saturation().is_some());
        assert_eq!(e.register_map().c_mem[0], 1);
    }

    #[test]
    fn unchanged_propensity_keeps_schedule() {
        let net = ReactionNetwork::builder()
            .species("A", 10)
            .species("B", 10)
            .species("C", 0)
            .reaction("a", &[("A", 1)], &[("C", 1)], 1.0)
            .reaction("b", &[("B", 1), ("C", 1)], &[("B", 1), ("C", 2)], 1.0)
            .build()
            .unwrap();
        let mut e = HwEngine::new(net, HwConfig::default(), 5).unwrap();
        let t_b = e.next_time(1);
        e.adjust(SpeciesId(2), 0).unwrap();
        assert_eq!(e.next_time(1).to_bits(), t_b.to_bits());
    }

    #[test]
    fn matches_reference_on_rnet1() {
        let net = rnet1(200);
        let mut hw = HwEngine::new(net.clone(), HwConfig::default(), 42).unwrap();
        let mut sw = Engine::new(net, 42);
        for _ in 0..2000 {
            match (hw.step(), sw.step()) {
                (Step::Fired(a), Step::Fired(b)) => {
                    assert_eq!(a.reaction, b.reaction);
                    assert!((a.time - b.time).abs() <= 1e-5 * b.time.max(1e-3));
                }
                (Step::Quiescent, Step::Quiescent) => break,
                other => panic!("{other:?}"),
            }
        }
        assert_eq!(hw.concentrations(), sw.concentrations());
    }

    #[test]
    fn cost_model_ratios() {
        let mut b = ReactionNetwork::builder().species("X", 0).species("Y", 0);
        for i in 0..32 {
            b = b.reaction(&format!("r{i}"), &[("X", 1), ("Y", 1)], &[("X", 1)], 1.0);
        }
        let net = b.build().unwrap();
        let base = CycleCostModel::default();
        let serial = base.full_reschedule_cycles(&net) as f64;
        let cores = base.with_topology(Topology::PerReactionCores).full_reschedule_cycles(&net) as f64;
        let log = base.with_topology(Topology::PerReactionLog).full_reschedule_cycles(&net) as f64;
        for (got, want) in [(serial / cores, 1600.0 / 52.0), (cores / log, 52.0 / 24.0), (serial / log, 1600.0 / 24.0)] {
            assert!((got / want - 1.0).abs() <= 0.2, "{got} vs {want}");
        }
    }

    #[test]
    fn one_reaction_event_rate() {
        let net = ReactionNetwork::builder()
            .species("S", 0)
            .species("P", 0)
            .reaction("r0", &[("S", 1)], &[("P", 1)], 20.0)
            .build()
            .unwrap();
        let mut e = HwEngine::new(net, HwConfig::default(), 3).unwrap();
        let ev: Vec<_> =
            (0..1000).map(|i| InjectionEvent { time: i as f64 * 1e-3, species: SpeciesId(1), amount: 1 }).collect();
        let rep = hw_run(&mut e, 1.0, &ev, &[], &TraceConfig::default()).unwrap();
        assert!(rep.max_event_rate >= 100_000.0, "{}", rep.max_event_rate);
        let mut idle = HwEngine::new(ReactionNetwork::empty(), HwConfig::default(), 3).unwrap();
        let rep = hw_run(&mut idle, 1.0, &[], &[], &TraceConfig::default()).unwrap();
        assert_eq!((rep.cycles, rep.events), (0, 0));
    }

    #[test]
    fn register_writes() {
        let net = rnet1(0);
        let mut e = HwEngine::new(net.clone(), HwConfig::default(), 1).unwrap();
        let p = ReconfigPatch::new(vec![Edit::SetK { reaction: "r2".into(), k: 10.0 }]);
        assert_eq!(e.patch_registers(&p, CarryOver::MatchByName).unwrap(), 1);
        assert_eq!(e.register_map().k_mem[1], 10.0);
        assert_eq!(e.patch_registers(&ReconfigPatch::default(), CarryOver::MatchByName).unwrap(), 0);
        let pacer = ReactionNetwork::builder()
            .species("S", 0)
            .species("P", 0)
            .reaction("r0", &[("S", 1)], &[("P", 1)], 20.0)
            .build()
            .unwrap();
        let mut e = HwEngine::new(pacer, HwConfig::default(), 1).unwrap();
        let lim = EngineLimits::default();
        let writes = e.patch_registers(&ReconfigPatch::new(vec![Edit::ReplaceNetwork(net)]), CarryOver::MatchByName).unwrap();
        let bound = lim.max_reactions as u64 * lim.max_slots as u64 * (lim.max_reactant_order + lim.max_product_order) as u64
            + lim.max_reactions as u64
            + lim.max_species as u64;
        assert!(writes > 0 && writes <= bound, "{writes}");
        assert_eq!(e.concentration(SpeciesId(2)), 25000);
    }
}
