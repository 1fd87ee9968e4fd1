//! Reference stochastic engine: next-reaction method with propensity
//! rescaling, double-precision virtual time.

use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{
    CarryOver, EngineError, FiredEvent, ReactionEngine, ReconfigOutcome, SpeciesDelta,
};
use crate::network::{dependency_graph, species_consumers, Reaction, ReactionId, ReactionNetwork, SpeciesId};
use crate::patch::{self, Edit, PatchKind, ReconfigPatch};
use crate::rng::SimRng;

/// Mass-action propensity `k·∏ c^α`, or 0 when some reactant holds fewer
/// molecules than the reaction consumes.
pub fn propensity(r: &Reaction, c: &[u64]) -> f64 {
    let mut a = r.k;
    for t in &r.reactants {
        let x = c[t.species.index()];
        if x < t.count as u64 {
            return 0.0;
        }
        let xf = x as f64;
        for _ in 0..t.count {
            a *= xf;
        }
    }
    a
}

/// Index-based view of a network for the hot loop.
#[derive(Clone, Debug)]
pub(crate) struct Kinetics {
    pub k: Vec<f64>,
    pub reactants: Vec<Vec<(usize, u32)>>,
    pub delta: Vec<Arc<[SpeciesDelta]>>,
    pub delta_idx: Vec<Vec<(usize, i64)>>,
    pub deps: Vec<Vec<usize>>,
    pub consumers: Vec<Vec<usize>>,
}

impl Kinetics {
    pub fn new(net: &ReactionNetwork) -> Self {
        let g = dependency_graph(net);
        let mut kin = Kinetics {
            k: Vec::new(),
            reactants: Vec::new(),
            delta: Vec::new(),
            delta_idx: Vec::new(),
            deps: Vec::new(),
            consumers: species_consumers(net)
                .into_iter()
                .map(|v| v.into_iter().map(ReactionId::index).collect())
                .collect(),
        };
        for r in net.reactions() {
            kin.k.push(r.k);
            kin.reactants.push(r.reactants.iter().map(|t| (t.species.index(), t.count)).collect());
            let d = r.delta();
            kin.delta.push(d.iter().map(|&(species, delta)| SpeciesDelta { species, delta }).collect());
            kin.delta_idx.push(d.iter().map(|&(s, x)| (s.index(), x)).collect());
            kin.deps.push(g.dependents(r.id).iter().map(|x| x.index()).collect());
        }
        kin
    }

    #[inline]
    pub fn propensity(&self, r: usize, c: &[u64]) -> f64 {
        let mut a = self.k[r];
        for &(s, n) in &self.reactants[r] {
            let x = c[s];
            if x < n as u64 {
                return 0.0;
            }
            let xf = x as f64;
            for _ in 0..n {
                a *= xf;
            }
        }
        a
    }
}

/// Live state of the reference engine.
#[derive(Clone, Debug)]
pub struct Engine {
    net: ReactionNetwork,
    kin: Kinetics,
    c: Vec<u64>,
    next_time: Vec<f64>,
    prop: Vec<f64>,
    clock: f64,
    rng: SimRng,
    fire_counts: Vec<u64>,
}

impl Engine {
    /// Starts at the declared initial concentrations with kinetics stream 0
    /// of `seed`.
    pub fn new(net: ReactionNetwork, seed: u64) -> Self {
        Self::with_rng(net, SimRng::new(seed, 0))
    }

    pub fn with_rng(net: ReactionNetwork, rng: SimRng) -> Self {
        let c = net.initial_concentrations();
        let kin = Kinetics::new(&net);
        let n = net.reaction_count();
        let mut e = Engine {
            net,
            kin,
            c,
            next_time: vec![f64::INFINITY; n],
            prop: vec![0.0; n],
            clock: 0.0,
            rng,
            fire_counts: vec![0; n],
        };
        e.redraw_all();
        e
    }

    fn redraw_all(&mut self) {
        for r in 0..self.net.reaction_count() {
            self.prop[r] = 0.0;
            self.next_time[r] = f64::INFINITY;
            self.reschedule(r, true);
        }
    }

    pub fn next_times(&self) -> &[f64] {
        &self.next_time
    }

    pub fn propensities(&self) -> &[f64] {
        &self.prop
    }

    pub fn rng(&self) -> &SimRng {
        &self.rng
    }

    #[inline]
    fn reschedule(&mut self, r: usize, fresh: bool) {
        let a_new = self.kin.propensity(r, &self.c);
        let a_old = self.prop[r];
        if a_new <= 0.0 {
            self.next_time[r] = f64::INFINITY;
        } else if fresh || a_old <= 0.0 {
            self.next_time[r] = self.clock + self.rng.exp1() / a_new;
        } else if a_new != a_old {
            self.next_time[r] = self.clock + (self.next_time[r] - self.clock) * (a_old / a_new);
        }
        self.prop[r] = a_new;
    }

    fn earliest(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (r, &t) in self.next_time.iter().enumerate() {
            if t < best.map_or(f64::INFINITY, |b| b.1) {
                best = Some((r, t));
            }
        }
        best
    }

    fn reconfigure_parametric(&mut self, patch: &ReconfigPatch, new_net: ReactionNetwork) {
        let mut touched: BTreeSet<usize> = BTreeSet::new();
        for e in &patch.edits {
            match e {
                Edit::SetK { reaction, .. } => {
                    let r = new_net.reaction_id(reaction).expect("validated").index();
                    self.kin.k[r] = new_net.reactions()[r].k;
                    touched.insert(r);
                }
                Edit::SetConcentration { species, value } => {
                    let s = new_net.species_id(species).expect("validated").index();
                    self.c[s] = *value;
                    touched.extend(self.kin.consumers[s].iter().copied());
                }
                _ => unreachable!("parametric patch"),
            }
        }
        self.net = new_net;
        for r in touched {
            self.reschedule(r, false);
        }
    }

    fn reconfigure_structural(&mut self, new_net: ReactionNetwork, policy: CarryOver) {
        let c = new_net
            .species()
            .iter()
            .map(|s| match (policy, self.net.species_id(&s.name)) {
                (CarryOver::MatchByName, Some(old)) => self.c[old.index()],
                _ => s.initial,
            })
            .collect();
        let counts = new_net
            .reactions()
            .iter()
            .map(|r| self.net.reaction_id(&r.name).map_or(0, |o| self.fire_counts[o.index()]))
            .collect();
        let n = new_net.reaction_count();
        self.kin = Kinetics::new(&new_net);
        self.net = new_net;
        self.c = c;
        self.fire_counts = counts;
        self.next_time = vec![f64::INFINITY; n];
        self.prop = vec![0.0; n];
        self.redraw_all();
    }

    /// Overwrites concentrations without touching the clock; every schedule
    /// is redrawn.
    pub fn set_concentrations(&mut self, c: &[u64]) {
        assert_eq!(c.len(), self.c.len());
        self.c.copy_from_slice(c);
        self.redraw_all();
    }
}

impl ReactionEngine for Engine {
    fn network(&self) -> &ReactionNetwork {
        &self.net
    }

    fn clock(&self) -> f64 {
        self.clock
    }

    fn concentration(&self, s: SpeciesId) -> u64 {
        self.c[s.index()]
    }

    fn concentrations(&self) -> Vec<u64> {
        self.c.clone()
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
        for &(s, d) in &self.kin.delta_idx[r] {
            self.c[s] = (self.c[s] as i64 + d) as u64;
        }
        self.fire_counts[r] += 1;
        self.reschedule(r, true);
        for i in 0..self.kin.deps[r].len() {
            let d = self.kin.deps[r][i];
            if d != r {
                self.reschedule(d, false);
            }
        }
        Some(FiredEvent { time: t, reaction: ReactionId(r as u16), delta: self.kin.delta[r].clone() })
    }

    fn advance_to(&mut self, t: f64) {
        debug_assert!(self.next_event_time() >= t);
        if t > self.clock {
            self.clock = t;
        }
    }

    fn adjust(&mut self, s: SpeciesId, amount: i64) -> Result<(), EngineError> {
        if s.0 == 0 || s.index() >= self.c.len() {
            return Err(EngineError::UnknownSpecies(s));
        }
        let i = s.index();
        let cur = self.c[i];
        let next = cur as i128 + amount as i128;
        if next < 0 {
            return Err(EngineError::NegativeConcentration {
                species: self.net.species_name(s).to_string(),
                current: cur,
                amount,
            });
        }
        if amount == 0 {
            return Ok(());
        }
        self.c[i] = next as u64;
        for j in 0..self.kin.consumers[i].len() {
            let r = self.kin.consumers[i][j];
            self.reschedule(r, false);
        }
        Ok(())
    }

    fn reconfigure(&mut self, patch: &ReconfigPatch, policy: CarryOver) -> Result<ReconfigOutcome, EngineError> {
        let kind = patch.kind();
        let outcome = ReconfigOutcome { time: self.clock, kind, edits: patch.edits.len(), register_writes: 0 };
        if kind == PatchKind::Empty {
            return Ok(outcome);
        }
        let new_net = patch::apply(&self.net, patch)?;
        match kind {
            PatchKind::Parametric => self.reconfigure_parametric(patch, new_net),
            _ => self.reconfigure_structural(new_net, policy),
        }
        Ok(outcome)
    }

    fn fire_counts(&self) -> &[u64] {
        &self.fire_counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_until, InjectionEvent, Step, TraceConfig};

    fn rnet1(s: u64, e: u64, es: u64) -> ReactionNetwork {
        ReactionNetwork::builder()
            .species("S", s)
            .species("E", e)
            .species("ES", es)
            .species("P", 0)
            .reaction("r1", &[("S", 1), ("E", 1)], &[("ES", 1)], 1.0)
            .reaction("r2", &[("ES", 1)], &[("E", 1), ("P", 1)], 20.0)
            .input("S")
            .output("P")
            .build()
            .unwrap()
    }

    #[test]
    fn propensity_examples() {
        let n = rnet1(0, 0, 100);
        assert_eq!(propensity(&n.reactions()[1], &n.initial_concentrations()), 2000.0);
        assert_eq!(propensity(&n.reactions()[0], &n.initial_concentrations()), 0.0);
        let n3 = ReactionNetwork::builder()
            .species("S", 200)
            .species("D", 0)
            .reaction("r3", &[("S", 2)], &[("S", 1), ("D", 1)], 0.001)
            .build()
            .unwrap();
        let a = propensity(&n3.reactions()[0], &n3.initial_concentrations());
        assert!((a - 40.0).abs() < 1e-9);
        let guard = ReactionNetwork::builder().species("S", 1).reaction("r", &[("S", 2)], &[], 1.0).build().unwrap();
        assert_eq!(propensity(&guard.reactions()[0], &[1]), 0.0);
    }

    #[test]
    fn init_schedules() {
        let e = Engine::new(rnet1(0, 25000, 0), 1);
        assert!(e.next_times().iter().all(|t| t.is_infinite()));
        let pacer = ReactionNetwork::builder()
            .species("S", 1000)
            .species("P", 0)
            .reaction("r0", &[("S", 1)], &[("P", 1)], 20.0)
            .build()
            .unwrap();
        let a = Engine::new(pacer.clone(), 9);
        let b = Engine::new(pacer, 9);
        assert_eq!(a.propensities(), &[20000.0]);
        assert!(a.next_times()[0].is_finite());
        assert_eq!(a.next_times()[0].to_bits(), b.next_times()[0].to_bits());
    }

    #[test]
    fn single_binding_step() {
        let mut e = Engine::new(rnet1(1, 1, 0), 3);
        assert!(e.next_times()[0].is_finite() && e.next_times()[1].is_infinite());
        let Step::Fired(f) = e.step() else { panic!() };
        assert_eq!(f.reaction, ReactionId(0));
        assert_eq!(e.concentrations(), vec![0, 0, 1, 0]);
        assert!(e.next_times()[0].is_infinite());
        assert!(e.next_times()[1].is_finite());
        assert_eq!(e.clock(), f.time);
    }

    #[test]
    fn quiescent_keeps_clock() {
        let mut e = Engine::new(rnet1(0, 5, 0), 3);
        assert_eq!(e.step(), Step::Quiescent);
        assert_eq!(e.clock(), 0.0);
    }

    #[test]
    fn injection_ordering_and_underflow() {
        let mut e = Engine::new(rnet1(0, 5, 1), 4);
        let t_fire = e.next_times()[1];
        let mut fired = Vec::new();
        e.inject(&InjectionEvent { time: t_fire + 1.0, species: SpeciesId(1), amount: 1500 }, |f| fired.push(f.time))
            .unwrap();
        assert_eq!(fired.first().copied(), Some(t_fire));
        assert_eq!(e.clock(), t_fire + 1.0);
        let before = e.concentration(SpeciesId(1));
        let err = e.adjust(SpeciesId(1), -(before as i64) - 1).unwrap_err();
        assert!(matches!(err, EngineError::NegativeConcentration { .. }));
        assert_eq!(e.concentration(SpeciesId(1)), before);
    }

    #[test]
    fn tokens_are_conserved() {
        let mut e = Engine::new(rnet1(5000, 300, 0), 11);
        for _ in 0..20000 {
            if e.step() == Step::Quiescent {
                break;
            }
            assert_eq!(e.concentration(SpeciesId(2)) + e.concentration(SpeciesId(3)), 300);
        }
    }

    #[test]
    fn empty_run_is_empty() {
        let mut e = Engine::new(rnet1(0, 5, 0), 1);
        let tr = run_until(&mut e, 10.0, &[], &TraceConfig::default()).unwrap();
        assert!(tr.records.is_empty());
        assert_eq!(e.clock(), 10.0);
    }

    #[test]
    fn parametric_patch_touches_one_schedule() {
        let mut e = Engine::new(rnet1(50, 100, 100), 2);
        let before = e.next_times().to_vec();
        let p = ReconfigPatch::new(vec![Edit::SetK { reaction: "r2".into(), k: 10.0 }]);
        let out = e.reconfigure(&p, CarryOver::MatchByName).unwrap();
        assert_eq!(out.kind, PatchKind::Parametric);
        assert_eq!(e.next_times()[0], before[0]);
        assert!((e.next_times()[1] - before[1] * 2.0).abs() < 1e-12 * before[1]);
    }

    #[test]
    fn structural_patch_carries_matched_species() {
        let pacer = ReactionNetwork::builder()
            .species("S", 700)
            .species("P", 0)
            .reaction("r0", &[("S", 1)], &[("P", 1)], 20.0)
            .input("S")
            .output("P")
            .build()
            .unwrap();
        let mut e = Engine::new(pacer.clone(), 5);
        for _ in 0..10 {
            e.step();
        }
        let t = e.clock();
        let s_before = e.concentration(SpeciesId(1));
        let p = patch::diff(&pacer, &rnet1(0, 25000, 0));
        e.reconfigure(&p, CarryOver::MatchByName).unwrap();
        let n = e.network();
        assert_eq!(e.concentration(n.species_id("S").unwrap()), s_before);
        assert_eq!(e.concentration(n.species_id("E").unwrap()), 25000);
        assert_eq!(e.clock(), t);
        assert!(e.next_times().iter().all(|&x| x >= t));
    }

    #[test]
    fn empty_patch_keeps_state() {
        let mut e = Engine::new(rnet1(50, 100, 100), 2);
        let before = (e.concentrations(), e.next_times().to_vec());
        let out = e.reconfigure(&ReconfigPatch::default(), CarryOver::MatchByName).unwrap();
        assert_eq!(out.kind, PatchKind::Empty);
        assert_eq!(before, (e.concentrations(), e.next_times().to_vec()));
    }

    #[test]
    fn conflicting_patch_is_rejected() {
        let mut e = Engine::new(rnet1(50, 100, 100), 2);
        let p = ReconfigPatch::new(vec![Edit::SetK { reaction: "zz".into(), k: 10.0 }]);
        assert!(matches!(e.reconfigure(&p, CarryOver::MatchByName), Err(EngineError::PatchConflict(_))));
    }
}
