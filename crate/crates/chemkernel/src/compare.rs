//! Cross-checks between the reference engine, the hardware model and the
//! fluid view on one network under constant inflow.

use chemkernel_core::engine::{run_schedule, FiredEvent, InjectionEvent, ReactionEngine, Trace, TraceConfig, TraceRecord};
use chemkernel_core::fluid::{self, FluidError, Tolerances};
use chemkernel_core::hw::{HwConfig, HwEngine, HwError, Saturation};
use chemkernel_core::engine::EngineError;
use chemkernel_core::{Engine, ReactionId, ReactionNetwork, SpeciesId};

#[derive(Debug, thiserror::Error)]
pub enum CompareError {
    #[error("inflow names unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("invalid run: {0}")]
    Invalid(String),
    #[error("hardware engine: {0}")]
    Hw(#[from] HwError),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("fluid: {0}")]
    Fluid(#[from] FluidError),
}

/// Constant inflow delivered as injections of `rate · dt` every `dt`.
#[derive(Clone, Debug)]
pub struct InflowRun {
    pub network: ReactionNetwork,
    pub inflow: Vec<(String, f64)>,
    pub duration: f64,
    pub dt: f64,
    pub window: f64,
    pub seed: u64,
}

impl InflowRun {
    pub fn new(network: ReactionNetwork, inflow: Vec<(String, f64)>, duration: f64, seed: u64) -> Self {
        InflowRun { network, inflow, duration, dt: 1e-3, window: 0.1, seed }
    }

    pub fn resolved_inflow(&self) -> Result<Vec<(SpeciesId, f64)>, CompareError> {
        self.inflow
            .iter()
            .map(|(n, r)| {
                let id = self.network.species_id(n).ok_or_else(|| CompareError::UnknownSpecies(n.clone()))?;
                if !(r.is_finite() && *r >= 0.0) {
                    return Err(CompareError::Invalid(format!("inflow rate {r} for `{n}`")));
                }
                Ok((id, *r))
            })
            .collect()
    }

    fn check(&self) -> Result<(), CompareError> {
        for (v, what) in [(self.duration, "duration"), (self.dt, "injection period"), (self.window, "window")] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CompareError::Invalid(format!("{what} must be positive")));
            }
        }
        Ok(())
    }

    /// Injections at `k·dt` for `k = 0, 1, ...` below the duration. Amounts
    /// are differences of the rounded cumulative total, so the long-run
    /// mean matches the rate exactly.
    pub fn injections(&self) -> Result<Vec<InjectionEvent>, CompareError> {
        self.check()?;
        let inflow = self.resolved_inflow()?;
        let ticks = (self.duration / self.dt).ceil() as u64;
        let mut out = Vec::new();
        for k in 0..ticks {
            let t = k as f64 * self.dt;
            if t >= self.duration {
                break;
            }
            for &(s, rate) in &inflow {
                let cum = |k: u64| (rate * self.dt * k as f64).round() as i64;
                let amount = cum(k + 1) - cum(k);
                if amount > 0 {
                    out.push(InjectionEvent { time: t, species: s, amount });
                }
            }
        }
        Ok(out)
    }

    /// Declared outputs, or every sink species when none are declared.
    pub fn output_species(&self) -> Vec<SpeciesId> {
        let net = &self.network;
        let declared = net.io().outputs.clone();
        if !declared.is_empty() {
            return declared;
        }
        net.sink_species()
            .iter()
            .enumerate()
            .filter(|(_, s)| **s)
            .map(|(i, _)| SpeciesId::from_index(i))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowError {
    pub t: f64,
    pub stochastic: f64,
    pub fluid: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluidComparison {
    pub outputs: Vec<String>,
    pub windows: Vec<WindowError>,
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
}

fn output_total(values: &[Option<u64>]) -> f64 {
    values.iter().map(|v| v.unwrap_or(0) as f64).sum()
}

/// Windowed output rate of `engine` against the fluid trajectory. Windows
/// where the fluid rate is zero are skipped.
pub fn fluid_vs_engine<E: ReactionEngine>(engine: &mut E, run: &InflowRun) -> Result<FluidComparison, CompareError> {
    run.check()?;
    let events = run.injections()?;
    let outs = run.output_species();
    let names: Vec<String> = outs.iter().map(|&s| run.network.species_name(s).to_string()).collect();
    let cfg = TraceConfig { taps: names.clone(), sample_period: Some(run.window), record_firings: false, record_injections: false };
    let mut trace = Trace { taps: names.clone(), records: Vec::new() };
    run_schedule(engine, run.duration, &events, &[], &cfg, &mut trace)?;
    let samples: Vec<(f64, f64)> = trace
        .records
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Sample { time, values } => Some((*time, output_total(values))),
            _ => None,
        })
        .collect();

    let sys = fluid::build_odes(&run.network, &run.resolved_inflow()?)?;
    let c0: Vec<f64> = run.network.initial_concentrations().iter().map(|&c| c as f64).collect();
    let times: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let traj = fluid::integrate(&sys, &c0, (0.0, run.duration), &times, &Tolerances::default())?;
    let fluid_out: Vec<f64> = traj.states.iter().map(|c| outs.iter().map(|s| c[s.index()]).sum()).collect();

    let mut windows = Vec::new();
    for i in 1..samples.len() {
        let dt = samples[i].0 - samples[i - 1].0;
        windows.push(WindowError {
            t: samples[i].0,
            stochastic: (samples[i].1 - samples[i - 1].1) / dt,
            fluid: (fluid_out[i] - fluid_out[i - 1]) / dt,
        });
    }
    let errs: Vec<f64> = windows
        .iter()
        .filter(|w| w.fluid > 0.0)
        .map(|w| (w.stochastic - w.fluid).abs() / w.fluid)
        .collect();
    let (mean_rel_error, max_rel_error) = if errs.is_empty() {
        (0.0, 0.0)
    } else {
        (errs.iter().sum::<f64>() / errs.len() as f64, errs.iter().cloned().fold(0.0, f64::max))
    };
    Ok(FluidComparison { outputs: names, windows, mean_rel_error, max_rel_error })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    /// Position in the firing sequence.
    pub index: usize,
    /// Firing from each engine at that position; `None` once it ran out.
    pub ssa: Option<(ReactionId, f64)>,
    pub hw: Option<(ReactionId, f64)>,
}

impl Divergence {
    pub fn time(&self) -> f64 {
        match (self.ssa, self.hw) {
            (Some(a), Some(b)) => a.1.min(b.1),
            (Some(a), None) => a.1,
            (None, Some(b)) => b.1,
            (None, None) => f64::NAN,
        }
    }
}

/// First position where the reaction sequences differ.
pub fn first_divergence(a: &[FiredEvent], b: &[FiredEvent]) -> Option<Divergence> {
    let n = a.len().max(b.len());
    (0..n).find_map(|i| {
        let x = a.get(i).map(|f| (f.reaction, f.time));
        let y = b.get(i).map(|f| (f.reaction, f.time));
        (x.map(|v| v.0) != y.map(|v| v.0)).then_some(Divergence { index: i, ssa: x, hw: y })
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub ssa_firings: usize,
    pub hw_firings: usize,
    pub divergence: Option<Divergence>,
    /// Largest relative firing-time gap over the common prefix.
    pub max_time_gap: f64,
    pub final_equal: bool,
    pub hw_saturation: Option<Saturation>,
    pub hw_cycles: u64,
    pub fluid: FluidComparison,
}

impl CompareReport {
    pub fn summary(&self, net: &ReactionNetwork) -> String {
        let mut s = match &self.divergence {
            None => format!("no divergence over {} firings", self.ssa_firings),
            Some(d) => {
                let show = |e: Option<(ReactionId, f64)>| match e {
                    Some((r, t)) => format!("{} at t={t:.6}", net.reactions()[r.index()].name),
                    None => "nothing".to_string(),
                };
                format!("first divergence at firing #{}: ssa {} vs hw {}", d.index, show(d.ssa), show(d.hw))
            }
        };
        if let Some(sat) = self.hw_saturation {
            s += &format!("; hw saturated {} at t={:.6}", net.species_name(sat.species), sat.time);
        }
        if !self.final_equal {
            s += "; final concentrations differ";
        }
        s += &format!(
            "; fluid error {:.1}% mean, {:.1}% max",
            100.0 * self.fluid.mean_rel_error,
            100.0 * self.fluid.max_rel_error
        );
        s
    }
}

fn firings_of<E: ReactionEngine>(engine: &mut E, run: &InflowRun) -> Result<(Vec<FiredEvent>, Vec<u64>), CompareError> {
    let events = run.injections()?;
    let cfg = TraceConfig { taps: Vec::new(), sample_period: None, record_firings: true, record_injections: false };
    let mut trace = Trace::default();
    run_schedule(engine, run.duration, &events, &[], &cfg, &mut trace)?;
    Ok((trace.firings().cloned().collect(), engine.concentrations()))
}

/// Runs the reference engine, the hardware model and the fluid view on the
/// same inflow concurrently.
pub fn compare(run: &InflowRun, hw_cfg: HwConfig) -> Result<CompareReport, CompareError> {
    run.check()?;
    run.resolved_inflow()?;
    let mut hw = HwEngine::new(run.network.clone(), hw_cfg, run.seed)?;
    let (ssa_res, hw_res, fluid_res) = std::thread::scope(|s| {
        let a = s.spawn(|| firings_of(&mut Engine::new(run.network.clone(), run.seed), run));
        let b = s.spawn(|| firings_of(&mut hw, run).map(|r| (r, ())));
        let c = s.spawn(|| fluid_vs_engine(&mut Engine::new(run.network.clone(), run.seed), run));
        (a.join().expect("ssa thread"), b.join().expect("hw thread"), c.join().expect("fluid thread"))
    });
    let (ssa, ssa_final) = ssa_res?;
    let ((hwf, hw_final), ()) = hw_res?;
    let fluid = fluid_res?;
    let divergence = first_divergence(&ssa, &hwf);
    let common = divergence.as_ref().map_or(ssa.len().min(hwf.len()), |d| d.index);
    let max_time_gap = ssa[..common]
        .iter()
        .zip(&hwf[..common])
        .map(|(a, b)| (a.time - b.time).abs() / a.time.abs().max(1e-9))
        .fold(0.0, f64::max);
    Ok(CompareReport {
        ssa_firings: ssa.len(),
        hw_firings: hwf.len(),
        divergence,
        max_time_gap,
        final_equal: ssa_final == hw_final,
        hw_saturation: hw.saturation(),
        hw_cycles: hw.cycles(),
        fluid,
    })
}
