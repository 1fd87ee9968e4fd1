//! Command-line front end. [`run`] returns the process exit code:
//! 0 success, 1 usage or input error, 2 resource validation, 3 runtime.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use chemkernel_core::engine::{run_schedule, ReactionEngine, TraceConfig, TraceRecord, TraceSink};
use chemkernel_core::fluid::{self, FluidError, SteadyOptions, SteadyState, Tolerances};
use chemkernel_core::hw::{self, CycleCostModel, HwConfig, HwEngine, HwError, ScheduleMode, Topology};
use chemkernel_core::traffic::{self, RunOptions, SimError};
use chemkernel_core::engine::EngineError;
use chemkernel_core::{Engine, EngineLimits, ReactionNetwork};

use crate::compare::{self, CompareError, InflowRun};
use crate::jsonl::{JsonlTrace, Pacer};
use crate::metrics::{self, Format};
use crate::scenario_file::{self, ScenarioFileError};
use crate::{cahw, LoadError, Provenance};

#[derive(Parser, Debug)]
#[command(name = "chemkernel", version, about = "Run, compile and analyze chemical-algorithm reaction networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compile a network into a CAHW register map and print its listing.
    Compile(CompileArgs),
    /// Run a network or a queueing scenario on the reference or hardware engine.
    Run(RunArgs),
    /// Fluid analysis: trajectory, fixed point, eigenvalues.
    Analyze(AnalyzeArgs),
    /// Run reference, hardware and fluid engines side by side.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
pub struct HwArgs {
    /// Engine capacities, e.g. `R=32,S=255,C=16`. Keys: R, PSI, S, C, ALPHA, BETA.
    #[arg(long, value_name = "K=V,...")]
    pub limits: Option<String>,
    /// Cost-model topology of the hardware engine.
    #[arg(long, default_value = "serial", value_parser = ["serial", "per-core", "log"])]
    pub topology: String,
    /// Schedule with `1/a` instead of sampled exponential intervals.
    #[arg(long)]
    pub expected_interval: bool,
}

#[derive(Args, Debug)]
pub struct CompileArgs {
    /// `.cadl` network (or `builtin:<name>`).
    pub network: String,
    /// Output file; defaults to the input with a `.cahw` extension.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_name = "K=V,...")]
    pub limits: Option<String>,
    /// Suppress the listing.
    #[arg(short, long)]
    pub quiet: bool,
    /// Listing style: plain lines or one JSON object per cell.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineKind {
    Ssa,
    Hw,
}

impl EngineKind {
    fn as_str(self) -> &'static str {
        match self {
            EngineKind::Ssa => "ssa",
            EngineKind::Hw => "hw",
        }
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// `.cadl`, `.cahw` or `builtin:<name>`; replaces the scenario network when both are given.
    pub network: Option<String>,
    /// Builtin scenario name or scenario file.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, value_enum, default_value_t = EngineKind::Ssa)]
    pub engine: EngineKind,
    #[arg(long, env = "CHEMKERNEL_SEED")]
    pub seed: Option<u64>,
    /// Virtual run length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Reconfiguration at a virtual time, `t=SEC:FILE`; repeatable.
    #[arg(long = "patch", value_name = "t=SEC:FILE")]
    pub patches: Vec<String>,
    /// Species to sample; repeatable.
    #[arg(long = "tap")]
    pub taps: Vec<String>,
    /// Constant inflow `S=RATE` (molecules/s) for network runs; repeatable.
    #[arg(long = "inflow", value_name = "S=RATE")]
    pub inflows: Vec<String>,
    /// Tap sampling period for network runs.
    #[arg(long, default_value_t = 0.1)]
    pub sample_period: f64,
    /// Output directory.
    #[arg(long, default_value = "chemkernel-out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Record every firing and injection in the trace.
    #[arg(long)]
    pub trace_firings: bool,
    /// Pace virtual time to wall time.
    #[arg(long)]
    pub realtime: bool,
    #[command(flatten)]
    pub hw: HwArgs,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    pub network: String,
    /// Constant inflow `S=RATE`; repeatable.
    #[arg(long = "inflow", value_name = "S=RATE")]
    pub inflows: Vec<String>,
    /// End of the trajectory; defaults to ten slowest time constants.
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub samples: usize,
    /// Trajectory file; defaults to `<network>-trajectory.<format>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    pub network: String,
    #[arg(long = "inflow", value_name = "S=RATE")]
    pub inflows: Vec<String>,
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    #[arg(long, env = "CHEMKERNEL_SEED")]
    pub seed: Option<u64>,
    /// Injection period for the stochastic engines.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Output-rate window.
    #[arg(long, default_value_t = 0.1)]
    pub window: f64,
    /// Per-window rates; not written unless given.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub hw: HwArgs,
}

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<ScenarioFileError> for Failure {
    fn from(e: ScenarioFileError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<HwError> for Failure {
    fn from(e: HwError) -> Self {
        match e {
            HwError::ResourceExceeded(_) | HwError::CoefficientRange { .. } => Failure::Validation(e.to_string()),
            HwError::MalformedMap(_) => Failure::Usage(e.to_string()),
            HwError::IneligibleReaction(_) => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::ResourceExceeded(_) => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(_) => Failure::Usage(e.to_string()),
            SimError::Engine(inner) => inner.into(),
            SimError::UnboundSpecies { .. } => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<FluidError> for Failure {
    fn from(e: FluidError) -> Self {
        match e {
            FluidError::UnknownSpecies(_) | FluidError::InvalidInput(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(format!("integrator: {e}")),
        }
    }
}

impl From<CompareError> for Failure {
    fn from(e: CompareError) -> Self {
        match e {
            CompareError::UnknownSpecies(_) | CompareError::Invalid(_) => Failure::Usage(e.to_string()),
            CompareError::Hw(h) => h.into(),
            CompareError::Engine(x) => x.into(),
            CompareError::Fluid(f) => f.into(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Parses `R=32,S=255` into limits over the defaults.
pub fn parse_limits(spec: Option<&str>) -> Result<EngineLimits, Failure> {
    let mut lim = EngineLimits::default();
    let Some(spec) = spec else { return Ok(lim) };
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| Failure::Usage(format!("limit `{item}` is not K=V")))?;
        let v: u16 = v.trim().parse().map_err(|_| Failure::Usage(format!("limit `{item}` has a bad value")))?;
        let slot = match k.trim().to_ascii_uppercase().as_str() {
            "R" => &mut lim.max_reactions,
            "PSI" | "P" => &mut lim.max_slots,
            "S" => &mut lim.max_species,
            "C" => &mut lim.concentration_bits,
            "ALPHA" | "A" => &mut lim.max_reactant_order,
            "BETA" | "B" => &mut lim.max_product_order,
            "K" => &mut lim.k_bits,
            other => return Err(Failure::Usage(format!("unknown limit `{other}`"))),
        };
        *slot = v;
    }
    lim.check().map_err(|f| Failure::Usage(format!("invalid limits: {f}")))?;
    Ok(lim)
}

fn hw_config(a: &HwArgs) -> Result<HwConfig, Failure> {
    let topology = Topology::parse(&a.topology).ok_or_else(|| Failure::Usage(format!("unknown topology `{}`", a.topology)))?;
    Ok(HwConfig {
        limits: parse_limits(a.limits.as_deref())?,
        cost: CycleCostModel::default().with_topology(topology),
        mode: if a.expected_interval { ScheduleMode::ExpectedInterval } else { ScheduleMode::Sampled },
    })
}

/// `S=RATE` pairs; rates accept `k`, `M`, `G` suffixes.
pub fn parse_inflows(items: &[String]) -> Result<Vec<(String, f64)>, Failure> {
    items
        .iter()
        .map(|it| {
            let (s, r) = it.split_once('=').ok_or_else(|| Failure::Usage(format!("inflow `{it}` is not S=RATE")))?;
            let rate = scenario_file::parse_rate(r.trim()).ok_or_else(|| Failure::Usage(format!("inflow `{it}` has a bad rate")))?;
            Ok((s.trim().to_string(), rate))
        })
        .collect()
}

/// `t=SEC:FILE` (the `t=` is optional).
pub fn parse_patch_arg(s: &str) -> Result<(f64, String), Failure> {
    let body = s.strip_prefix("t=").unwrap_or(s);
    let (t, file) = body.split_once(':').ok_or_else(|| Failure::Usage(format!("patch `{s}` is not t=SEC:FILE")))?;
    let t: f64 = t.parse().map_err(|_| Failure::Usage(format!("patch `{s}` has a bad time")))?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Failure::Usage(format!("patch `{s}` has a bad time")));
    }
    Ok((t, file.to_string()))
}

/// Entry point; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let res = match cli.command {
        Command::Compile(a) => cmd_compile(a),
        Command::Run(a) => cmd_run(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match res {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("chemkernel: {}", f.message());
            f.code()
        }
    }
}

fn cmd_compile(a: CompileArgs) -> Result<(), Failure> {
    let net = crate::load_network(&a.network)?;
    let lim = parse_limits(a.limits.as_deref())?;
    let map = hw::compile(&net, &lim)?;
    let out = a.output.clone().unwrap_or_else(|| {
        let name = a.network.strip_prefix("builtin:").unwrap_or(&a.network);
        Path::new(name).with_extension("cahw")
    });
    std::fs::write(&out, cahw::encode(&map)).map_err(io_err(&out))?;
    if !a.quiet {
        let listing = cahw::listing(&map, &net);
        match a.format {
            Format::Csv => print!("{listing}"),
            Format::Jsonl => {
                for line in listing.lines().filter(|l| !l.starts_with('#')) {
                    let (cell, note) = line.split_once(" ; ").unwrap_or((line, ""));
                    let (name, value) = cell.split_once('=').unwrap_or((cell, ""));
                    println!("{}", json!({"cell": name, "value": value, "note": note}));
                }
            }
        }
    }
    eprintln!("wrote {} ({} cells)", out.display(), map.cell_count());
    Ok(())
}

/// Trace file plus optional wall-clock pacing.
struct RunSink {
    trace: JsonlTrace<BufWriter<File>>,
    pacer: Option<Pacer>,
    samples: Vec<(f64, Vec<Option<u64>>)>,
    keep_samples: bool,
}

impl TraceSink for RunSink {
    fn record(&mut self, rec: &TraceRecord, net: &ReactionNetwork) {
        self.trace.record(rec, net);
        if let Some(p) = &mut self.pacer {
            p.record(rec, net);
        }
        if let (true, TraceRecord::Sample { time, values }) = (self.keep_samples, rec) {
            self.samples.push((*time, values.clone()));
        }
    }
}

enum AnyEngine {
    Ssa(Box<Engine>),
    Hw(Box<HwEngine>),
}

impl AnyEngine {
    fn new(kind: EngineKind, net: ReactionNetwork, seed: u64, hw: &HwArgs) -> Result<Self, Failure> {
        Ok(match kind {
            EngineKind::Ssa => AnyEngine::Ssa(Box::new(Engine::new(net, seed))),
            EngineKind::Hw => AnyEngine::Hw(Box::new(HwEngine::new(net, hw_config(hw)?, seed)?)),
        })
    }

    fn stats(&self) -> Option<serde_json::Value> {
        match self {
            AnyEngine::Ssa(_) => None,
            AnyEngine::Hw(e) => {
                let cpe = if e.events() == 0 { 0.0 } else { e.cycles() as f64 / e.events() as f64 };
                Some(json!({
                    "cycles": e.cycles(),
                    "events": e.events(),
                    "cycles_per_event": cpe,
                    "max_event_rate": if cpe > 0.0 { e.config().cost.clock_hz / cpe } else { f64::INFINITY },
                    "topology": e.config().cost.topology.as_str(),
                    "saturation": e.saturation().map(|s| json!({"species": e.network().species_name(s.species), "t": s.time})),
                }))
            }
        }
    }
}

macro_rules! with_engine {
    ($e:expr, $x:ident => $body:expr) => {
        match $e {
            AnyEngine::Ssa($x) => $body,
            AnyEngine::Hw($x) => $body,
        }
    };
}

fn load_scenario(name: &str) -> Result<traffic::Scenario, Failure> {
    if let Some(sc) = traffic::builtin(name.strip_prefix("builtin:").unwrap_or(name)) {
        return Ok(sc);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(Failure::Usage(format!(
            "scenario `{name}` is neither a file nor a builtin ({})",
            traffic::BUILTIN_SCENARIOS.join(", ")
        )));
    }
    Ok(scenario_file::load_scenario(path)?)
}

fn write_table(table: &metrics::Table, dir: &Path, stem: &str, prov: &Provenance, fmt: Format) -> Result<PathBuf, Failure> {
    let path = dir.join(format!("{stem}.{}", fmt.extension()));
    let mut w = create(&path)?;
    table.write(&mut w, prov, fmt).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    if a.scenario.is_none() && a.network.is_none() {
        return Err(Failure::Usage("run needs a network or --scenario".into()));
    }
    let cli_patches = a.patches.iter().map(|p| parse_patch_arg(p)).collect::<Result<Vec<_>, _>>()?;
    let mut scenario = a.scenario.as_deref().map(load_scenario).transpose()?;
    let net = match (&a.network, &scenario) {
        (Some(n), _) => crate::load_network(n)?,
        (None, Some(sc)) => sc.network.clone(),
        (None, None) => unreachable!(),
    };
    let seed = a.seed.or(scenario.as_ref().map(|s| s.seed)).unwrap_or(DEFAULT_SEED);
    let prov = Provenance::new(seed, &net, a.engine.as_str());
    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let trace_path = a.out.join("trace.jsonl");

    if let Some(sc) = scenario.as_mut() {
        sc.network = net.clone();
        sc.seed = seed;
        if let Some(d) = a.duration {
            sc.duration = d;
        }
        sc.taps.extend(a.taps.iter().cloned());
        sc.patches = crate::merge_patches(&net, &sc.patches, &cli_patches)?;
        sc.validate()?;
        if !a.inflows.is_empty() {
            return Err(Failure::Usage("--inflow applies to network runs; scenarios drive inputs from queues".into()));
        }
    }

    let taps: Vec<String> = match &scenario {
        Some(sc) => sc.taps.clone(),
        None if a.taps.is_empty() => net.species().iter().map(|s| s.name.clone()).collect(),
        None => a.taps.clone(),
    };
    let mut engine = AnyEngine::new(a.engine, net.clone(), seed, &a.hw)?;
    let trace = JsonlTrace::new(create(&trace_path)?, &prov, &taps).map_err(io_err(&trace_path))?;
    let mut sink = RunSink { trace, pacer: a.realtime.then(|| Pacer::new(0.0)), samples: Vec::new(), keep_samples: scenario.is_none() };

    let summary = if let Some(sc) = &scenario {
        let opts = RunOptions { record_firings: a.trace_firings, record_injections: a.trace_firings };
        let rep = with_engine!(&mut engine, e => traffic::run_scenario_with(e.as_mut(), sc, &mut sink, opts))?;
        let metrics_path = write_table(&metrics::queue_table(&rep), &a.out, "metrics", &prov, a.format)?;
        if !rep.taps.is_empty() {
            write_table(&metrics::tap_table(&rep.taps, &rep.tap_samples), &a.out, "taps", &prov, a.format)?;
        }
        let mut s = metrics::summary(&rep, &prov, engine.stats());
        s["files"] = json!({"trace": trace_path, "metrics": metrics_path});
        s
    } else {
        let duration = a.duration.ok_or_else(|| Failure::Usage("network runs need --duration".into()))?;
        if let Some((t, _)) = cli_patches.iter().find(|(t, _)| *t > duration) {
            return Err(Failure::Usage(format!("patch at t={t} lies beyond the duration {duration}")));
        }
        let patches = crate::merge_patches(&net, &[], &cli_patches)?;
        let inflow = InflowRun::new(net.clone(), parse_inflows(&a.inflows)?, duration, seed);
        let events = inflow.injections()?;
        let cfg = TraceConfig {
            taps: taps.clone(),
            sample_period: Some(a.sample_period),
            record_firings: a.trace_firings,
            record_injections: a.trace_firings,
        };
        let (counts, finals, final_net) = with_engine!(&mut engine, e => {
            run_schedule(e.as_mut(), duration, &events, &patches, &cfg, &mut sink)?;
            (e.fire_counts().to_vec(), e.concentrations(), e.network().clone())
        });
        let metrics_path = write_table(&metrics::tap_table(&taps, &sink.samples), &a.out, "metrics", &prov, a.format)?;
        let mut s = json!({
            "provenance": prov,
            "duration": duration,
            "firings": counts.iter().sum::<u64>(),
            "fire_counts": final_net.reactions().iter().zip(&counts).map(|(r, c)| (r.name.clone(), json!(c))).collect::<serde_json::Map<_, _>>(),
            "final": final_net.species().iter().zip(&finals).map(|(s, c)| (s.name.clone(), json!(c))).collect::<serde_json::Map<_, _>>(),
            "files": {"trace": trace_path, "metrics": metrics_path},
        });
        if let Some(x) = engine.stats() {
            s["engine_stats"] = x;
        }
        s
    };
    sink.trace.finish().map_err(io_err(&trace_path))?;
    let summary_path = a.out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("serializable");
    std::fs::write(&summary_path, format!("{text}\n")).map_err(io_err(&summary_path))?;
    println!("{text}");
    Ok(())
}

fn fmt_rate(x: f64) -> String {
    if x.abs() >= 1.0 { format!("{x:.0}") } else { format!("{x:.3}") }
}

fn output_ids(net: &ReactionNetwork) -> Vec<chemkernel_core::SpeciesId> {
    InflowRun::new(net.clone(), Vec::new(), 1.0, 0).output_species()
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let net = crate::load_network(&a.network)?;
    let inflow_named = parse_inflows(&a.inflows)?;
    let run = InflowRun::new(net.clone(), inflow_named.clone(), 1.0, 0);
    let inflow = run.resolved_inflow()?;
    let sys = fluid::build_odes(&net, &inflow)?;
    let c0: Vec<f64> = net.initial_concentrations().iter().map(|&c| c as f64).collect();
    let name = |i: usize| net.species()[i].name.as_str();
    let prov = Provenance::new(0, &net, "fluid");

    println!("network {} ({} species, {} reactions)", prov.network_hash, net.species_count(), net.reaction_count());
    for (s, r) in &inflow_named {
        println!("inflow {s} = {} mol/s", fmt_rate(*r));
    }
    let outs = output_ids(&net);
    let ss = fluid::steady_state(&sys, &c0, &SteadyOptions::default())?;
    match &ss {
        SteadyState::Fixed { c, t } => {
            let state: Vec<String> = c.iter().enumerate().map(|(i, x)| format!("{}={x:.6}", name(i))).collect();
            println!("fixed point (reached t={t:.4}): {}", state.join(" "));
            let lin = fluid::linearize(&sys, c)?;
            let ev: Vec<String> = lin
                .eigenvalues
                .iter()
                .map(|e| if e.im == 0.0 { format!("{:.6e}", e.re) } else { format!("{:.6e}{:+.6e}i", e.re, e.im) })
                .collect();
            println!("eigenvalues: {}", ev.join(" "));
            println!("slowest time constant: {:.6e} s", lin.slowest_time_constant());
            let rhs = sys.rhs_vec(c);
            for o in &outs {
                println!("steady output rate {} = {} mol/s", name(o.index()), fmt_rate(rhs[o.index()]));
            }
        }
        SteadyState::Divergent { c, t, growing } => {
            let rhs = sys.rhs_vec(c);
            let out_rate: f64 = outs.iter().map(|o| rhs[o.index()]).sum();
            let names: Vec<&str> = growing.iter().map(|g| name(g.index())).collect();
            println!("{} divergent, output → {} (search stopped at t={t:.4e})", names.join(", "), fmt_rate(out_rate));
        }
    }
    if let Some(l) = fluid::find_enzyme_loop(&net) {
        let s = name(l.substrate.index());
        let e = name(l.enzyme.index());
        let lam = inflow.iter().filter(|(id, _)| *id == l.substrate).fold(0.0, |acc, x| acc + x.1);
        let verdict = if lam < l.v_max() {
            "below the cap: output follows the inflow"
        } else {
            "at or above the cap: output is held at v_max and the substrate grows"
        };
        println!(
            "michaelis-menten loop {s}+{e}<->{}->{e}+{}: e0={} k1={} k2={} v_max={} mol/s K={}; inflow {} {verdict}",
            name(l.complex.index()),
            name(l.product.index()),
            l.e0,
            l.k1,
            l.k2,
            fmt_rate(l.v_max()),
            l.half_saturation(),
            fmt_rate(lam),
        );
    }

    let t_end = match a.t_end {
        Some(t) if t.is_finite() && t > 0.0 => t,
        Some(_) => return Err(Failure::Usage("--t-end must be positive".into())),
        None => 10.0 * fluid::slowest_time_constant(&sys, &c0),
    };
    let times = fluid::linspace(0.0, t_end, a.samples.max(2));
    let traj = fluid::integrate(&sys, &c0, (0.0, t_end), &times, &Tolerances::default())?;
    let names: Vec<String> = net.species().iter().map(|s| s.name.clone()).collect();
    let path = a.out.unwrap_or_else(|| {
        let stem = Path::new(a.network.strip_prefix("builtin:").unwrap_or(&a.network))
            .file_stem()
            .map_or("network".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from(format!("{stem}-trajectory.{}", a.format.extension()))
    });
    let mut w = create(&path)?;
    metrics::trajectory_table(&traj, &names).write(&mut w, &prov, a.format).map_err(io_err(&path))?;
    println!("trajectory: {} ({} rows to t={t_end:.4e})", path.display(), traj.times.len());
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), Failure> {
    let net = crate::load_network(&a.network)?;
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let mut run = InflowRun::new(net.clone(), parse_inflows(&a.inflows)?, a.duration, seed);
    run.dt = a.dt;
    run.window = a.window;
    let rep = compare::compare(&run, hw_config(&a.hw)?)?;
    println!("{}", rep.summary(&net));
    println!(
        "ssa firings {} hw firings {} hw cycles {} max firing-time gap {:.3e}",
        rep.ssa_firings, rep.hw_firings, rep.hw_cycles, rep.max_time_gap
    );
    if let Some(path) = a.out {
        let prov = Provenance::new(seed, &net, "compare");
        let table = metrics::Table {
            columns: vec!["t".into(), "stochastic".into(), "fluid".into()],
            rows: rep.fluid.windows.iter().map(|w| vec![json!(w.t), json!(w.stochastic), json!(w.fluid)]).collect(),
        };
        let mut w = create(&path)?;
        table.write(&mut w, &prov, a.format).map_err(io_err(&path))?;
    }
    Ok(())
}
