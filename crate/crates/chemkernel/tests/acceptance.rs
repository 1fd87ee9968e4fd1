//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances are fixed constants below.

use std::process::ExitCode;

use chemkernel::compare::{fluid_vs_engine, first_divergence, InflowRun};
use chemkernel::spectral::high_band_energy;
use chemkernel_core::engine::{run_schedule, InjectionEvent, ReactionEngine, Step, Trace, TraceConfig, TraceRecord};
use chemkernel_core::fluid;
use chemkernel_core::hw::{self, CycleCostModel, HwConfig, HwEngine, Topology};
use chemkernel_core::network::build_stoich_matrix;
use chemkernel_core::rng::SimRng;
use chemkernel_core::traffic::{self, Metric, MetricsReport};
use chemkernel_core::{Engine, EngineLimits, ReactionNetwork, SpeciesId};

const CAP_TOL: f64 = 0.02;
const PASS_THROUGH_TOL: f64 = 0.02;
const MM_TOL: f64 = 0.02;
const FLUID_TOL: f64 = 0.05;
const AQM_PHASE1_DROP: f64 = 0.001;
const AQM_DROP_TOL: f64 = 0.05;
const AQM_GROWTH_TOL: f64 = 0.10;
const SHARE_TOL: f64 = 0.05;
const DEMAND_TOL: f64 = 0.02;
const KS_ALPHA: f64 = 0.01;
const COST_TOL: f64 = 0.20;
const QUANTUM_BITS: f64 = 1000.0;

type Check = (bool, String);

fn rel(x: f64, want: f64) -> f64 {
    (x - want).abs() / want.abs()
}

fn inflow_events(net: &ReactionNetwork, species: &str, rate: f64, duration: f64) -> Vec<InjectionEvent> {
    InflowRun::new(net.clone(), vec![(species.into(), rate)], duration, 0).injections().unwrap()
}

/// Samples of one tap at `period`.
fn sampled<E: ReactionEngine>(e: &mut E, events: &[InjectionEvent], t_end: f64, tap: &str, period: f64) -> Vec<(f64, u64)> {
    let cfg = TraceConfig { taps: vec![tap.into()], sample_period: Some(period), record_firings: false, record_injections: false };
    let mut trace = Trace::default();
    run_schedule(e, t_end, events, &[], &cfg, &mut trace).unwrap();
    trace
        .records
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Sample { time, values } => Some((*time, values[0].unwrap())),
            _ => None,
        })
        .collect()
}

fn value_at(s: &[(f64, u64)], t: f64) -> f64 {
    s.iter().find(|(x, _)| (x - t).abs() < 1e-9).expect("sample present").1 as f64
}

fn c1_rate_cap() -> Check {
    let (e0, k2) = (25000.0, 20.0);
    let cap = e0 * k2;
    let net = traffic::rnet1(25000, 1.0, k2);
    let events = inflow_events(&net, "S", 1e6, 20.0);
    let s = sampled(&mut Engine::new(net, 101), &events, 20.0, "P", 1.0);
    let rate = (value_at(&s, 20.0) - value_at(&s, 10.0)) / 10.0;
    let ok = rel(rate, cap) <= CAP_TOL;
    (ok, format!("output {rate:.0} mol/s ({:.4} Gbps) vs cap {cap:.0}, tol {CAP_TOL}", rate * QUANTUM_BITS / 1e9))
}

fn c2_pass_through() -> Check {
    let lambda = 250_000.0;
    let (k1, k2, e0) = (1.0, 20.0, 25000.0);
    let s_star = (k2 / k1) * lambda / (e0 * k2 - lambda);
    let net = traffic::rnet1(25000, k1, k2);
    let events = inflow_events(&net, "S", lambda, 20.0);
    let mut e = Engine::new(net.clone(), 102);
    let cfg = TraceConfig { taps: vec!["P".into(), "S".into()], sample_period: Some(0.1), record_firings: false, record_injections: false };
    let mut trace = Trace::default();
    run_schedule(&mut e, 20.0, &events, &[], &cfg, &mut trace).unwrap();
    let samples: Vec<(f64, u64, u64)> = trace
        .records
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Sample { time, values } => Some((*time, values[0].unwrap(), values[1].unwrap())),
            _ => None,
        })
        .collect();
    let at = |t: f64| samples.iter().find(|s| (s.0 - t).abs() < 1e-9).unwrap().1 as f64;
    let rate = (at(20.0) - at(10.0)) / 10.0;
    let s_max = samples.iter().filter(|s| s.0 >= 10.0).map(|s| s.2).max().unwrap();
    let bound = 50.0 * s_star;
    let ok = rel(rate, lambda) <= PASS_THROUGH_TOL && (s_max as f64) < bound;
    (ok, format!("output {rate:.0} vs λ {lambda:.0} (tol {PASS_THROUGH_TOL}); max S over [10,20] s = {s_max} < {bound:.0} (S* = {s_star})"))
}

fn conservation_run<E: ReactionEngine>(e: &mut E, events: &[InjectionEvent], target: u64) -> (u64, u64) {
    let (es, ec) = (SpeciesId(2), SpeciesId(3));
    let e0 = e.concentration(es) + e.concentration(ec);
    let (mut fired, mut bad, mut i) = (0u64, 0u64, 0usize);
    while fired < target {
        let next = events.get(i).map_or(f64::INFINITY, |ev| ev.time);
        match e.step_until(next) {
            Some(_) => fired += 1,
            None if next.is_infinite() => break,
            None => {
                e.advance_to(next);
                e.adjust(events[i].species, events[i].amount).unwrap();
                i += 1;
            }
        }
        if e.concentration(es) + e.concentration(ec) != e0 {
            bad += 1;
        }
    }
    (fired, bad)
}

fn c3_conservation() -> Check {
    let net = traffic::rnet1(25000, 1.0, 20.0);
    assert_eq!(net.species_name(SpeciesId(2)), "E");
    assert_eq!(net.species_name(SpeciesId(3)), "ES");
    let events = inflow_events(&net, "S", 400_000.0, 10.0);
    let target = 1_000_000;
    let (f1, v1) = conservation_run(&mut Engine::new(net.clone(), 103), &events, target);
    let lim = EngineLimits { concentration_bits: 32, ..EngineLimits::default() };
    let cfg = HwConfig { limits: lim, ..HwConfig::default() };
    let (f2, v2) = conservation_run(&mut HwEngine::new(net, cfg, 103).unwrap(), &events, target);
    let ok = f1 == target && f2 == target && v1 == 0 && v2 == 0;
    (ok, format!("ssa {f1} firings / {v1} violations; hw {f2} firings / {v2} violations"))
}

fn c4_michaelis_menten() -> Check {
    let (e0, k1, k2) = (25000.0, 1.0, 20.0);
    let km = k2 / k1;
    let oracle = |s: f64| e0 * k2 * s / (s + km);
    let exact = fluid::mm_rate(km, e0, k1, k2) == e0 * k2 / 2.0;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, mult) in [1.0, 10.0, 100.0].into_iter().enumerate() {
        let s = mult * km;
        let net = ReactionNetwork::builder()
            .species("S", s as u64)
            .species("E", e0 as u64)
            .species("ES", 0)
            .species("P", 0)
            .reaction("r1", &[("S", 1), ("E", 1)], &[("S", 1), ("ES", 1)], k1)
            .reaction("r2", &[("ES", 1)], &[("E", 1), ("P", 1)], k2)
            .build()
            .unwrap();
        let samples = sampled(&mut Engine::new(net, 104 + i as u64), &[], 4.5, "P", 0.5);
        let rate = (value_at(&samples, 4.5) - value_at(&samples, 0.5)) / 4.0;
        let want = oracle(s);
        worst = worst.max(rel(rate, want));
        parts.push(format!("S={s}: {rate:.0} vs {want:.0}"));
        let core = fluid::mm_rate(s, e0, k1, k2);
        worst = worst.max(rel(core, want));
    }
    let ok = exact && worst <= MM_TOL;
    (ok, format!("{}; worst rel err {worst:.4} (tol {MM_TOL}); mm_rate(k2/k1) exact: {exact}", parts.join(", ")))
}

fn c5_fluid_agreement() -> Check {
    let net = ReactionNetwork::builder()
        .species("S", 20000)
        .species("E", 12500)
        .species("ES", 12500)
        .species("P", 1000)
        .reaction("r1", &[("S", 1), ("E", 1)], &[("ES", 1)], 0.001)
        .reaction("r2", &[("ES", 1)], &[("E", 1), ("P", 1)], 20.0)
        .output("P")
        .build()
        .unwrap();
    let run = InflowRun::new(net.clone(), vec![("S".into(), 250_000.0)], 5.0, 105);
    let cmp = fluid_vs_engine(&mut Engine::new(net.clone(), 105), &run).unwrap();
    let sys = fluid::build_odes(&net, &run.resolved_inflow().unwrap()).unwrap();
    let c0: Vec<f64> = net.initial_concentrations().iter().map(|&c| c as f64).collect();
    let traj = fluid::integrate(&sys, &c0, (0.0, 5.0), &fluid::linspace(0.0, 5.0, 51), &fluid::Tolerances::default()).unwrap();
    let min_c = traj.states.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let ok = cmp.max_rel_error < FLUID_TOL && min_c >= 1000.0 && cmp.windows.len() >= 45;
    (
        ok,
        format!(
            "{} windows, max rel err {:.4}, mean {:.4} (tol {FLUID_TOL}); min fluid concentration {min_c:.0}",
            cmp.windows.len(),
            cmp.max_rel_error,
            cmp.mean_rel_error
        ),
    )
}

/// Random network inside the default limits: order ≤ 2, `k` a power of two,
/// initial counts low enough to stay below 2¹² over 256 firings.
fn random_network(rng: &mut SimRng, pow2_k: bool) -> ReactionNetwork {
    let ns = rng.range_u64(1, 8) as usize;
    let nr = rng.range_u64(1, 8) as usize;
    let mut b = ReactionNetwork::builder();
    for i in 0..ns {
        b = b.species(&format!("X{i}"), rng.range_u64(0, 3000));
    }
    let mut made = 0;
    while made < nr {
        let mut lhs: Vec<(String, u32)> = Vec::new();
        match rng.range_u64(0, 3) {
            0 => {}
            1 => lhs.push((format!("X{}", rng.range_u64(0, ns as u64 - 1)), 1)),
            2 => lhs.push((format!("X{}", rng.range_u64(0, ns as u64 - 1)), 2)),
            _ => {
                let a = rng.range_u64(0, ns as u64 - 1);
                let c = rng.range_u64(0, ns as u64 - 1);
                if a == c {
                    lhs.push((format!("X{a}"), 2));
                } else {
                    lhs.push((format!("X{a}"), 1));
                    lhs.push((format!("X{c}"), 1));
                }
            }
        }
        let mut rhs: Vec<(String, u32)> = Vec::new();
        for _ in 0..rng.range_u64(0, 2) {
            let s = format!("X{}", rng.range_u64(0, ns as u64 - 1));
            if !rhs.iter().any(|(n, _)| *n == s) {
                rhs.push((s, rng.range_u64(1, 2) as u32));
            }
        }
        if lhs.is_empty() && rhs.is_empty() {
            continue;
        }
        let k = if pow2_k { 2f64.powi(rng.range_u64(0, 8) as i32 - 4) } else { 0.001 + 100.0 * rng.uniform() };
        let l: Vec<(&str, u32)> = lhs.iter().map(|(s, c)| (s.as_str(), *c)).collect();
        let r: Vec<(&str, u32)> = rhs.iter().map(|(s, c)| (s.as_str(), *c)).collect();
        b = b.reaction(&format!("r{made}"), &l, &r, k);
        made += 1;
    }
    b.build().unwrap()
}

fn c6_hw_equivalence() -> Check {
    let mut gen = SimRng::new(106, 0);
    let (mut mismatched, mut firings) = (0usize, 0usize);
    let mut first_bad = None;
    for i in 0..1000u64 {
        let net = random_network(&mut gen, true);
        let mut sw = Engine::new(net.clone(), i);
        let mut hwe = HwEngine::new(net, HwConfig::default(), i).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for _ in 0..256 {
            match (sw.step(), hwe.step()) {
                (Step::Fired(x), Step::Fired(y)) => {
                    a.push(x);
                    b.push(y);
                }
                (Step::Quiescent, Step::Quiescent) => break,
                (x, y) => {
                    if let Step::Fired(x) = x {
                        a.push(x);
                    }
                    if let Step::Fired(y) = y {
                        b.push(y);
                    }
                    break;
                }
            }
        }
        firings += a.len();
        let same = first_divergence(&a, &b).is_none() && sw.concentrations() == hwe.concentrations() && hwe.saturation().is_none();
        if !same {
            mismatched += 1;
            first_bad.get_or_insert(i);
        }
    }
    (mismatched == 0, format!("1000 networks, {firings} firings, {mismatched} mismatches (first: {first_bad:?})"))
}

fn c7_register_round_trip() -> Check {
    let mut gen = SimRng::new(107, 0);
    let lim = EngineLimits::default();
    let mut bad = 0;
    for _ in 0..1000 {
        let net = random_network(&mut gen, false);
        let back = hw::decompile(&hw::compile(&net, &lim).unwrap()).unwrap();
        let (x, y) = (build_stoich_matrix(&net), build_stoich_matrix(&back));
        let mut same = x.rows() == y.rows() && x.cols() == y.cols();
        for s in 0..x.rows().min(y.rows()) {
            for r in 0..x.cols().min(y.cols()) {
                same &= x.get(s, r) == y.get(s, r) && x.alpha(s, r) == y.alpha(s, r) && x.beta(s, r) == y.beta(s, r);
            }
        }
        for (a, b) in net.reactions().iter().zip(back.reactions()) {
            same &= b.k == a.k as f32 as f64;
        }
        if !same {
            bad += 1;
        }
    }
    (bad == 0, format!("1000 networks, {bad} round-trip mismatches"))
}

fn scenario(name: &str) -> MetricsReport {
    traffic::run_scenario(&traffic::builtin(name).unwrap()).unwrap()
}

fn c8_reprogramming() -> Check {
    let rep = scenario("fig7");
    let q = rep.queue("q").unwrap();
    let t = &q.totals;
    let queued = q.bins.last().unwrap().occupancy_packets;
    let cap = 25000.0 * 20.0 * QUANTUM_BITS;
    let tx = rep.rate("q", Metric::Tx, 8.0, 14.0);
    let lossless = t.tail_dropped == 0 && t.head_dropped == 0 && t.arrived == t.departed + queued;
    let swapped = rep.reconfigs.len() == 1 && rep.reconfigs[0].time == 5.0;
    let ok = lossless && swapped && rep.conservation_violations == 0 && rel(tx, cap) <= CAP_TOL;
    (
        ok,
        format!(
            "arrived {} departed {} queued {queued} dropped {}; {} conservation violations; reconfig at {:?}; overload tx {:.2} Mbps vs cap {:.0} Mbps (tol {CAP_TOL})",
            t.arrived,
            t.departed,
            t.tail_dropped + t.head_dropped,
            rep.conservation_violations,
            rep.reconfigs.iter().map(|r| r.time).collect::<Vec<_>>(),
            tx / 1e6,
            cap / 1e6
        ),
    )
}

fn c9_retune() -> Check {
    let (fast, slow) = std::thread::scope(|s| {
        let a = s.spawn(|| scenario("fig8"));
        let b = s.spawn(|| scenario("fig8-k10"));
        (a.join().unwrap(), b.join().unwrap())
    });
    let cap = 500e6;
    let (c20, c10) = (fast.rate("q", Metric::Tx, 2.0, 8.5), slow.rate("q", Metric::Tx, 2.0, 8.5));
    let same_offered = fast.queue("q").unwrap().totals.arrived_bytes == slow.queue("q").unwrap().totals.arrived_bytes;
    let energy = |rep: &MetricsReport| {
        let xs: Vec<f64> = rep.series("q").iter().filter(|w| w.t > 13.0 && w.t <= 20.0).map(|w| w.tx_bps).collect();
        high_band_energy(&xs, rep.hop, 5.0)
    };
    let (e20, e10) = (energy(&fast), energy(&slow));
    let ok = same_offered && rel(c20, cap) <= CAP_TOL && rel(c10, cap) <= CAP_TOL && rel(c10, c20) <= CAP_TOL && e10 < e20;
    (
        ok,
        format!(
            "cap k2=20 {:.2} Mbps, k2=10 {:.2} Mbps (tol {CAP_TOL}); energy >5 Hz k2=20 {e20:.3e}, k2=10 {e10:.3e} (ratio {:.3}); identical arrivals: {same_offered}",
            c20 / 1e6,
            c10 / 1e6,
            e10 / e20
        ),
    )
}

fn c10_aqm() -> Check {
    let rep = scenario("fig10");
    let cap = 20000.0 * 20.0 * QUANTUM_BITS;
    let drop = |a, b| rep.rate("q", Metric::HeadDrop, a, b) + rep.rate("q", Metric::TailDrop, a, b);
    let p1 = drop(2.0, 13.0) / rep.rate("q", Metric::Offered, 2.0, 13.0);
    let offered2 = rep.rate("q", Metric::Offered, 16.0, 25.0);
    let drop2 = drop(16.0, 25.0);
    let want = offered2 - cap;
    let pts: Vec<(f64, f64)> = rep
        .series("q")
        .iter()
        .filter(|w| w.t > 19.5 && w.t <= 25.0)
        .map(|w| (w.t, w.occupancy_bytes as f64))
        .collect();
    let n = pts.len() as f64;
    let (mt, mo) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mt) * (p.1 - mo)).sum::<f64>() / pts.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
    let growth = slope * 5.5 / mo;
    let ok = p1 < AQM_PHASE1_DROP && rel(drop2, want) <= AQM_DROP_TOL && growth < AQM_GROWTH_TOL;
    (
        ok,
        format!(
            "phase-1 drop fraction {p1:.2e} (< {AQM_PHASE1_DROP}); phase-2 drop {:.1} Mbps vs offered−cap {:.1} Mbps (tol {AQM_DROP_TOL}); occupancy mean {:.0} B, trend over last half {:+.3} of mean (< {AQM_GROWTH_TOL})",
            drop2 / 1e6,
            want / 1e6,
            mo,
            growth
        ),
    )
}

fn c11_fairness() -> Check {
    let rep = scenario("fig12");
    let demand = [0.4e6, 0.8e6, 0.4e6];
    let under: Vec<f64> = (0..3).map(|f| rep.flow_rate("qx", f, 1.0, 10.0)).collect();
    let over: Vec<f64> = (0..3).map(|f| rep.flow_rate("qx", f, 12.0, 20.0)).collect();
    let total: f64 = over.iter().sum();
    let shares: Vec<f64> = over.iter().map(|x| x / total).collect();
    let want = [0.5, 0.25, 0.25];
    let share_ok = shares.iter().zip(want).all(|(s, w)| (s - w).abs() <= SHARE_TOL);
    let demand_ok = under.iter().zip(demand).all(|(x, d)| rel(*x, d) <= DEMAND_TOL);
    (
        share_ok && demand_ok,
        format!(
            "overload shares {:.3}/{:.3}/{:.3} vs 0.5/0.25/0.25 (±{SHARE_TOL}); under-load {:.1}/{:.1}/{:.1} kbps vs 400/800/400 (tol {DEMAND_TOL})",
            shares[0],
            shares[1],
            shares[2],
            under[0] / 1e3,
            under[1] / 1e3,
            under[2] / 1e3
        ),
    )
}

/// Direct-method SSA with a fresh draw for every step.
fn naive_count(rng: &mut SimRng, a0: i64, kf: f64, kb: f64, t_end: f64) -> u64 {
    let (mut a, mut b, mut t, mut n) = (a0, 0i64, 0.0, 0u64);
    loop {
        let (pf, pb) = (kf * a as f64, kb * b as f64);
        let total = pf + pb;
        if total == 0.0 {
            return n;
        }
        t += rng.exp_mean(1.0 / total);
        if t > t_end {
            return n;
        }
        if rng.uniform() * total < pf {
            a -= 1;
            b += 1;
        } else {
            a += 1;
            b -= 1;
        }
        n += 1;
    }
}

/// Asymptotic two-sample Kolmogorov-Smirnov p-value.
fn ks_p(mut x: Vec<u64>, mut y: Vec<u64>) -> (f64, f64) {
    x.sort_unstable();
    y.sort_unstable();
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] == v {
            i += 1;
        }
        while j < y.len() && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let lambda = (n * m / (n + m)).sqrt() * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        p += 2.0 * if k % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * kf * kf * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

fn c12_rescaling() -> Check {
    let net = ReactionNetwork::builder()
        .species("A", 10)
        .species("B", 0)
        .reaction("fwd", &[("A", 1)], &[("B", 1)], 3.0)
        .reaction("back", &[("B", 1)], &[("A", 1)], 5.0)
        .build()
        .unwrap();
    let trials = 100_000u64;
    let engine: Vec<u64> = (0..trials)
        .map(|i| {
            let mut e = Engine::new(net.clone(), i);
            let mut n = 0;
            while e.step_until(1.0).is_some() {
                n += 1;
            }
            n
        })
        .collect();
    let mut rng = SimRng::new(0x5eed, 77);
    let oracle: Vec<u64> = (0..trials).map(|_| naive_count(&mut rng, 10, 3.0, 5.0, 1.0)).collect();
    let mean = |v: &[u64]| v.iter().sum::<u64>() as f64 / v.len() as f64;
    let (me, mo) = (mean(&engine), mean(&oracle));
    let (d, p) = ks_p(engine, oracle);
    (p > KS_ALPHA, format!("{trials} trials each, mean firings {me:.3} vs {mo:.3}, KS D={d:.5} p={p:.3} (> {KS_ALPHA})"))
}

fn c13_cost_model() -> Check {
    let mut b = ReactionNetwork::builder().species("X", 0).species("Y", 0);
    for i in 0..32 {
        b = b.reaction(&format!("r{i}"), &[("X", 1), ("Y", 1)], &[("X", 1)], 1.0);
    }
    let net = b.build().unwrap();
    let m = CycleCostModel::default();
    let serial = m.with_topology(Topology::SingleCore).full_reschedule_cycles(&net) as f64;
    let cores = m.with_topology(Topology::PerReactionCores).full_reschedule_cycles(&net) as f64;
    let log = m.with_topology(Topology::PerReactionLog).full_reschedule_cycles(&net) as f64;
    let (ws, wc, wl) = (1600.0, 52.0, 24.0);
    let errs = [rel(serial / cores, ws / wc), rel(serial / log, ws / wl), rel(cores / log, wc / wl)];
    let ok = errs.iter().all(|e| *e <= COST_TOL);
    (
        ok,
        format!(
            "cycles serial {serial} per-core {cores} log {log}; ratio errors {:.3}/{:.3}/{:.3} (tol {COST_TOL})",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn main() -> ExitCode {
    let checks: [(u32, &str, fn() -> Check); 13] = [
        (1, "rate cap under overload", c1_rate_cap),
        (2, "pass-through below cap", c2_pass_through),
        (3, "exact enzyme conservation", c3_conservation),
        (4, "michaelis-menten closed form", c4_michaelis_menten),
        (5, "fluid vs stochastic output rate", c5_fluid_agreement),
        (6, "hardware/reference equivalence", c6_hw_equivalence),
        (7, "register map round trip", c7_register_round_trip),
        (8, "runtime reprogramming", c8_reprogramming),
        (9, "retune smoothing", c9_retune),
        (10, "queue management", c10_aqm),
        (11, "weighted fairness", c11_fairness),
        (12, "rescaling vs naive redraw", c12_rescaling),
        (13, "cost model ratios", c13_cost_model),
    ];
    let results: Vec<(u32, &str, Check)> = std::thread::scope(|s| {
        let handles: Vec<_> = checks.iter().map(|&(id, name, f)| (id, name, s.spawn(f))).collect();
        handles
            .into_iter()
            .map(|(id, name, h)| (id, name, h.join().unwrap_or_else(|_| (false, "panicked".into()))))
            .collect()
    });
    let mut failed = 0;
    for (id, name, (ok, detail)) in &results {
        println!("{} criterion {id:>2} {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
