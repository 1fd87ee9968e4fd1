//! Fluid (mean-field) view of a network: `ċ = Ξ·v(c) + λ` with mass-action
//! rates on real-valued concentrations.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::network::{ReactionNetwork, SpeciesId};

#[derive(Clone, Debug, PartialEq)]
pub enum FluidError {
    UnknownSpecies(SpeciesId),
    InvalidInput(&'static str),
    StepSizeUnderflow { t: f64, h: f64 },
    MaxStepsExceeded { t: f64, steps: u64 },
    NotAFixedPoint { residual: f64, tolerance: f64 },
    Singular { t: f64 },
}

impl fmt::Display for FluidError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FluidError::UnknownSpecies(s) => write!(f, "inflow names unknown species id {}", s.0),
            FluidError::InvalidInput(w) => write!(f, "invalid input: {w}"),
            FluidError::StepSizeUnderflow { t, h } => write!(f, "step size underflow at t={t} (h={h:e})"),
            FluidError::MaxStepsExceeded { t, steps } => write!(f, "gave up after {steps} steps at t={t}"),
            FluidError::NotAFixedPoint { residual, tolerance } => {
                write!(f, "not a fixed point: |dc/dt| = {residual:e} > {tolerance:e}")
            }
            FluidError::Singular { t } => write!(f, "singular iteration matrix at t={t}"),
        }
    }
}

impl core::error::Error for FluidError {}

#[derive(Clone, Debug)]
struct FluidReaction {
    k: f64,
    reactants: Vec<(usize, u32)>,
    delta: Vec<(usize, f64)>,
}

/// Right-hand side `Ξ·v(c) + λ`.
#[derive(Clone, Debug)]
pub struct OdeSystem {
    n: usize,
    reactions: Vec<FluidReaction>,
    inflow: Vec<f64>,
    sink: Vec<bool>,
}

pub fn build_odes(net: &ReactionNetwork, inflows: &[(SpeciesId, f64)]) -> Result<OdeSystem, FluidError> {
    let n = net.species_count();
    let mut inflow = vec![0.0; n];
    for &(s, rate) in inflows {
        if s.0 == 0 || s.index() >= n {
            return Err(FluidError::UnknownSpecies(s));
        }
        if !rate.is_finite() {
            return Err(FluidError::InvalidInput("inflow must be finite"));
        }
        inflow[s.index()] += rate;
    }
    let reactions = net
        .reactions()
        .iter()
        .map(|r| FluidReaction {
            k: r.k,
            reactants: r.reactants.iter().map(|t| (t.species.index(), t.count)).collect(),
            delta: r.delta().into_iter().map(|(s, d)| (s.index(), d as f64)).collect(),
        })
        .collect();
    Ok(OdeSystem { n, reactions, inflow, sink: net.sink_species() })
}

impl OdeSystem {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn inflow(&self) -> &[f64] {
        &self.inflow
    }

    /// Replaces λ, for piecewise-constant inputs.
    pub fn set_inflow(&mut self, inflow: &[f64]) {
        assert_eq!(inflow.len(), self.n);
        self.inflow.copy_from_slice(inflow);
    }

    /// Species no reaction consumes. They integrate their inflow and do not
    /// enter convergence tests.
    pub fn sinks(&self) -> &[bool] {
        &self.sink
    }

    /// Reaction rate vector v(c).
    pub fn rates(&self, c: &[f64]) -> Vec<f64> {
        self.reactions.iter().map(|r| rate(r, c)).collect()
    }

    pub fn rhs(&self, c: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.inflow);
        for r in &self.reactions {
            let v = rate(r, c);
            if v != 0.0 {
                for &(s, d) in &r.delta {
                    out[s] += d * v;
                }
            }
        }
    }

    pub fn rhs_vec(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.rhs(c, &mut out);
        out
    }

    /// Analytic Jacobian of the right-hand side, row-major.
    pub fn jacobian(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut j = vec![0.0; n * n];
        for r in &self.reactions {
            for (idx, &(s, a)) in r.reactants.iter().enumerate() {
                let mut dv = r.k * a as f64 * powi(c[s], a - 1);
                for (o, &(s2, a2)) in r.reactants.iter().enumerate() {
                    if o != idx {
                        dv *= powi(c[s2], a2);
                    }
                }
                for &(row, d) in &r.delta {
                    j[row * n + s] += d * dv;
                }
            }
        }
        j
    }

    /// Convergence scale and residual over non-sink coordinates.
    fn residual(&self, c: &[f64], f: &[f64]) -> (f64, f64) {
        let (mut res, mut mag) = (0.0f64, 0.0f64);
        for i in 0..self.n {
            if !self.sink[i] {
                res = res.max(f[i].abs());
                mag = mag.max(c[i].abs());
            }
        }
        (res, mag)
    }
}

fn powi(x: f64, n: u32) -> f64 {
    let mut y = 1.0;
    for _ in 0..n {
        y *= x;
    }
    y
}

fn rate(r: &FluidReaction, c: &[f64]) -> f64 {
    let mut v = r.k;
    for &(s, a) in &r.reactants {
        v *= powi(c[s], a);
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { atol: 1e-8, rtol: 1e-6, max_steps: 20_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One row per sample time, one column per species.
    pub states: Vec<Vec<f64>>,
    pub steps: u64,
    pub rejected: u64,
    pub tolerances: Tolerances,
    /// Set when a negative undershoot was clipped to zero.
    pub clipped: bool,
}

impl Trajectory {
    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }
}

// Dormand–Prince 5(4) tableau (the system is autonomous, so no c_i nodes).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output coefficients.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Dp45<'a> {
    sys: &'a OdeSystem,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl<'a> Dp45<'a> {
    fn new(sys: &'a OdeSystem) -> Self {
        let n = sys.n;
        Dp45 {
            sys,
            k: core::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
        }
    }

    fn stage(&mut self, y: &[f64], h: f64, coeffs: &[(usize, f64)], into: usize) {
        for i in 0..y.len() {
            let mut acc = 0.0;
            for &(j, a) in coeffs {
                acc += a * self.k[j][i];
            }
            self.tmp[i] = y[i] + h * acc;
        }
        let (tmp, k) = (&self.tmp, &mut self.k[into]);
        self.sys.rhs(tmp, k);
    }

    /// Attempts one step from `y` with `k[0] = f(y)`. Returns the scaled error
    /// norm; on acceptance `y_new` and `k[6]` hold the new state and slope.
    fn attempt(&mut self, y: &[f64], h: f64, tol: &Tolerances) -> f64 {
        self.stage(y, h, &[(0, A21)], 1);
        self.stage(y, h, &[(0, A31), (1, A32)], 2);
        self.stage(y, h, &[(0, A41), (1, A42), (2, A43)], 3);
        self.stage(y, h, &[(0, A51), (1, A52), (2, A53), (3, A54)], 4);
        self.stage(y, h, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], 5);
        for i in 0..y.len() {
            self.y_new[i] = y[i]
                + h * (A71 * self.k[0][i] + A73 * self.k[2][i] + A74 * self.k[3][i] + A75 * self.k[4][i]
                    + A76 * self.k[5][i]);
        }
        let (y_new, k6) = (&self.y_new, &mut self.k[6]);
        self.sys.rhs(y_new, k6);
        let mut sum = 0.0;
        for i in 0..y.len() {
            self.err[i] = h
                * (E1 * self.k[0][i] + E3 * self.k[2][i] + E4 * self.k[3][i] + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(self.y_new[i].abs());
            let q = self.err[i] / sc;
            sum += q * q;
        }
        if y.is_empty() {
            0.0
        } else {
            libm::sqrt(sum / y.len() as f64)
        }
    }

    /// Fourth-order continuous extension at `theta` in [0, 1].
    fn dense(&self, y: &[f64], h: f64, theta: f64, out: &mut [f64]) {
        let t1 = 1.0 - theta;
        for i in 0..y.len() {
            let r1 = y[i];
            let r2 = self.y_new[i] - y[i];
            let r3 = h * self.k[0][i] - r2;
            let r4 = r2 - h * self.k[6][i] - r3;
            let r5 = h
                * (D1 * self.k[0][i] + D3 * self.k[2][i] + D4 * self.k[3][i] + D5 * self.k[4][i]
                    + D6 * self.k[5][i]
                    + D7 * self.k[6][i]);
            out[i] = r1 + theta * (r2 + t1 * (r3 + theta * (r4 + t1 * r5)));
        }
    }
}

fn rms_scaled(v: &[f64], y: &[f64], tol: &Tolerances) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..v.len() {
        let q = v[i] / (tol.atol + tol.rtol * y[i].abs());
        s += q * q;
    }
    libm::sqrt(s / v.len() as f64)
}

fn initial_step(sys: &OdeSystem, y: &[f64], f: &[f64], span: f64, tol: &Tolerances) -> f64 {
    let d0 = rms_scaled(y, y, tol);
    let d1 = rms_scaled(f, y, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f).map(|(a, b)| a + h0 * b).collect();
    let f1 = sys.rhs_vec(&y1);
    let df: Vec<f64> = f1.iter().zip(f).map(|(a, b)| a - b).collect();
    let d2 = rms_scaled(&df, y, tol) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { libm::pow(0.01 / d1.max(d2), 0.2) };
    (100.0 * h0).min(h1).min(span)
}

fn clip(y: &mut [f64]) -> bool {
    let mut any = false;
    for v in y.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
            any = true;
        }
    }
    any
}

/// Adaptive Dormand–Prince 5(4) integration over `t_span`. With an empty
/// `samples` slice every accepted step is recorded; otherwise the state is
/// interpolated at each requested time (which must be increasing and inside
/// the span).
pub fn integrate(
    sys: &OdeSystem,
    c0: &[f64],
    t_span: (f64, f64),
    samples: &[f64],
    tol: &Tolerances,
) -> Result<Trajectory, FluidError> {
    let (t0, t1) = t_span;
    if c0.len() != sys.n {
        return Err(FluidError::InvalidInput("initial state has the wrong dimension"));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(FluidError::InvalidInput("time span must be finite and ordered"));
    }
    if c0.iter().any(|&x| !(x >= 0.0)) {
        return Err(FluidError::InvalidInput("initial concentrations must be non-negative"));
    }
    if samples.windows(2).any(|w| w[1] <= w[0]) || samples.iter().any(|&t| t < t0 || t > t1) {
        return Err(FluidError::InvalidInput("sample times must increase within the span"));
    }
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        steps: 0,
        rejected: 0,
        tolerances: *tol,
        clipped: false,
    };
    let mut y = c0.to_vec();
    let mut t = t0;
    let mut si = 0;
    let dense_mode = !samples.is_empty();
    while si < samples.len() && samples[si] <= t0 {
        traj.times.push(samples[si]);
        traj.states.push(y.clone());
        si += 1;
    }
    if !dense_mode {
        traj.times.push(t0);
        traj.states.push(y.clone());
    }
    if t1 == t0 {
        return Ok(traj);
    }
    let mut dp = Dp45::new(sys);
    sys.rhs(&y, &mut dp.k[0]);
    let mut h = initial_step(sys, &y, &dp.k[0].clone(), t1 - t0, tol);
    let mut buf = vec![0.0; sys.n];
    while t < t1 {
        if traj.steps + traj.rejected >= tol.max_steps {
            return Err(FluidError::MaxStepsExceeded { t, steps: traj.steps });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(FluidError::StepSizeUnderflow { t, h });
        }
        let err = dp.attempt(&y, h, tol);
        if !err.is_finite() || err > 1.0 {
            traj.rejected += 1;
            let fac = if err.is_finite() { (0.9 * libm::pow(err, -0.2)).max(0.2) } else { 0.2 };
            h *= fac;
            continue;
        }
        let t_new = if last { t1 } else { t + h };
        while si < samples.len() && samples[si] <= t_new {
            let theta = ((samples[si] - t) / h).clamp(0.0, 1.0);
            dp.dense(&y, h, theta, &mut buf);
            traj.clipped |= clip(&mut buf);
            traj.times.push(samples[si]);
            traj.states.push(buf.clone());
            si += 1;
        }
        y.copy_from_slice(&dp.y_new);
        if clip(&mut y) {
            traj.clipped = true;
            sys.rhs(&y, &mut dp.k[6]);
        }
        let k6 = core::mem::take(&mut dp.k[6]);
        dp.k[6] = core::mem::replace(&mut dp.k[0], k6);
        t = t_new;
        traj.steps += 1;
        if !dense_mode {
            traj.times.push(t);
            traj.states.push(y.clone());
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
    Ok(traj)
}

/// Evenly spaced sample times including both ends.
pub fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t1],
        _ => (0..n).map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyOptions {
    /// Defaults to 10⁴ × the slowest time constant at the start state.
    pub t_max: Option<f64>,
    /// Relative residual threshold.
    pub tolerance: f64,
    pub divergence: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions { t_max: None, tolerance: 1e-9, divergence: 1e12 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SteadyState {
    Fixed { c: Vec<f64>, t: f64 },
    /// `growing` lists non-sink species still rising when the search stopped.
    Divergent { c: Vec<f64>, t: f64, growing: Vec<SpeciesId> },
}

impl SteadyState {
    pub fn state(&self) -> &[f64] {
        match self {
            SteadyState::Fixed { c, .. } | SteadyState::Divergent { c, .. } => c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

fn eigenvalues(n: usize, j: &[f64]) -> Vec<Eigenvalue> {
    if n == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_row_slice(n, n, j);
    let mut ev: Vec<Eigenvalue> =
        m.complex_eigenvalues().iter().map(|z| Eigenvalue { re: z.re, im: z.im }).collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

/// Slowest relaxation time `1/min|Re λ|` over the non-zero eigenvalues of
/// the Jacobian at `c`; 1 s when every eigenvalue vanishes.
pub fn slowest_time_constant(sys: &OdeSystem, c: &[f64]) -> f64 {
    let ev = eigenvalues(sys.n, &sys.jacobian(c));
    let scale = ev.iter().map(|e| e.re.abs()).fold(0.0, f64::max);
    let slow = ev.iter().map(|e| e.re.abs()).filter(|&r| r > 1e-9 * scale.max(1e-300)).fold(f64::INFINITY, f64::min);
    if slow.is_finite() && slow > 0.0 {
        1.0 / slow
    } else {
        1.0
    }
}

/// One linearly implicit second-order Rosenbrock step with an embedded
/// first-order estimate.
fn ros2_step(sys: &OdeSystem, y: &[f64], h: f64, tol: &Tolerances) -> Option<(Vec<f64>, f64)> {
    const GAMMA: f64 = 1.0 + core::f64::consts::FRAC_1_SQRT_2;
    let n = sys.n;
    let j = sys.jacobian(y);
    let mut m = DMatrix::<f64>::identity(n, n);
    for r in 0..n {
        for c in 0..n {
            m[(r, c)] -= GAMMA * h * j[r * n + c];
        }
    }
    let lu = m.lu();
    let f0 = DVector::from_vec(sys.rhs_vec(y));
    let k1 = lu.solve(&f0)?;
    let y1: Vec<f64> = (0..n).map(|i| y[i] + h * k1[i]).collect();
    let f1 = DVector::from_vec(sys.rhs_vec(&y1));
    let k2 = lu.solve(&(f1 - &k1 * 2.0))?;
    let mut y_new = vec![0.0; n];
    let mut s = 0.0;
    for i in 0..n {
        y_new[i] = y[i] + h * (1.5 * k1[i] + 0.5 * k2[i]);
        let e = h * 0.5 * (k1[i] + k2[i]);
        let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
        s += (e / sc) * (e / sc);
    }
    let err = if n == 0 { 0.0 } else { libm::sqrt(s / n as f64) };
    Some((y_new, err))
}

/// Marches the stiff-stable Rosenbrock scheme until the non-sink residual
/// drops below `tolerance·max(1, ‖c‖∞)`, a non-sink coordinate passes the
/// divergence bound, or `t_max` elapses.
pub fn steady_state(sys: &OdeSystem, c0: &[f64], opts: &SteadyOptions) -> Result<SteadyState, FluidError> {
    if c0.len() != sys.n {
        return Err(FluidError::InvalidInput("initial state has the wrong dimension"));
    }
    if c0.iter().any(|&x| !(x >= 0.0)) {
        return Err(FluidError::InvalidInput("initial concentrations must be non-negative"));
    }
    let t_max = opts.t_max.unwrap_or_else(|| 1e4 * slowest_time_constant(sys, c0));
    let tol = Tolerances { atol: 1e-6, rtol: 1e-6, max_steps: 1_000_000 };
    let mut y = c0.to_vec();
    let mut t = 0.0;
    let mut h = 1e-6 * t_max.max(1e-9);
    let mut steps = 0u64;
    loop {
        let f = sys.rhs_vec(&y);
        let (res, mag) = sys.residual(&y, &f);
        let thresh = opts.tolerance * mag.max(1.0);
        if res < thresh {
            return Ok(SteadyState::Fixed { c: y, t });
        }
        let diverged = (0..sys.n).any(|i| !sys.sink[i] && y[i] > opts.divergence);
        if diverged || t >= t_max {
            let growing = (0..sys.n)
                .filter(|&i| !sys.sink[i] && f[i] > thresh && f[i] >= 1e-3 * res)
                .map(SpeciesId::from_index)
                .collect::<Vec<_>>();
            if growing.is_empty() && !diverged {
                return Ok(SteadyState::Fixed { c: y, t });
            }
            return Ok(SteadyState::Divergent { c: y, t, growing });
        }
        if steps >= tol.max_steps {
            return Err(FluidError::MaxStepsExceeded { t, steps });
        }
        if h < 1e-14 * t.max(1.0) {
            return Err(FluidError::StepSizeUnderflow { t, h });
        }
        let h_try = h.min(t_max - t).max(0.0);
        let h_try = if h_try == 0.0 { h } else { h_try };
        let (mut y_new, err) = ros2_step(sys, &y, h_try, &tol).ok_or(FluidError::Singular { t })?;
        steps += 1;
        if !err.is_finite() || err > 1.0 {
            h = h_try * 0.25;
            continue;
        }
        clip(&mut y_new);
        y = y_new;
        t += h_try;
        let fac = if err == 0.0 { 10.0 } else { (0.9 / libm::sqrt(err)).clamp(0.2, 10.0) };
        h = h_try * fac;
    }
}

/// Jacobian and spectrum at a fixed point.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    pub n: usize,
    /// Row-major n×n.
    pub jacobian: Vec<f64>,
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Eigenvalue>,
}

impl Linearization {
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.jacobian[row * self.n + col]
    }

    /// `1/min|Re λ|` over the non-zero eigenvalues.
    pub fn slowest_time_constant(&self) -> f64 {
        let scale = self.eigenvalues.iter().map(|e| e.re.abs()).fold(0.0, f64::max);
        let slow = self
            .eigenvalues
            .iter()
            .map(|e| e.re.abs())
            .filter(|&r| r > 1e-7 * scale.max(1e-300))
            .fold(f64::INFINITY, f64::min);
        1.0 / slow
    }
}

/// Central-difference Jacobian at `c` (step `max(1e-6, 1e-6·|c_s|)`) and its
/// eigenvalues. `c` must satisfy the steady-state residual test.
pub fn linearize(sys: &OdeSystem, c: &[f64]) -> Result<Linearization, FluidError> {
    linearize_with(sys, c, SteadyOptions::default().tolerance)
}

pub fn linearize_with(sys: &OdeSystem, c: &[f64], tolerance: f64) -> Result<Linearization, FluidError> {
    let n = sys.n;
    if c.len() != n {
        return Err(FluidError::InvalidInput("state has the wrong dimension"));
    }
    let f = sys.rhs_vec(c);
    let (res, mag) = sys.residual(c, &f);
    let thresh = tolerance * mag.max(1.0);
    if !(res < thresh) {
        return Err(FluidError::NotAFixedPoint { residual: res, tolerance: thresh });
    }
    let mut jac = vec![0.0; n * n];
    let mut x = c.to_vec();
    for s in 0..n {
        let h = (1e-6 * c[s].abs()).max(1e-6);
        x[s] = c[s] + h;
        let fp = sys.rhs_vec(&x);
        x[s] = c[s] - h;
        let fm = sys.rhs_vec(&x);
        x[s] = c[s];
        for row in 0..n {
            jac[row * n + s] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    let eigenvalues = eigenvalues(n, &jac);
    Ok(Linearization { n, jacobian: jac, eigenvalues })
}

/// Steady output rate of the enzymatic loop: `e0·k2·S/(k2/k1 + S)`.
pub fn mm_rate(s: f64, e0: f64, k1: f64, k2: f64) -> f64 {
    e0 * k2 * s / ((k2 / k1) + s)
}

/// `S + E → ES`, `ES → E + P` found inside a network.
#[derive(Clone, Debug, PartialEq)]
pub struct EnzymeLoop {
    pub substrate: SpeciesId,
    pub enzyme: SpeciesId,
    pub complex: SpeciesId,
    pub product: SpeciesId,
    pub k1: f64,
    pub k2: f64,
    /// Initial enzyme plus complex.
    pub e0: u64,
}

impl EnzymeLoop {
    pub fn v_max(&self) -> f64 {
        self.e0 as f64 * self.k2
    }

    pub fn half_saturation(&self) -> f64 {
        self.k2 / self.k1
    }
}

/// Finds the first binding/release pair with unit stoichiometry.
pub fn find_enzyme_loop(net: &ReactionNetwork) -> Option<EnzymeLoop> {
    let unit = |ts: &[crate::network::Term]| ts.iter().all(|t| t.count == 1);
    for bind in net.reactions() {
        if bind.reactants.len() != 2 || bind.products.len() != 1 || !unit(&bind.reactants) || !unit(&bind.products) {
            continue;
        }
        let complex = bind.products[0].species;
        for release in net.reactions() {
            if release.reactants.len() != 1
                || release.reactants[0].species != complex
                || release.reactants[0].count != 1
                || release.products.len() != 2
                || !unit(&release.products)
            {
                continue;
            }
            for (ei, e) in bind.reactants.iter().enumerate() {
                let enzyme = e.species;
                let substrate = bind.reactants[1 - ei].species;
                let Some(p) = release.products.iter().find(|t| t.species != enzyme) else { continue };
                if release.products.iter().any(|t| t.species == enzyme) && p.species != substrate {
                    let e0 = net.species_def(enzyme).initial + net.species_def(complex).initial;
                    return Some(EnzymeLoop {
                        substrate,
                        enzyme,
                        complex,
                        product: p.species,
                        k1: bind.k,
                        k2: release.k,
                        e0,
                    });
                }
            }
        }
    }
    None
}
