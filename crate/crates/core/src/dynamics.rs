//! Time evolution of Lindblad master equations
//! `ρ̇ = i[ρ, H(t)] + Σ_k rate_k (c_k ρ c_k† − ½{c_k†c_k, ρ})`.
//!
//! [`evolve`] and [`evolve_piecewise`] use fixed-step RK4 with the
//! Hamiltonian sampled at the stage times. [`evolve_split`] propagates a
//! time-independent Hamiltonian exactly and the dissipators by Strang
//! splitting, which is what makes long runs with fast phonon frequencies
//! affordable.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use faer::{c64, Mat, MatRef};

use crate::linalg::{self, cis, cre, SparseOp, I, ZERO};
use crate::model::{self, SystemParams};
use crate::qop::{DensityMatrix, HilbertSpace, Operator};
use crate::{Error, Result};

/// Largest `rate · sub-step` used for the dissipative part of a split step.
const DISSIPATIVE_SUBSTEP: f64 = 0.25;

/// Trace drift tolerated at any recorded time.
pub const TRACE_DRIFT_TOL: f64 = 1e-6;

/// `H(t) = Σ_k e^{iω_k t} T_k`. The sum must be Hermitian at every `t`,
/// which in practice means terms come in `(ω, T), (−ω, T†)` pairs.
#[derive(Debug, Clone)]
pub struct HarmonicHamiltonian {
    space: Arc<HilbertSpace>,
    terms: Vec<(f64, Operator)>,
}

impl HarmonicHamiltonian {
    pub fn new(space: Arc<HilbertSpace>, terms: Vec<(f64, Operator)>) -> Result<Self> {
        for (_, op) in &terms {
            if **op.space() != *space {
                return Err(Error::DimensionMismatch { expected: space.dim(), found: op.dim() });
            }
        }
        let h = Self { space, terms };
        for t in [0.0, 0.3, 1.234_567] {
            let defect = h.at(t).hermiticity_defect();
            if defect > 1e-10 * (1.0 + h.norm_bound()) {
                return Err(Error::input(alloc::format!("time-dependent Hamiltonian is not Hermitian (defect {defect:.2e})")));
            }
        }
        Ok(h)
    }

    pub fn constant(h: Operator) -> Result<Self> {
        let space = h.space().clone();
        Self::new(space, alloc::vec![(0.0, h)])
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn terms(&self) -> &[(f64, Operator)] {
        &self.terms
    }

    pub fn at(&self, t: f64) -> Operator {
        let mut h = Operator::zeros(&self.space);
        for (w, op) in &self.terms {
            h = h + op.scaled_c(cis(w * t));
        }
        h
    }

    pub fn is_static(&self) -> bool {
        self.terms.iter().all(|(w, _)| *w == 0.0)
    }

    /// Largest oscillation frequency `max |ω_k|`.
    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|(w, _)| w.abs()).fold(0.0, f64::max)
    }

    /// `Σ_k ‖T_k‖_∞`, an upper bound on `‖H(t)‖` for all `t`.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|(_, op)| linalg::norm_inf(op.data())).sum()
    }
}

impl TryFrom<Operator> for HarmonicHamiltonian {
    type Error = Error;
    fn try_from(h: Operator) -> Result<Self> {
        Self::constant(h)
    }
}

/// Observables recorded along a trajectory.
#[derive(Debug, Clone, Default)]
pub struct Record {
    /// `(name, O)`: `Re Tr(Oρ)` is stored at each grid time.
    pub observables: Vec<(String, Operator)>,
    /// Also keep the full density matrix at each grid time.
    pub keep_states: bool,
}

impl Record {
    pub fn observables(observables: Vec<(String, Operator)>) -> Self {
        Self { observables, keep_states: false }
    }

    pub fn states() -> Self {
        Self { observables: Vec::new(), keep_states: true }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `values[k][i]`: observable `i` at `times[k]`.
    pub values: Vec<Vec<f64>>,
    pub states: Vec<DensityMatrix>,
    pub final_state: DensityMatrix,
    /// Total number of integrator steps taken.
    pub steps: usize,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|row| row[i]).collect())
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == name)?;
        self.values.last().map(|row| row[i])
    }
}

/// Step-size controls for the RK4 integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    /// Upper bound on the step in ms, applied on top of the automatic bound.
    pub max_step: Option<f64>,
    /// Multiplies the number of steps per interval (2 = step halving).
    pub refine: u32,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self { max_step: None, refine: 1 }
    }
}

/// Precomputed sparse right-hand side of the master equation.
struct Generator {
    dim: usize,
    terms: Vec<(f64, SparseOp)>,
    jumps: Vec<(f64, SparseOp, SparseOp)>,
    damping: SparseOp,
    max_rate: f64,
    max_frequency: f64,
}

impl Generator {
    fn new(h: &HarmonicHamiltonian, dissipators: &[(f64, Operator)]) -> Result<Self> {
        let space = h.space();
        let dim = space.dim();
        let mut damping = Mat::<c64>::zeros(dim, dim);
        let mut jumps = Vec::with_capacity(dissipators.len());
        let mut max_rate = 0.0f64;
        for (rate, c) in dissipators {
            if **c.space() != **space {
                return Err(Error::DimensionMismatch { expected: dim, found: c.dim() });
            }
            if !(*rate >= 0.0) {
                return Err(Error::input(alloc::format!("dissipation rate must be nonnegative, got {rate}")));
            }
            if *rate == 0.0 {
                continue;
            }
            let cdc = &c.adjoint() * c;
            damping = &damping + &linalg::scale(cdc.data(), cre(*rate));
            max_rate = max_rate.max(rate * linalg::norm_inf(cdc.data()));
            let cs = SparseOp::from_dense(c.data());
            let cd = cs.adjoint();
            jumps.push((*rate, cs, cd));
        }
        // Oscillating terms bound the step through their frequency; the
        // Hamiltonian's own scale bounds it through the norm.
        let max_frequency = h.max_frequency().max(h.norm_bound());
        let terms = h.terms().iter().map(|(w, op)| (*w, SparseOp::from_dense(op.data()))).collect();
        Ok(Self { dim, terms, jumps, damping: SparseOp::from_dense(damping.as_ref()), max_rate, max_frequency })
    }

    /// `h ≤ min(2π/(80 ω_max), 1/(40 r_max))`
    fn step_bound(&self) -> f64 {
        let mut h = f64::INFINITY;
        if self.max_frequency > 0.0 {
            h = h.min(TAU / (80.0 * self.max_frequency));
        }
        if self.max_rate > 0.0 {
            h = h.min(1.0 / (40.0 * self.max_rate));
        }
        h
    }

    fn rhs(&self, t: f64, rho: MatRef<'_, c64>, out: &mut Mat<c64>) {
        out.fill(ZERO);
        for (w, op) in &self.terms {
            let coeff = if *w == 0.0 { I } else { I * cis(w * t) };
            op.left_mul_acc(rho, -coeff, out);
            op.right_mul_acc(rho, coeff, out);
        }
        self.damping.left_mul_acc(rho, cre(-0.5), out);
        self.damping.right_mul_acc(rho, cre(-0.5), out);
        for (rate, c, cd) in &self.jumps {
            let c_rho = c.left_mul(rho);
            cd.right_mul_acc(c_rho.as_ref(), cre(*rate), out);
        }
    }
}

/// Classical RK4 workspace.
struct Rk4 {
    k1: Mat<c64>,
    k2: Mat<c64>,
    k3: Mat<c64>,
    k4: Mat<c64>,
    tmp: Mat<c64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = || Mat::<c64>::zeros(n, n);
        Self { k1: z(), k2: z(), k3: z(), k4: z(), tmp: z() }
    }

    fn step(&mut self, g: &Generator, t: f64, h: f64, rho: &mut Mat<c64>) {
        let n = g.dim;
        g.rhs(t, rho.as_ref(), &mut self.k1);
        axpy_into(&mut self.tmp, rho, &self.k1, h / 2.0, n);
        g.rhs(t + h / 2.0, self.tmp.as_ref(), &mut self.k2);
        axpy_into(&mut self.tmp, rho, &self.k2, h / 2.0, n);
        g.rhs(t + h / 2.0, self.tmp.as_ref(), &mut self.k3);
        axpy_into(&mut self.tmp, rho, &self.k3, h, n);
        g.rhs(t + h, self.tmp.as_ref(), &mut self.k4);
        let w = h / 6.0;
        for j in 0..n {
            let (k1, k2, k3, k4) =
                (self.k1.col_as_slice(j), self.k2.col_as_slice(j), self.k3.col_as_slice(j), self.k4.col_as_slice(j));
            let r = rho.col_as_slice_mut(j);
            for i in 0..n {
                r[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
            }
        }
    }
}

fn axpy_into(out: &mut Mat<c64>, x: &Mat<c64>, y: &Mat<c64>, a: f64, n: usize) {
    for j in 0..n {
        let (xc, yc) = (x.col_as_slice(j), y.col_as_slice(j));
        let oc = out.col_as_slice_mut(j);
        for i in 0..n {
            oc[i] = xc[i] + yc[i] * a;
        }
    }
}

fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.first() != Some(&0.0) {
        return Err(Error::input("time grid must start at 0"));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::input("time grid must be strictly increasing"));
    }
    Ok(())
}

/// Shared recording and trace-drift bookkeeping.
struct Recorder<'a> {
    record: &'a Record,
    space: Arc<HilbertSpace>,
    observables: Vec<SparseOp>,
    traj_times: Vec<f64>,
    values: Vec<Vec<f64>>,
    states: Vec<DensityMatrix>,
}

impl<'a> Recorder<'a> {
    fn new(record: &'a Record, space: &Arc<HilbertSpace>) -> Result<Self> {
        let mut observables = Vec::with_capacity(record.observables.len());
        for (name, op) in &record.observables {
            if **op.space() != **space {
                return Err(Error::input(alloc::format!("observable `{name}` lives on a different space")));
            }
            observables.push(SparseOp::from_dense(op.data()));
        }
        Ok(Self { record, space: space.clone(), observables, traj_times: Vec::new(), values: Vec::new(), states: Vec::new() })
    }

    fn push(&mut self, t: f64, rho: &Mat<c64>) -> Result<()> {
        let tr = linalg::trace(rho.as_ref());
        let drift = libm::hypot(tr.re - 1.0, tr.im);
        if !(drift <= TRACE_DRIFT_TOL) {
            return Err(Error::Integration { time: t, drift });
        }
        let row = self
            .observables
            .iter()
            .map(|o| {
                o.entries().iter().fold(ZERO, |acc, &(i, k, v)| acc + v * rho[(k, i)]).re
            })
            .collect();
        self.values.push(row);
        self.traj_times.push(t);
        if self.record.keep_states {
            self.states.push(DensityMatrix::from_numerical(self.space.clone(), rho.as_ref(), TRACE_DRIFT_TOL)?);
        }
        Ok(())
    }

    fn finish(self, rho: &Mat<c64>, steps: usize) -> Result<Trajectory> {
        let t = self.traj_times.last().copied().unwrap_or(0.0);
        let final_state = DensityMatrix::from_numerical(self.space.clone(), rho.as_ref(), TRACE_DRIFT_TOL)
            .map_err(|_| Error::Integration { time: t, drift: (linalg::trace(rho.as_ref()).re - 1.0).abs() })?;
        Ok(Trajectory {
            times: self.traj_times,
            names: self.record.observables.iter().map(|(n, _)| n.clone()).collect(),
            values: self.values,
            states: self.states,
            final_state,
            steps,
        })
    }
}

/// Advances `rho` from `t0` to `t1` with uniform RK4 steps.
fn advance(g: &Generator, ws: &mut Rk4, rho: &mut Mat<c64>, t0: f64, t1: f64, opts: &StepOptions) -> usize {
    let mut h_max = g.step_bound();
    if let Some(m) = opts.max_step {
        h_max = h_max.min(m);
    }
    let span = t1 - t0;
    let mut steps = if h_max.is_finite() { libm::ceil(span / h_max) as usize } else { 1 };
    steps = steps.max(1) * opts.refine.max(1) as usize;
    let h = span / steps as f64;
    for k in 0..steps {
        ws.step(g, t0 + k as f64 * h, h, rho);
    }
    steps
}

fn check_initial(rho0: &DensityMatrix, space: &Arc<HilbertSpace>) -> Result<()> {
    if **rho0.space() != **space {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: rho0.dim() });
    }
    Ok(())
}

/// Fixed-step RK4 integration recorded at `t_grid` (which starts at 0).
pub fn evolve(
    rho0: &DensityMatrix,
    h: &HarmonicHamiltonian,
    dissipators: &[(f64, Operator)],
    t_grid: &[f64],
    record: &Record,
    opts: &StepOptions,
) -> Result<Trajectory> {
    validate_grid(t_grid)?;
    check_initial(rho0, h.space())?;
    let g = Generator::new(h, dissipators)?;
    let mut ws = Rk4::new(g.dim);
    let mut rho = rho0.data().to_owned();
    let mut rec = Recorder::new(record, h.space())?;
    rec.push(0.0, &rho)?;
    let mut steps = 0;
    for w in t_grid.windows(2) {
        steps += advance(&g, &mut ws, &mut rho, w[0], w[1], opts);
        rec.push(w[1], &rho)?;
    }
    rec.finish(&rho, steps)
}

/// Hamiltonian family used by a schedule segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HamiltonianKind {
    /// Phonon-free effective Hamiltonian with microwave.
    Effective,
    /// Effective misaligned Hamiltonian with microwave.
    MisalignedEffective,
    /// Interaction-picture laser coupling with microwave.
    Interaction,
    /// Misaligned interaction-picture coupling with microwave.
    Misaligned,
    /// Time-independent phonon frame with microwave.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub kind: HamiltonianKind,
    /// Standing-wave phase for this segment.
    pub phi: f64,
    /// ±1; flips the sign of Ω_a.
    pub sign: f64,
}

impl Segment {
    pub fn hamiltonian(&self, params: &SystemParams, space: &Arc<HilbertSpace>) -> Result<HarmonicHamiltonian> {
        let mut p = params.clone();
        p.phi = self.phi;
        match self.kind {
            HamiltonianKind::Effective => HarmonicHamiltonian::constant(model::build_h_effective(&p, space)?),
            HamiltonianKind::MisalignedEffective => {
                let h = model::build_h_misaligned_eff(&p, space, self.sign)? + model::microwave(&p, space)?;
                HarmonicHamiltonian::constant(h)
            }
            HamiltonianKind::Interaction => {
                if self.sign != 1.0 {
                    return Err(Error::input("sign flips need a misaligned Hamiltonian kind"));
                }
                model::interaction_hamiltonian(&p, space)
            }
            HamiltonianKind::Misaligned => {
                let laser = model::misaligned_hamiltonian(&p, space, self.sign)?;
                let mut terms = laser.terms().to_vec();
                terms.push((0.0, model::microwave(&p, space)?));
                HarmonicHamiltonian::new(space.clone(), terms)
            }
            HamiltonianKind::Static => {
                if self.sign != 1.0 {
                    return Err(Error::input("sign flips need a misaligned Hamiltonian kind"));
                }
                HarmonicHamiltonian::constant(model::build_h_static(&p, space)?)
            }
        }
    }
}

/// Contiguous segments covering `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    segments: Vec<Segment>,
}

impl Schedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let first = segments.first().ok_or_else(|| Error::input("a schedule needs at least one segment"))?;
        if first.t_start != 0.0 {
            return Err(Error::input("schedule must start at t = 0"));
        }
        for s in &segments {
            if !(s.t_end > s.t_start) {
                return Err(Error::input("schedule segments must have positive length"));
            }
            if s.sign != 1.0 && s.sign != -1.0 {
                return Err(Error::input("segment sign must be ±1"));
            }
        }
        for w in segments.windows(2) {
            if w[1].t_start != w[0].t_end {
                return Err(Error::input("schedule segments must be contiguous"));
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map(|s| s.t_end).unwrap_or(0.0)
    }
}

/// `N + 1` equal segments over `[0, T]` alternating the phase φ, φ + π, φ, …
pub fn switching_schedule(t_total: f64, n: usize, phi: f64, kind: HamiltonianKind) -> Result<Schedule> {
    if !(t_total > 0.0) {
        return Err(Error::input("switching schedule needs T > 0"));
    }
    let pieces = n + 1;
    let dt = t_total / pieces as f64;
    let segments = (0..pieces)
        .map(|k| Segment {
            t_start: k as f64 * dt,
            t_end: if k + 1 == pieces { t_total } else { (k + 1) as f64 * dt },
            kind,
            phi: if k % 2 == 0 { phi } else { phi + core::f64::consts::PI },
            sign: 1.0,
        })
        .collect();
    Schedule::new(segments)
}

/// RK4 integration segment by segment; the state is carried across segment
/// boundaries and the Hamiltonian is rebuilt from each segment's tag.
pub fn evolve_piecewise(
    rho0: &DensityMatrix,
    schedule: &Schedule,
    params: &SystemParams,
    dissipators: &[(f64, Operator)],
    t_grid: &[f64],
    record: &Record,
    opts: &StepOptions,
) -> Result<Trajectory> {
    validate_grid(t_grid)?;
    let space = rho0.space().clone();
    if *t_grid.last().unwrap() > schedule.t_end() * (1.0 + 1e-12) {
        return Err(Error::input("time grid extends past the end of the schedule"));
    }
    // Segments that only differ in start time share one generator.
    let mut cache: Vec<(HamiltonianKind, u64, u64, Generator)> = Vec::new();
    let mut generator_for = |seg: &Segment| -> Result<usize> {
        let key = (seg.kind, seg.phi.to_bits(), seg.sign.to_bits());
        if let Some(i) = cache.iter().position(|(k, p, s, _)| (*k, *p, *s) == key) {
            return Ok(i);
        }
        let h = seg.hamiltonian(params, &space)?;
        cache.push((seg.kind, key.1, key.2, Generator::new(&h, dissipators)?));
        Ok(cache.len() - 1)
    };
    let segment_ids: Vec<usize> = schedule.segments().iter().map(&mut generator_for).collect::<Result<_>>()?;

    let mut ws = Rk4::new(space.dim());
    let mut rho = rho0.data().to_owned();
    let mut rec = Recorder::new(record, &space)?;
    rec.push(0.0, &rho)?;
    let mut steps = 0;
    let mut seg = 0;
    let segs = schedule.segments();
    for w in t_grid.windows(2) {
        let (mut t, target) = (w[0], w[1]);
        while t < target {
            while segs[seg].t_end <= t {
                seg += 1;
            }
            let stop = if segs[seg].t_end < target { segs[seg].t_end } else { target };
            steps += advance(&cache[segment_ids[seg]].3, &mut ws, &mut rho, t, stop, opts);
            t = stop;
        }
        rec.push(target, &rho)?;
    }
    rec.finish(&rho, steps)
}

/// Strang splitting for a time-independent Hamiltonian: each step applies
/// `D(δ/2) U(δ) D(δ/2)` with `U` the exact unitary of `h` and `D` the
/// dissipative flow, integrated by RK4 sub-steps small enough that
/// `rate · sub-step ≤ 0.25`. The scheme is second order in `δ` once
/// `δ ‖H‖` is small; for stiff `h` the splitting error saturates and must be
/// measured by comparing two step sizes.
pub fn evolve_split(
    rho0: &DensityMatrix,
    h: &Operator,
    dissipators: &[(f64, Operator)],
    t_grid: &[f64],
    record: &Record,
    dt: f64,
) -> Result<Trajectory> {
    validate_grid(t_grid)?;
    check_initial(rho0, h.space())?;
    if !(dt > 0.0) {
        return Err(Error::input("split-step size must be positive"));
    }
    let space = h.space().clone();
    let zero = HarmonicHamiltonian::constant(Operator::zeros(&space))?;
    let dissipative = Generator::new(&zero, dissipators)?;
    let (values, v) = linalg::hermitian_eigen(h.data())?;
    let mut ws = Rk4::new(space.dim());
    let mut rho = rho0.data().to_owned();
    let mut rec = Recorder::new(record, &space)?;
    rec.push(0.0, &rho)?;

    let mut cached: Option<(u64, Mat<c64>, Mat<c64>, usize)> = None;
    let mut steps = 0;
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        let n = libm::ceil(span / dt).max(1.0) as usize;
        let delta = span / n as f64;
        if cached.as_ref().map(|c| c.0) != Some(delta.to_bits()) {
            let u = linalg::spectral_function(&values, v.as_ref(), |e| cis(-e * delta));
            let ud = u.adjoint().to_owned();
            let sub = if dissipative.max_rate > 0.0 {
                libm::ceil(dissipative.max_rate * delta / 2.0 / DISSIPATIVE_SUBSTEP).max(1.0) as usize
            } else {
                0
            };
            cached = Some((delta.to_bits(), u, ud, sub));
        }
        let (_, u, ud, sub) = cached.as_ref().unwrap();
        for _ in 0..n {
            half_dissipate(&dissipative, &mut ws, &mut rho, delta / 2.0, *sub);
            rho = &(u * &rho) * ud;
            half_dissipate(&dissipative, &mut ws, &mut rho, delta / 2.0, *sub);
        }
        steps += n;
        rec.push(w[1], &rho)?;
    }
    rec.finish(&rho, steps)
}

fn half_dissipate(g: &Generator, ws: &mut Rk4, rho: &mut Mat<c64>, span: f64, sub: usize) {
    if sub == 0 {
        return;
    }
    let h = span / sub as f64;
    for _ in 0..sub {
        ws.step(g, 0.0, h, rho);
    }
}

/// Right-hand side of the master equation at time `t`, evaluated directly
/// from the operators (used as an oracle and for stationarity checks).
pub fn lindblad_rhs(h: &Operator, dissipators: &[(f64, Operator)], rho: MatRef<'_, c64>) -> Mat<c64> {
    let hd = h.data();
    let mut out = &(rho * hd) - &(hd * rho);
    out = linalg::scale(out.as_ref(), I);
    for (rate, c) in dissipators {
        let cd = c.adjoint();
        let cdc = &cd * c;
        let jump = &(c.data() * rho) * cd.data();
        let anti = &(cdc.data() * rho) + &(rho * cdc.data());
        out = &out + &linalg::scale((&jump - &linalg::scale(anti.as_ref(), cre(0.5))).as_ref(), cre(*rate));
    }
    out
}
