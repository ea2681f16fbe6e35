//! Named experiments, the generic steady-state sweep and the single-run
//! commands. Every run produces metadata plus one or more tables.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use iontangle_core::dynamics::{
    evolve, evolve_piecewise, evolve_split, switching_schedule, HamiltonianKind, HarmonicHamiltonian, Record, StepOptions,
    Trajectory,
};
use iontangle_core::model::level::{E, G};
use iontangle_core::model::{self, DissipatorKind, SystemParams};
use iontangle_core::observables::{chsh_correlation, population, population_observables, reduce_to_ions, Target};
use iontangle_core::qop::{DensityMatrix, HilbertSpace, Operator};
use iontangle_core::reduction::compare_full_effective;
use iontangle_core::steady::{liouvillian, steady_state};
use iontangle_core::to_khz;
use log::info;
use serde_json::{json, Value};

use crate::config::{describe_params, unit_of, Axis, Overrides, ScenarioConfig};
use crate::error::RunError;
use crate::sweep::{grid_points, par_map};
use crate::table::{Cell, Table};

pub const SCENARIOS: [&str; 8] = ["table1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "sec6"];

/// Drift between a run and its refined re-run at or above which a result is
/// marked unconverged.
pub const DRIFT_THRESHOLD: f64 = 1e-3;

const POPULATIONS: [(&str, &str); 4] = [
    ("P_S", "singlet (|eg⟩−|ge⟩)/√2 population"),
    ("P_T", "triplet (|eg⟩+|ge⟩)/√2 population"),
    ("P_ee", "|ee⟩ population"),
    ("P_gg", "|gg⟩ population"),
];

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    pub metadata: Value,
    pub tables: Vec<Table>,
}

impl ScenarioResult {
    pub fn table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.file == file)
    }

    /// Writes `root/<name>/meta.json` and the tables; returns the directory.
    pub fn write(&self, root: &Path) -> Result<PathBuf, RunError> {
        let dir = root.join(&self.name);
        std::fs::create_dir_all(&dir)?;
        let meta = serde_json::to_string_pretty(&self.metadata).map_err(|e| RunError::Io(e.into()))?;
        std::fs::write(dir.join("meta.json"), meta + "\n")?;
        for t in &self.tables {
            t.write(&dir)?;
        }
        Ok(dir)
    }
}

/// Engineered decay of |r⟩: symmetric to g and e, or with the |a⟩ → |r⟩
/// branch kept as dephasing of |r⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engineered {
    Plain,
    Branching,
}

impl Engineered {
    pub fn name(self) -> &'static str {
        match self {
            Engineered::Plain => "plain",
            Engineered::Branching => "branching",
        }
    }

    pub fn parse(s: &str) -> Result<Self, RunError> {
        match s {
            "plain" => Ok(Engineered::Plain),
            "branching" => Ok(Engineered::Branching),
            _ => Err(RunError::Config(format!("unknown engineered decay variant `{s}` (plain, branching)"))),
        }
    }

    fn kind(self) -> DissipatorKind {
        match self {
            Engineered::Plain => DissipatorKind::EngineeredEff,
            Engineered::Branching => DissipatorKind::EngineeredBranching,
        }
    }
}

/// Engineered decay plus whichever of natural decay, collective dephasing and
/// phonon damping have nonzero rates.
pub fn channels(p: &SystemParams, space: &std::sync::Arc<HilbertSpace>, e: Engineered) -> Result<Vec<(f64, Operator)>, RunError> {
    let mut d = model::build_dissipators(p, e.kind(), space)?;
    if p.gamma_r > 0.0 {
        d.extend(model::build_dissipators(p, DissipatorKind::NaturalR, space)?);
    }
    if p.gamma_cd > 0.0 {
        d.extend(model::build_dissipators(p, DissipatorKind::CollectiveDephasing, space)?);
    }
    if space.contains(model::MODES[0]) && (p.kappa1 > 0.0 || p.kappa2 > 0.0) {
        d.extend(model::build_dissipators(p, DissipatorKind::PhononThermal, space)?);
    }
    Ok(d)
}

/// `Σ_{k,l ∈ {g,e}} |kl⟩⟨kl| / 4` on the two-ion internal space.
pub fn mixed_qubits() -> Result<DensityMatrix, RunError> {
    let mut w = vec![0.0; 9];
    for a in [G, E] {
        for b in [G, E] {
            w[a * 3 + b] = 0.25;
        }
    }
    Ok(DensityMatrix::diagonal(&model::internal_space(), &w)?)
}

/// Mixed qubits times `Π_p (|0⟩⟨0| + |1⟩⟨1|)/2` on the full space.
pub fn mixed_qubits_and_phonons(n_cut: usize) -> Result<DensityMatrix, RunError> {
    if n_cut < 2 {
        return Err(RunError::Config("the mixed phonon start needs n_cut >= 2".into()));
    }
    let modes = std::sync::Arc::new(HilbertSpace::new([(model::MODES[0], n_cut), (model::MODES[1], n_cut)])?);
    let mut w = vec![0.0; n_cut * n_cut];
    for a in 0..2 {
        for b in 0..2 {
            w[a * n_cut + b] = 0.25;
        }
    }
    Ok(mixed_qubits()?.kron(&DensityMatrix::diagonal(&modes, &w)?)?)
}

// ---------------------------------------------------------------------------
// Steady states

#[derive(Debug, Clone)]
pub struct SteadyPoint {
    /// P_S, P_T, P_ee, P_gg of the ion-reduced state.
    pub populations: [f64; 4],
    pub chsh: f64,
    pub residual: f64,
    pub nullspace_dim: Option<usize>,
    pub ions: DensityMatrix,
}

impl SteadyPoint {
    pub fn p_s(&self) -> f64 {
        self.populations[0]
    }
}

/// Direct steady-state solve of the static-frame model with phonons.
pub fn solve_steady(p: &SystemParams, e: Engineered) -> Result<SteadyPoint, RunError> {
    let space = model::full_space(p.n_cut)?;
    let h = model::build_h_static(p, &space)?;
    let l = liouvillian(&h, &channels(p, &space, e)?)?;
    let r = steady_state(&l)?;
    let ions = reduce_to_ions(&r.rho_ss)?;
    let internal = model::internal_space();
    let mut populations = [0.0; 4];
    for (slot, t) in populations.iter_mut().zip(Target::ALL) {
        *slot = population(&ions, &t.ket(&internal)?)?;
    }
    let chsh = chsh_correlation(&ions)?;
    Ok(SteadyPoint { populations, chsh, residual: r.residual, nullspace_dim: r.nullspace_dim, ions })
}

fn steady_columns(t: Table) -> Table {
    let mut t = t;
    for (n, what) in POPULATIONS {
        t = t.column(n, "1", &format!("{what} of the ion-reduced steady state"));
    }
    t.column("S", "1", "CHSH correlation")
        .column("residual", "1", "‖L vec(ρ_ss)‖₂")
        .column("nullspace_dim", "1", "dimension of the kernel of L")
        .column("error", "text", "failure message, empty on success")
}

fn steady_cells(r: &Result<SteadyPoint, RunError>) -> Vec<Cell> {
    match r {
        Ok(s) => {
            let mut v: Vec<Cell> = s.populations.iter().map(|&x| Cell::Num(x)).collect();
            v.extend([Cell::Num(s.chsh), Cell::Num(s.residual), s.nullspace_dim.into(), Cell::Empty]);
            v
        }
        Err(e) => {
            let mut v = vec![Cell::Empty; 7];
            v.push(Cell::Text(e.to_string()));
            v
        }
    }
}

// ---------------------------------------------------------------------------
// Run bookkeeping

struct Run<'a> {
    name: &'static str,
    cfg: &'a ScenarioConfig,
    overrides: Overrides,
    started: Instant,
    warnings: Mutex<BTreeSet<String>>,
}

impl<'a> Run<'a> {
    fn new(name: &'static str, cfg: &'a ScenarioConfig) -> Result<Self, RunError> {
        if let Some(s) = &cfg.scenario {
            if s != name {
                return Err(RunError::Config(format!("configuration is for `{s}`, not `{name}`")));
            }
        }
        info!("running {name}");
        Ok(Self { name, cfg, overrides: cfg.param_overrides()?, started: Instant::now(), warnings: Mutex::default() })
    }

    /// Scenario defaults, then the file's overrides, then `point`.
    fn params(&self, base: &Overrides, point: &[(&str, f64)]) -> Result<SystemParams, RunError> {
        let mut o = base.clone();
        o.extend(&self.overrides);
        for (k, v) in point {
            o.push(k, Some(*v))?;
        }
        let p = o.resolve(&SystemParams::default())?;
        self.warnings.lock().unwrap().extend(p.warnings());
        Ok(p)
    }

    /// Default axes with any same-named axes from the file substituted.
    fn axes(&self, defaults: Vec<Axis>) -> Result<Vec<Axis>, RunError> {
        let mut axes = defaults;
        for a in &self.cfg.grid {
            let Some(slot) = axes.iter_mut().find(|d| d.name == a.name) else {
                let known: Vec<&str> = axes.iter().map(|d| d.name.as_str()).collect();
                return Err(RunError::Config(format!(
                    "`{}` has no axis `{}` (available: {})",
                    self.name,
                    a.name,
                    known.join(", ")
                )));
            };
            if a.values.is_empty() || a.values.iter().any(|v| !v.is_finite()) {
                return Err(RunError::Config(format!("axis `{}` needs finite values", a.name)));
            }
            slot.values = a.values.clone();
        }
        Ok(axes)
    }

    fn convergence_enabled(&self) -> bool {
        self.cfg.options.convergence_check.unwrap_or(true)
    }

    fn finish(self, base: &SystemParams, axes: &[Axis], convergence: Value, summary: Value, tables: Vec<Table>) -> ScenarioResult {
        let drift = convergence.get("drift").and_then(Value::as_f64);
        let unconverged = drift.is_some_and(|d| !(d < DRIFT_THRESHOLD));
        let warnings: Vec<String> = self.warnings.into_inner().unwrap().into_iter().collect();
        let metadata = json!({
            "scenario": self.name,
            "version": env!("CARGO_PKG_VERSION"),
            "params": describe_params(base),
            "axes": axes,
            "options": self.cfg.options,
            "runtime_s": self.started.elapsed().as_secs_f64(),
            "convergence": convergence,
            "unconverged": unconverged,
            "summary": summary,
            "warnings": warnings,
            "tables": tables.iter().map(|t| t.file.clone()).collect::<Vec<_>>(),
        });
        info!("{} finished in {:.1} s", self.name, self.started.elapsed().as_secs_f64());
        ScenarioResult { name: self.name.to_string(), metadata, tables }
    }
}

fn disabled() -> Value {
    json!({ "check": "disabled" })
}

fn drift_record(check: &str, drift: f64, detail: Value) -> Value {
    let mut v = json!({
        "check": check,
        "drift": drift,
        "threshold": DRIFT_THRESHOLD,
        "converged": drift < DRIFT_THRESHOLD,
    });
    if let (Value::Object(m), Value::Object(d)) = (&mut v, detail) {
        m.extend(d);
    }
    v
}

fn uniform(t_end: f64, samples: usize) -> Result<Vec<f64>, RunError> {
    if !(t_end > 0.0) || samples < 2 {
        return Err(RunError::Config("t_end_ms must be positive and samples at least 2".into()));
    }
    Ok((0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect())
}

fn max_series_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    a.values.iter().zip(&b.values).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs())).fold(0.0, f64::max)
}

fn axis_unit(name: &str) -> &'static str {
    unit_of(name).unwrap_or("1")
}

fn point_json(axes: &[Axis], values: &[f64]) -> Value {
    Value::Object(axes.iter().zip(values).map(|(a, v)| (a.name.clone(), json!(v))).collect())
}

// ---------------------------------------------------------------------------
// Entry points

pub fn run_scenario(name: &str, cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    match name {
        "table1" => table1(cfg),
        "fig2" => fig2(cfg),
        "fig3" => fig3(cfg),
        "fig4" => fig4(cfg),
        "fig5" => fig5(cfg),
        "fig6" => fig6(cfg),
        "fig7" => fig7(cfg),
        "sec6" => sec6(cfg),
        _ => Err(RunError::Config(format!("unknown scenario `{name}` (available: {})", SCENARIOS.join(", ")))),
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn fig6_rates() -> Overrides {
    let mut o = Overrides::default();
    o.push("kappa1_over_2pi_khz", Some(1.0)).unwrap();
    o.push("kappa2_over_2pi_khz", Some(0.1)).unwrap();
    o
}

// ---------------------------------------------------------------------------
// Time-domain scenarios

fn table1(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    let run = Run::new("table1", cfg)?;
    let axes = run.axes(vec![Axis::new("gamma_r_over_lambda", [1.0, 0.1, 0.01])])?;
    let base = Overrides::default();
    let space = model::internal_space();
    let obs = population_observables(&space)?;
    let rho0 = mixed_qubits()?;
    let check = run.convergence_enabled();

    let runs = par_map(&axes[0].values, |&x| -> Result<_, RunError> {
        let p = run.params(&base, &[("gamma_r_over_lambda", x)])?;
        let lambda = p.derive()?.lambda.abs();
        let t_end = cfg.options.t_end_ms.unwrap_or(800.0 / lambda);
        let grid = uniform(t_end, cfg.options.samples.unwrap_or(801))?;
        let h = HarmonicHamiltonian::constant(model::build_h_effective(&p, &space)?)?;
        let d = model::build_dissipators(&p, DissipatorKind::NaturalR, &space)?;
        let rec = Record::observables(obs.clone());
        let tr = evolve(&rho0, &h, &d, &grid, &rec, &StepOptions::default())?;
        let drift = if check {
            let fine = evolve(&rho0, &h, &d, &grid, &rec, &StepOptions { refine: 2, ..StepOptions::default() })?;
            Some(max_series_gap(&tr, &fine))
        } else {
            None
        };
        Ok((lambda, tr, drift))
    })?;

    let mut table = Table::new("populations.csv")
        .column("gamma_r_over_lambda", "1", "natural decay rate of |r⟩ in units of |λ|")
        .column("t_ms", "ms", "time")
        .column("lambda_t", "1", "|λ| t");
    for (n, what) in POPULATIONS {
        table = table.column(n, "1", what);
    }
    let mut finals = Vec::new();
    let mut drift = 0.0f64;
    for (x, r) in axes[0].values.iter().zip(runs) {
        let (lambda, tr, d) = r.map_err(|e| e.context(&format!("gamma_r_over_lambda = {x}")))?;
        drift = drift.max(d.unwrap_or(0.0));
        for (t, row) in tr.times.iter().zip(&tr.values) {
            let mut cells = vec![Cell::Num(*x), Cell::Num(*t), Cell::Num(lambda * t)];
            cells.extend(row.iter().map(|&v| Cell::Num(v)));
            table.push(cells);
        }
        finals.push(json!({ "gamma_r_over_lambda": x, "t_end_ms": tr.times.last(), "P_S_final": tr.last("P_S") }));
    }
    let convergence = if check {
        drift_record("step_halving", drift, json!({ "note": "phonon-free model; n_cut does not enter" }))
    } else {
        disabled()
    };
    let p = run.params(&base, &[])?;
    Ok(run.finish(&p, &axes, convergence, json!({ "final": finals }), vec![table]))
}

fn fig2(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    let run = Run::new("fig2", cfg)?;
    let axes = run.axes(vec![Axis::new("gamma_over_omega_b", [2.0, 5.0, 10.0])])?;
    let p = run.params(&Overrides::default(), &[])?;
    let omega_b = p.omega_b;
    let results = par_map(&axes[0].values, |&ratio| {
        let gamma = ratio * omega_b;
        let t_end = cfg.options.t_end_ms.unwrap_or(10.0 * gamma / (omega_b * omega_b));
        compare_full_effective(omega_b, gamma, t_end).map_err(RunError::from)
    })?;
    let mut table = Table::new("elimination.csv")
        .column("gamma_over_omega_b", "1", "decay rate of |a⟩ over the |r⟩-|a⟩ Rabi frequency")
        .column("t_ms", "ms", "time")
        .column("omega_b_t", "1", "Ω_b t")
        .column("ground_full", "1", "ρ_gg + ρ_ee, four-level model")
        .column("ground_eff", "1", "ρ_gg + ρ_ee, eliminated model")
        .column("rho_aa_full", "1", "ρ_aa, four-level model")
        .column("rho_rr_full", "1", "ρ_rr, four-level model");
    let mut summary = Vec::new();
    for (ratio, r) in axes[0].values.iter().zip(results) {
        let c = r.map_err(|e| e.context(&format!("gamma_over_omega_b = {ratio}")))?;
        for k in 0..c.times.len() {
            table.push(vec![
                Cell::Num(*ratio),
                Cell::Num(c.times[k]),
                Cell::Num(omega_b * c.times[k]),
                Cell::Num(c.ground_full[k]),
                Cell::Num(c.ground_eff[k]),
                Cell::Num(c.rho_aa_full[k]),
                Cell::Num(c.rho_rr_full[k]),
            ]);
        }
        let expected = omega_b / ratio;
        summary.push(json!({
            "gamma_over_omega_b": ratio,
            "max_deviation": c.max_deviation,
            "peak_rho_aa": c.peak_rho_aa,
            "fitted_rate_rad_per_ms": c.fitted_rate,
            "gamma_eff_rad_per_ms": expected,
            "fitted_rate_relative_error": (c.fitted_rate - expected).abs() / expected,
        }));
    }
    let convergence = json!({ "check": "not_applicable", "note": "single-ion model without phonon modes" });
    Ok(run.finish(&p, &axes, convergence, json!({ "ratios": summary }), vec![table]))
}

fn fig3(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    let run = Run::new("fig3", cfg)?;
    let p = run.params(&Overrides::default(), &[])?;
    let lambda = p.derive()?.lambda.abs();
    let t_end = cfg.options.t_end_ms.unwrap_or(800.0 / lambda);
    let grid = uniform(t_end, cfg.options.samples.unwrap_or(201))?;
    let delta = cfg.options.split_step_ms.unwrap_or(0.2);
    if !(delta > 0.0) {
        return Err(RunError::Config("split_step_ms must be positive".into()));
    }

    // (n_cut, split step); the first job is the reported curve.
    let mut jobs = vec![(p.n_cut, delta)];
    if cfg.options.split_gap_check.unwrap_or(true) {
        jobs.push((p.n_cut, delta / 2.0));
    }
    if run.convergence_enabled() {
        jobs.push((p.n_cut + 1, delta));
    }
    let full_run = |&(n_cut, dt): &(usize, f64)| -> Result<Trajectory, RunError> {
        let mut q = p.clone();
        q.n_cut = n_cut;
        let space = model::full_space(n_cut)?;
        let rho0 = mixed_qubits_and_phonons(n_cut)?;
        let h = model::build_h_static(&q, &space)?;
        let d = channels(&q, &space, Engineered::Plain)?;
        let rec = Record::observables(population_observables(&space)?);
        info!("fig3 full model n_cut = {n_cut}, step {dt} ms");
        Ok(evolve_split(&rho0, &h, &d, &grid, &rec, dt)?)
    };
    let full = par_map(&jobs, full_run)?.into_iter().collect::<Result<Vec<_>, _>>()?;

    let internal = model::internal_space();
    let h = HarmonicHamiltonian::constant(model::build_h_effective(&p, &internal)?)?;
    let d = channels(&p, &internal, Engineered::Plain)?;
    let eff = evolve(&mixed_qubits()?, &h, &d, &grid, &Record::observables(population_observables(&internal)?), &StepOptions::default())?;

    let mut table = Table::new("populations.csv").column("t_ms", "ms", "time");
    for model_name in ["full", "eff"] {
        for (n, what) in POPULATIONS {
            let model_desc = if model_name == "full" { "full model with phonons" } else { "effective model" };
            table = table.column(&format!("{n}_{model_name}"), "1", &format!("{what}, {model_desc}"));
        }
    }
    for k in 0..grid.len() {
        let mut row = vec![Cell::Num(grid[k])];
        row.extend(full[0].values[k].iter().map(|&v| Cell::Num(v)));
        row.extend(eff.values[k].iter().map(|&v| Cell::Num(v)));
        table.push(row);
    }
    let ps_full = full[0].series("P_S").unwrap();
    let ps_eff = eff.series("P_S").unwrap();
    let max_gap = ps_full.iter().zip(&ps_eff).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut summary = json!({
        "t_end_ms": t_end,
        "split_step_ms": delta,
        "max_gap_P_S": max_gap,
        "P_S_full_final": ps_full.last(),
        "P_S_eff_final": ps_eff.last(),
    });
    let mut rest = full[1..].iter();
    if cfg.options.split_gap_check.unwrap_or(true) {
        summary["split_step_gap"] = json!(max_series_gap(&full[0], rest.next().unwrap()));
    }
    let convergence = match rest.next() {
        Some(fine) => drift_record("n_cut+1", max_series_gap(&full[0], fine), json!({ "n_cut": p.n_cut })),
        None => disabled(),
    };
    Ok(run.finish(&p, &[], convergence, summary, vec![table]))
}

fn fig5(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    let run = Run::new("fig5", cfg)?;
    let axes = run.axes(vec![Axis::new("switches", [0.0, 1999.0, 19999.0])])?;
    let base = Overrides::default().with("phi_rad", 0.001)?;
    let p = run.params(&base, &[])?;
    let t_end = cfg.options.t_end_ms.unwrap_or(1000.0);
    let grid = uniform(t_end, cfg.options.samples.unwrap_or(201))?;
    let space = model::internal_space();
    let d = channels(&p, &space, Engineered::Plain)?;
    let rec = Record::observables(population_observables(&space)?);
    let rho0 = mixed_qubits()?;
    for &n in &axes[0].values {
        if n < 0.0 || n.fract() != 0.0 {
            return Err(RunError::Config(format!("switches must be nonnegative integers, got {n}")));
        }
    }
    let evolve_n = |n: usize, refine: u32| -> Result<Trajectory, RunError> {
        let schedule = switching_schedule(t_end, n, p.phi, HamiltonianKind::MisalignedEffective)?;
        Ok(evolve_piecewise(&rho0, &schedule, &p, &d, &grid, &rec, &StepOptions { refine, ..StepOptions::default() })?)
    };
    let runs = par_map(&axes[0].values, |&n| evolve_n(n as usize, 1))?;

    let mut table = Table::new("populations.csv")
        .column("switches", "1", "number N of phase switches φ → φ + π")
        .column("t_ms", "ms", "time");
    for (n, what) in POPULATIONS {
        table = table.column(n, "1", what);
    }
    let mut finals = Vec::new();
    let mut reference = None;
    for (n, r) in axes[0].values.iter().zip(runs) {
        let tr = r.map_err(|e| e.context(&format!("switches = {n}")))?;
        for (t, row) in tr.times.iter().zip(&tr.values) {
            let mut cells = vec![Cell::Int(*n as i64), Cell::Num(*t)];
            cells.extend(row.iter().map(|&v| Cell::Num(v)));
            table.push(cells);
        }
        finals.push(json!({ "switches": n, "P_S_final": tr.last("P_S") }));
        reference = Some((*n as usize, tr));
    }
    let convergence = match (run.convergence_enabled(), reference) {
        (true, Some((n, tr))) => {
            let fine = evolve_n(n, 2)?;
            drift_record("step_halving", max_series_gap(&tr, &fine), json!({ "switches": n, "note": "phonon-free model; n_cut does not enter" }))
        }
        _ => disabled(),
    };
    let summary = json!({ "t_end_ms": t_end, "phi_rad": p.phi, "final": finals });
    Ok(run.finish(&p, &axes, convergence, summary, vec![table]))
}

// ---------------------------------------------------------------------------
// Steady-state grids

struct GridSpec {
    name: &'static str,
    base: Overrides,
    axes: Vec<Axis>,
    variants: Vec<Engineered>,
    file: &'static str,
    metric: &'static str,
}

struct GridOutcome<'a> {
    run: Run<'a>,
    base: SystemParams,
    axes: Vec<Axis>,
    points: Vec<Vec<f64>>,
    results: Vec<(Engineered, Result<SteadyPoint, RunError>)>,
    table: Table,
    convergence: Value,
    metric: &'static str,
}

fn steady_grid<'a>(cfg: &'a ScenarioConfig, spec: GridSpec, free_axes: bool) -> Result<GridOutcome<'a>, RunError> {
    let run = Run::new(spec.name, cfg)?;
    let axes = if free_axes {
        for a in &cfg.grid {
            if unit_of(&a.name).is_none() {
                return Err(RunError::Config(format!("unknown sweep axis `{}`", a.name)));
            }
            if a.values.is_empty() {
                return Err(RunError::Config(format!("axis `{}` has no values", a.name)));
            }
        }
        cfg.grid.clone()
    } else {
        run.axes(spec.axes)?
    };
    let base = run.params(&spec.base, &[])?;
    let points = grid_points(&axes);
    let jobs: Vec<(Engineered, &Vec<f64>)> = spec.variants.iter().flat_map(|&v| points.iter().map(move |pt| (v, pt))).collect();
    info!("{}: {} steady-state solves", spec.name, jobs.len());
    let solve_at = |e: Engineered, pt: &[f64], n_cut_shift: usize| -> Result<SteadyPoint, RunError> {
        let assign: Vec<(&str, f64)> = axes.iter().zip(pt).map(|(a, v)| (a.name.as_str(), *v)).collect();
        let mut p = run.params(&spec.base, &assign)?;
        p.n_cut += n_cut_shift;
        solve_steady(&p, e)
    };
    let results: Vec<_> = par_map(&jobs, |(e, pt)| {
        let r = solve_at(*e, pt, 0);
        if let Err(err) = &r {
            log::warn!("{} at {:?}: {err}", spec.name, pt);
        }
        (*e, r)
    })?;

    let mut table = Table::new(spec.file);
    if spec.variants.len() > 1 {
        table = table.column("variant", "text", "engineered decay variant (plain, branching)");
    }
    for a in &axes {
        table = table.column(&a.name, axis_unit(&a.name), "grid axis");
    }
    table = steady_columns(table);
    for ((e, pt), (_, r)) in jobs.iter().zip(&results) {
        let mut row = Vec::new();
        if spec.variants.len() > 1 {
            row.push(Cell::from(e.name()));
        }
        row.extend(pt.iter().map(|&v| Cell::Num(v)));
        row.extend(steady_cells(r));
        table.push(row);
    }

    // Representative point: the middle of every axis, first variant.
    let convergence = if run.convergence_enabled() {
        let rep: Vec<f64> = axes.iter().map(|a| a.values[(a.values.len() - 1) / 2]).collect();
        let e = spec.variants[0];
        let idx = jobs.iter().position(|(v, pt)| *v == e && **pt == rep).unwrap();
        match &results[idx].1 {
            Ok(coarse) => {
                info!("{}: n_cut + 1 check at {:?}", spec.name, rep);
                let fine = solve_at(e, &rep, 1)?;
                let drift = coarse.ions.max_abs_diff(&fine.ions);
                drift_record(
                    "n_cut+1",
                    drift,
                    json!({ "n_cut": base.n_cut, "point": point_json(&axes, &rep), "variant": e.name(), "P_S_drift": (coarse.p_s() - fine.p_s()).abs() }),
                )
            }
            Err(e) => json!({ "check": "failed", "error": e.to_string() }),
        }
    } else {
        disabled()
    };
    Ok(GridOutcome { run, base, axes, points, results, table, convergence, metric: spec.metric })
}

fn grid_summary(out: &GridOutcome<'_>) -> Value {
    let metric = out.metric;
    let failed = out.results.iter().filter(|(_, r)| r.is_err()).count();
    let values: Vec<f64> = out
        .results
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok())
        .map(|s| if metric == "S" { s.chsh } else { s.p_s() })
        .collect();
    json!({
        "metric": metric,
        "points": out.results.len(),
        "failed_points": failed,
        "metric_min": values.iter().copied().fold(f64::INFINITY, f64::min),
        "metric_max": values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

fn finish_grid(out: GridOutcome<'_>, summary: Value) -> ScenarioResult {
    let GridOutcome { run, base, axes, table, convergence, .. } = out;
    run.finish(&base, &axes, convergence, summary, vec![table])
}

fn fig4(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    let ratios = log_space(1e-3, 1e-1, 11);
    let spec = GridSpec {
        name: "fig4",
        base: Overrides::default(),
        axes: vec![
            Axis::new("nu_over_2pi_khz", [2000.0, 4000.0]),
            Axis::new("nbar_th", [0.0, 0.5]),
            Axis::new("gamma_eff_over_g", ratios.clone()),
            Axis::new("kappa_over_g", ratios),
        ],
        variants: vec![Engineered::Plain],
        file: "grid.csv",
        metric: "S",
    };
    let out = steady_grid(cfg, spec, false)?;
    let mut summary = grid_summary(&out);
    summary["heating"] = heating_effect(&out);
    summary["violating_points"] = json!(out.results.iter().filter(|(_, r)| r.as_ref().is_ok_and(|s| s.chsh > 2.0)).count());
    Ok(finish_grid(out, summary))
}

/// Largest increase of S from n̄ = 0 to n̄ = 0.5 at matching other
/// coordinates, per trap frequency.
fn heating_effect(out: &GridOutcome<'_>) -> Value {
    let Some(k) = out.axes.iter().position(|a| a.name == "nbar_th") else {
        return Value::Null;
    };
    let nu = out.axes.iter().position(|a| a.name == "nu_over_2pi_khz");
    let chsh: Vec<Option<f64>> = out.results.iter().map(|(_, r)| r.as_ref().ok().map(|s| s.chsh)).collect();
    let mut per_nu: Vec<(f64, f64, Value)> = Vec::new();
    for (i, pt) in out.points.iter().enumerate() {
        if pt[k] != 0.5 {
            continue;
        }
        let mut cold = pt.clone();
        cold[k] = 0.0;
        let Some(j) = out.points.iter().position(|q| *q == cold) else { continue };
        let (Some(hot), Some(c)) = (chsh[i], chsh[j]) else { continue };
        let key = nu.map_or(f64::NAN, |n| pt[n]);
        let inc = hot - c;
        match per_nu.iter_mut().find(|e| e.0.to_bits() == key.to_bits()) {
            Some(e) if inc > e.1 => {
                e.1 = inc;
                e.2 = point_json(&out.axes, pt);
            }
            Some(_) => {}
            None => per_nu.push((key, inc, point_json(&out.axes, pt))),
        }
    }
    Value::Array(
        per_nu
            .into_iter()
            .map(|(nu, inc, at)| json!({ "nu_over_2pi_khz": nu, "max_increase_of_S": inc, "at": at }))
            .collect(),
    )
}

fn fig6(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    let spec = GridSpec {
        name: "fig6",
        base: fig6_rates(),
        axes: vec![
            Axis::new("nu_over_2pi_khz", lin_space(1000.0, 5000.0, 5)),
            Axis::new("omega_a_over_2pi_khz", lin_space(100.0, 300.0, 5)),
        ],
        variants: vec![Engineered::Plain],
        file: "grid.csv",
        metric: "P_S",
    };
    let out = steady_grid(cfg, spec, false)?;
    let mut summary = grid_summary(&out);
    summary["points_above_0.98"] = json!(out.results.iter().filter(|(_, r)| r.as_ref().is_ok_and(|s| s.p_s() > 0.98)).count());
    Ok(finish_grid(out, summary))
}

fn fig7(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    let spec = GridSpec {
        name: "fig7",
        base: fig6_rates(),
        axes: vec![Axis::new("nbar_th", [0.0, 0.5]), Axis::new("gamma_cd_over_gamma_eff", lin_space(0.0, 1.0, 11))],
        variants: vec![Engineered::Plain],
        file: "grid.csv",
        metric: "P_S",
    };
    let out = steady_grid(cfg, spec, false)?;
    let summary = grid_summary(&out);
    Ok(finish_grid(out, summary))
}

/// Lifetime of the short-lived level, 10 ns, as a decay rate in rad/ms.
const SEC6_GAMMA: f64 = 1.0e5;
/// Steady singlet populations to compare against, by n̄, and the tolerance.
const SEC6_REFERENCE: [(f64, f64); 2] = [(0.0, 0.9890), (0.5, 0.9869)];
const SEC6_TOLERANCE: f64 = 0.02;

/// Parameter overrides of the experimental point.
pub fn sec6_overrides() -> Overrides {
    let nu = 4000.0;
    let kappa1 = 2e-4 * nu;
    let mut o = Overrides::default();
    for (k, v) in [
        ("nu_over_2pi_khz", nu),
        ("omega_a_over_2pi_khz", 200.0),
        ("omega_b_over_2pi_khz", 40.0),
        ("gamma_over_2pi_khz", to_khz(SEC6_GAMMA)),
        ("kappa1_over_2pi_khz", kappa1),
        ("kappa2_over_2pi_khz", kappa1 / 10.0),
        ("p_s", 0.94),
        ("p_d", 0.06),
    ] {
        o.push(k, Some(v)).unwrap();
    }
    o.push("gamma_eff_over_2pi_khz", None).unwrap();
    o
}

fn sec6(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    let spec = GridSpec {
        name: "sec6",
        base: sec6_overrides(),
        axes: vec![Axis::new("nbar_th", [0.0, 0.5])],
        variants: vec![Engineered::Plain, Engineered::Branching],
        file: "populations.csv",
        metric: "P_S",
    };
    let out = steady_grid(cfg, spec, false)?;
    let mut summary = grid_summary(&out);
    let mut matching = Vec::new();
    for v in [Engineered::Plain, Engineered::Branching] {
        let ok = SEC6_REFERENCE.iter().all(|&(nbar, target)| {
            out.points.iter().zip(out.results.iter().filter(|(e, _)| *e == v)).any(|(pt, (_, r))| {
                pt[0] == nbar && r.as_ref().is_ok_and(|s| (s.p_s() - target).abs() <= SEC6_TOLERANCE)
            })
        });
        if ok {
            matching.push(v.name());
        }
    }
    summary["reference_P_S"] = json!(SEC6_REFERENCE.iter().map(|(n, p)| json!({ "nbar_th": n, "P_S": p })).collect::<Vec<_>>());
    summary["tolerance"] = json!(SEC6_TOLERANCE);
    summary["variants_within_tolerance"] = json!(matching);
    summary["gamma_eff_over_2pi_khz"] = json!(to_khz(out.base.derive().map(|d| d.gamma_eff).unwrap_or(f64::NAN)));
    Ok(finish_grid(out, summary))
}

// ---------------------------------------------------------------------------
// Free-form commands

/// Steady-state sweep over any parameter axes.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    if cfg.grid.is_empty() {
        return Err(RunError::Config("sweep needs at least one grid axis".into()));
    }
    let variant = Engineered::parse(cfg.options.engineered.as_deref().unwrap_or("plain"))?;
    let spec = GridSpec {
        name: "sweep",
        base: Overrides::default(),
        axes: Vec::new(),
        variants: vec![variant],
        file: "grid.csv",
        metric: "P_S",
    };
    let cfg_named = ScenarioConfig { scenario: None, ..cfg.clone() };
    let out = steady_grid(&cfg_named, spec, true)?;
    let summary = grid_summary(&out);
    let mut r = finish_grid(out, summary);
    r.metadata["options"] = json!(cfg.options);
    Ok(r)
}

/// Single steady-state solve at the configured parameters.
pub fn run_steady(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    if !cfg.grid.is_empty() {
        return Err(RunError::Config("steady takes no grid; use sweep".into()));
    }
    let variant = Engineered::parse(cfg.options.engineered.as_deref().unwrap_or("plain"))?;
    let spec = GridSpec {
        name: "steady",
        base: Overrides::default(),
        axes: Vec::new(),
        variants: vec![variant],
        file: "steady.csv",
        metric: "P_S",
    };
    let cfg_named = ScenarioConfig { scenario: None, ..cfg.clone() };
    let out = steady_grid(&cfg_named, spec, false)?;
    if let Some((_, Err(e))) = out.results.first() {
        return Err(RunError::Numeric(e.to_string()));
    }
    let summary = grid_summary(&out);
    Ok(finish_grid(out, summary))
}

/// Time evolution from the mixed start, effective (RK4) or full
/// (split-step) model.
pub fn run_evolve(cfg: &ScenarioConfig) -> Result<ScenarioResult, RunError> {
    if !cfg.grid.is_empty() {
        return Err(RunError::Config("evolve takes no grid".into()));
    }
    let cfg_named = ScenarioConfig { scenario: None, ..cfg.clone() };
    let run = Run::new("evolve", &cfg_named)?;
    let variant = Engineered::parse(cfg.options.engineered.as_deref().unwrap_or("plain"))?;
    let full = match cfg.options.model.as_deref().unwrap_or("effective") {
        "effective" => false,
        "full" => true,
        other => return Err(RunError::Config(format!("unknown model `{other}` (effective, full)"))),
    };
    let p = run.params(&Overrides::default(), &[])?;
    let t_end = cfg.options.t_end_ms.unwrap_or(800.0 / p.derive()?.lambda.abs());
    let grid = uniform(t_end, cfg.options.samples.unwrap_or(201))?;
    let delta = cfg.options.split_step_ms.unwrap_or(0.2);
    let trajectory = |n_cut: usize, refine: u32| -> Result<Trajectory, RunError> {
        if full {
            let mut q = p.clone();
            q.n_cut = n_cut;
            let space = model::full_space(n_cut)?;
            let rec = Record::observables(population_observables(&space)?);
            let h = model::build_h_static(&q, &space)?;
            Ok(evolve_split(&mixed_qubits_and_phonons(n_cut)?, &h, &channels(&q, &space, variant)?, &grid, &rec, delta)?)
        } else {
            let space = model::internal_space();
            let rec = Record::observables(population_observables(&space)?);
            let h = HarmonicHamiltonian::constant(model::build_h_effective(&p, &space)?)?;
            let opts = StepOptions { refine, ..StepOptions::default() };
            Ok(evolve(&mixed_qubits()?, &h, &channels(&p, &space, variant)?, &grid, &rec, &opts)?)
        }
    };
    let tr = trajectory(p.n_cut, 1)?;
    let convergence = match (run.convergence_enabled(), full) {
        (false, _) => disabled(),
        (true, true) => drift_record("n_cut+1", max_series_gap(&tr, &trajectory(p.n_cut + 1, 1)?), json!({ "n_cut": p.n_cut })),
        (true, false) => drift_record("step_halving", max_series_gap(&tr, &trajectory(p.n_cut, 2)?), json!({})),
    };
    let mut table = Table::new("populations.csv").column("t_ms", "ms", "time");
    for (n, what) in POPULATIONS {
        table = table.column(n, "1", what);
    }
    for (t, row) in tr.times.iter().zip(&tr.values) {
        let mut cells = vec![Cell::Num(*t)];
        cells.extend(row.iter().map(|&v| Cell::Num(v)));
        table.push(cells);
    }
    let summary = json!({
        "model": if full { "full" } else { "effective" },
        "engineered": variant.name(),
        "t_end_ms": t_end,
        "P_S_final": tr.last("P_S"),
        "steps": tr.steps,
    });
    Ok(run.finish(&p, &[], convergence, summary, vec![table]))
}
