//! Single-ion optical Bloch equations and adiabatic elimination of the
//! short-lived level |a⟩ driven from |r⟩ at Rabi frequency Ω_b.

use alloc::vec::Vec;

use faer::{c64, Mat};

use crate::dynamics::{evolve, HarmonicHamiltonian, Record, StepOptions};
use crate::linalg::{cabs, cre, I, ZERO};
use crate::model::{self, level, DissipatorKind, SystemParams, SINGLE_ION};
use crate::qop::{DensityMatrix, Operator};
use crate::{Error, Result};

use level::{A, E, G, R};

/// Single-ion density matrix over {g, e, r, a}, indexed by [`level`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleIonObeState {
    pub rho: [[c64; 4]; 4],
}

impl SingleIonObeState {
    pub fn zero() -> Self {
        Self { rho: [[ZERO; 4]; 4] }
    }

    /// `|k⟩⟨k|`
    pub fn basis(k: usize) -> Self {
        let mut s = Self::zero();
        s.rho[k][k] = cre(1.0);
        s
    }

    pub fn get(&self, k: usize, l: usize) -> c64 {
        self.rho[k][l]
    }

    pub fn from_matrix(m: &Mat<c64>) -> Result<Self> {
        if m.nrows() != 4 || m.ncols() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, found: m.nrows() });
        }
        let mut s = Self::zero();
        for k in 0..4 {
            for l in 0..4 {
                s.rho[k][l] = m[(k, l)];
            }
        }
        Ok(s)
    }

    pub fn to_matrix(&self) -> Mat<c64> {
        Mat::from_fn(4, 4, |k, l| self.rho[k][l])
    }

    pub fn population_sum(&self) -> f64 {
        (0..4).map(|k| self.rho[k][k].re).sum()
    }
}

/// Time derivative of the single-ion state under the drive
/// `(Ω_b/2)(|a⟩⟨r| + |r⟩⟨a|)` and decay of |a⟩ at γ/2 into each of g and e:
///
/// ```text
/// ρ̇_aa = iΩ_b/2 (ρ_ar − ρ_ra) − γ ρ_aa
/// ρ̇_ar = iΩ_b/2 (ρ_aa − ρ_rr) − γ/2 ρ_ar
/// ρ̇_ae = −iΩ_b/2 ρ_re − γ/2 ρ_ae
/// ρ̇_ag = −iΩ_b/2 ρ_rg − γ/2 ρ_ag
/// ρ̇_rr = iΩ_b/2 (ρ_ra − ρ_ar)
/// ρ̇_ee = ρ̇_gg = γ/2 ρ_aa
/// ρ̇_re = −iΩ_b/2 ρ_ae
/// ρ̇_rg = −iΩ_b/2 ρ_ag
/// ```
///
/// plus the conjugate equations; the g–e coherence is constant.
pub fn obe_rhs(s: &SingleIonObeState, omega_b: f64, gamma: f64) -> SingleIonObeState {
    let h = I * (omega_b / 2.0);
    let r = &s.rho;
    let mut d = SingleIonObeState::zero();
    d.rho[A][A] = h * (r[A][R] - r[R][A]) - r[A][A] * gamma;
    d.rho[A][R] = h * (r[A][A] - r[R][R]) - r[A][R] * (gamma / 2.0);
    d.rho[A][E] = -h * r[R][E] - r[A][E] * (gamma / 2.0);
    d.rho[A][G] = -h * r[R][G] - r[A][G] * (gamma / 2.0);
    d.rho[R][R] = h * (r[R][A] - r[A][R]);
    d.rho[E][E] = cre(gamma / 2.0) * r[A][A];
    d.rho[G][G] = cre(gamma / 2.0) * r[A][A];
    d.rho[R][E] = -h * r[A][E];
    d.rho[R][G] = -h * r[A][G];
    for (k, l) in [(A, R), (A, E), (A, G), (R, E), (R, G)] {
        d.rho[l][k] = d.rho[k][l].conj();
    }
    d
}

/// Quasi-stationary values `(ρ_aa, ρ_ar, ρ_ae, ρ_ag)` obtained by setting
/// the derivatives of the |a⟩ row to zero:
/// `ρ_aa = Ω_b²/(Ω_b²+γ²) ρ_rr`, `ρ_ar = −iΩ_bγ/(Ω_b²+γ²) ρ_rr`,
/// `ρ_ae = −iΩ_b/γ ρ_re`, `ρ_ag = −iΩ_b/γ ρ_rg`.
pub fn eliminated_elements(rho_rr: c64, rho_re: c64, rho_rg: c64, omega_b: f64, gamma: f64) -> Result<(c64, c64, c64, c64)> {
    if !(gamma > 0.0) {
        return Err(Error::input("adiabatic elimination needs γ > 0"));
    }
    let den = omega_b * omega_b + gamma * gamma;
    let aa = rho_rr * (omega_b * omega_b / den);
    let ar = -I * (omega_b * gamma / den) * rho_rr;
    let ae = -I * (omega_b / gamma) * rho_re;
    let ag = -I * (omega_b / gamma) * rho_rg;
    Ok((aa, ar, ae, ag))
}

/// `γ_eff = Ω_b²/γ`
pub fn effective_decay_rate(omega_b: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::input("effective decay rate needs γ > 0"));
    }
    Ok(omega_b * omega_b / gamma)
}

/// Full four-level and eliminated three-level trajectories from |r⟩.
#[derive(Debug, Clone)]
pub struct EliminationComparison {
    pub times: Vec<f64>,
    /// `ρ_gg + ρ_ee` of the full model.
    pub ground_full: Vec<f64>,
    /// `ρ_gg + ρ_ee` of the effective model.
    pub ground_eff: Vec<f64>,
    pub rho_aa_full: Vec<f64>,
    pub rho_rr_full: Vec<f64>,
    pub max_deviation: f64,
    pub peak_rho_aa: f64,
    /// Exponential rate fitted to `ρ_rr` of the full model over the later
    /// part of the window.
    pub fitted_rate: f64,
}

fn single_ion_params(omega_b: f64, gamma: f64, p_s: f64, p_d: f64) -> SystemParams {
    SystemParams { omega_b, gamma, gamma_eff_override: None, p_s, p_d, ..SystemParams::default() }
}

fn uniform_grid(t_end: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| t_end * k as f64 / (points - 1) as f64).collect()
}

/// Integrates the full single-ion master equation and the eliminated one
/// (decay of |r⟩ at γ_eff = Ω_b²/γ) from |r⟩⟨r| over `[0, t_end]`.
pub fn compare_full_effective(omega_b: f64, gamma: f64, t_end: f64) -> Result<EliminationComparison> {
    if !(t_end > 0.0) {
        return Err(Error::input("t_end must be positive"));
    }
    let p = single_ion_params(omega_b, gamma, 1.0, 0.0);
    let space = model::single_ion_space();
    let rho0 = DensityMatrix::pure(&crate::qop::Ket::basis(&space, &[R])?)?;
    let grid = uniform_grid(t_end, 401);
    let proj = |k: usize| model::ion_ketbra(&space, SINGLE_ION, k, k);
    let ground = proj(G)? + proj(E)?;
    let record = Record::observables(alloc::vec![
        ("ground".into(), ground),
        ("aa".into(), proj(A)?),
        ("rr".into(), proj(R)?),
    ]);

    let h_full = HarmonicHamiltonian::constant(model::single_ion_drive(&p, &space)?)?;
    let d_full = model::build_dissipators(&p, DissipatorKind::SingleIonFull, &space)?;
    let full = evolve(&rho0, &h_full, &d_full, &grid, &record, &StepOptions::default())?;

    let h_eff = HarmonicHamiltonian::constant(Operator::zeros(&space))?;
    let d_eff = model::build_dissipators(&p, DissipatorKind::EngineeredEff, &space)?;
    let eff = evolve(&rho0, &h_eff, &d_eff, &grid, &record, &StepOptions::default())?;

    let ground_full = full.series("ground").unwrap();
    let ground_eff = eff.series("ground").unwrap();
    let rho_aa_full = full.series("aa").unwrap();
    let rho_rr_full = full.series("rr").unwrap();
    let max_deviation = ground_full.iter().zip(&ground_eff).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let peak_rho_aa = rho_aa_full.iter().copied().fold(0.0, f64::max);
    let fitted_rate = fit_decay_rate(&grid, &rho_rr_full, 0.25);
    Ok(EliminationComparison {
        times: grid,
        ground_full,
        ground_eff,
        rho_aa_full,
        rho_rr_full,
        max_deviation,
        peak_rho_aa,
        fitted_rate,
    })
}

/// Least-squares slope of `−ln y(t)` over `t ≥ skip · t_end`.
pub fn fit_decay_rate(times: &[f64], y: &[f64], skip: f64) -> f64 {
    let t_end = times.last().copied().unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(y)
        .filter(|&(&t, &v)| t >= skip * t_end && v > 0.0)
        .map(|(&t, &v)| (t, libm::log(v)))
        .collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    -sxy / sxx
}

/// Full four-level ion with branching `(γp_s/2 → g, γp_s/2 → e, γp_d → r)`
/// against the reduced branching dissipator, from `(|r⟩ + |e⟩)/√2`.
/// Returns the largest deviation of any {g, e, r} matrix element.
pub fn compare_branching(omega_b: f64, gamma: f64, p_s: f64, p_d: f64, t_end: f64) -> Result<f64> {
    let p = single_ion_params(omega_b, gamma, p_s, p_d);
    p.validate()?;
    let space = model::single_ion_space();
    let amps: Vec<c64> = [0.0, 1.0, 1.0, 0.0].iter().map(|&a| cre(a * core::f64::consts::FRAC_1_SQRT_2)).collect();
    let rho0 = DensityMatrix::pure(&crate::qop::Ket::new(space.clone(), amps)?)?;
    let grid = uniform_grid(t_end, 201);
    let record = Record::states();

    let h_full = HarmonicHamiltonian::constant(model::single_ion_drive(&p, &space)?)?;
    let d_full = model::build_dissipators(&p, DissipatorKind::SingleIonFull, &space)?;
    let full = evolve(&rho0, &h_full, &d_full, &grid, &record, &StepOptions::default())?;

    let h_eff = HarmonicHamiltonian::constant(Operator::zeros(&space))?;
    let d_eff = model::build_dissipators(&p, DissipatorKind::EngineeredBranching, &space)?;
    let eff = evolve(&rho0, &h_eff, &d_eff, &grid, &record, &StepOptions::default())?;

    let mut worst = 0.0f64;
    for (a, b) in full.states.iter().zip(&eff.states) {
        for k in [G, E, R] {
            for l in [G, E, R] {
                worst = worst.max(cabs(a.get(k, l) - b.get(k, l)));
            }
        }
    }
    Ok(worst)
}
