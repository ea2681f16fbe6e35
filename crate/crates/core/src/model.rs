//! Physical parameters and the Hamiltonian / dissipator builders.
//!
//! Two-ion spaces use the factor labels `ion1`, `ion2` (levels g, e, r) and,
//! when phonons are kept, `mode1` (center of mass, ν) and `mode2` (breathing,
//! √3ν). The single-ion space used for adiabatic elimination is `ion` with
//! levels g, e, r, a.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use faer::{c64, Mat};

use crate::dynamics::HarmonicHamiltonian;
use crate::linalg::{self, cre, I, ZERO};
use crate::qop::{destroy, ketbra, HilbertSpace, Operator};
use crate::{khz, Error, Result};

/// Level indices. Three-level ions use `G`, `E`, `R`; the single-ion model
/// adds the short-lived `A`.
pub mod level {
    pub const G: usize = 0;
    pub const E: usize = 1;
    pub const R: usize = 2;
    pub const A: usize = 3;
}
use level::{A, E, G, R};

pub const IONS: [&str; 2] = ["ion1", "ion2"];
pub const MODES: [&str; 2] = ["mode1", "mode2"];
pub const SINGLE_ION: &str = "ion";

/// Physical parameters. Angular frequencies and rates in rad/ms.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub nu: f64,
    pub eta: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_mw: f64,
    pub gamma: f64,
    pub gamma_r: f64,
    pub gamma_eff_override: Option<f64>,
    pub kappa1: f64,
    pub kappa2: f64,
    pub nbar_th: f64,
    pub gamma_cd: f64,
    pub phi: f64,
    pub n_cut: usize,
    pub p_s: f64,
    pub p_d: f64,
}

impl Default for SystemParams {
    /// ν/2π = 2 MHz, η = 0.1, Ω_a/2π = 200 kHz, γ_eff/2π = 0.2 kHz,
    /// Ω_mw = −2λ, three Fock states per mode, no phonon damping.
    fn default() -> Self {
        let mut p = Self {
            nu: khz(2000.0),
            eta: 0.1,
            omega_a: khz(200.0),
            omega_b: khz(200.0),
            omega_mw: 0.0,
            gamma: khz(100_000.0),
            gamma_r: 0.0,
            gamma_eff_override: Some(khz(0.2)),
            kappa1: 0.0,
            kappa2: 0.0,
            nbar_th: 0.0,
            gamma_cd: 0.0,
            phi: 0.0,
            n_cut: 3,
            p_s: 1.0,
            p_d: 0.0,
        };
        p.lock_microwave();
        p
    }
}

impl SystemParams {
    /// Sets Ω_mw = −2λ for the current ν, η, Ω_a.
    pub fn lock_microwave(&mut self) {
        self.omega_mw = -2.0 * lambda_closed_form(self.eta, self.omega_a, self.nu);
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("nu", self.nu),
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("gamma", self.gamma),
            ("gamma_r", self.gamma_r),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("nbar_th", self.nbar_th),
            ("gamma_cd", self.gamma_cd),
            ("p_s", self.p_s),
            ("p_d", self.p_d),
        ];
        for (name, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::input(alloc::format!("`{name}` must be finite and nonnegative, got {v}")));
            }
        }
        if let Some(g) = self.gamma_eff_override {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::input(alloc::format!("`gamma_eff` must be finite and nonnegative, got {g}")));
            }
        }
        if !self.eta.is_finite() || !self.omega_mw.is_finite() || !self.phi.is_finite() {
            return Err(Error::input("eta, omega_mw and phi must be finite"));
        }
        if self.n_cut < 1 {
            return Err(Error::input("n_cut must be at least 1"));
        }
        if (self.p_s + self.p_d - 1.0).abs() > 1e-9 {
            return Err(Error::input(alloc::format!("p_s + p_d must be 1, got {}", self.p_s + self.p_d)));
        }
        Ok(())
    }

    /// Soft validity conditions that are reported but not enforced.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let coupling = self.eta.abs() * self.omega_a / 2.0;
        if coupling > self.nu / 10.0 {
            out.push(alloc::format!(
                "Lamb-Dicke coupling ηΩ_a/2 = {:.4} rad/ms exceeds ν/10 = {:.4} rad/ms; the effective model may not apply",
                coupling,
                self.nu / 10.0
            ));
        }
        out
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        derive(self)
    }
}

/// Quantities derived from [`SystemParams`], in rad/ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// (ν₁, ν₂) = (ν, √3ν)
    pub nu_modes: [f64; 2],
    /// `eta_matrix[j][p]`: coupling of ion j to mode p.
    pub eta_matrix: [[f64; 2]; 2],
    pub lambda: f64,
    pub g: f64,
    pub gamma_eff: f64,
}

impl DerivedParams {
    /// `Σ_p η_jp² Ω_a² / (4ν_p)` for ion `j`; equals −λ for the two-ion crystal.
    pub fn level_shift_sum(&self, omega_a: f64, j: usize) -> f64 {
        (0..2).map(|p| self.eta_matrix[j][p] * self.eta_matrix[j][p] * omega_a * omega_a / (4.0 * self.nu_modes[p])).sum()
    }
}

fn lambda_closed_form(eta: f64, omega_a: f64, nu: f64) -> f64 {
    -eta * eta * omega_a * omega_a / (3.0 * nu)
}

pub fn derive(p: &SystemParams) -> Result<DerivedParams> {
    if !(p.nu > 0.0) {
        return Err(Error::input(alloc::format!("trap frequency must be positive, got {}", p.nu)));
    }
    let nu_modes = [p.nu, libm::sqrt(3.0) * p.nu];
    let q = p.eta / libm::pow(3.0, 0.25);
    let eta_matrix = [[p.eta, -q], [p.eta, q]];
    let lambda = -(0..2)
        .map(|m| eta_matrix[0][m] * eta_matrix[1][m] * p.omega_a * p.omega_a / (2.0 * nu_modes[m]))
        .sum::<f64>();
    let gamma_eff = match p.gamma_eff_override {
        Some(g) => g,
        None => effective_rate(p.omega_b, p.gamma)?,
    };
    Ok(DerivedParams { nu_modes, eta_matrix, lambda, g: p.eta * p.omega_a / 2.0, gamma_eff })
}

fn effective_rate(omega_b: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::input("γ must be positive to form γ_eff = Ω_b²/γ"));
    }
    Ok(omega_b * omega_b / gamma)
}

// ---------------------------------------------------------------------------
// Spaces and local operators

pub fn internal_space() -> Arc<HilbertSpace> {
    Arc::new(HilbertSpace::new([(IONS[0], 3), (IONS[1], 3)]).expect("static labels"))
}

pub fn full_space(n_cut: usize) -> Result<Arc<HilbertSpace>> {
    Ok(Arc::new(HilbertSpace::new([(IONS[0], 3), (IONS[1], 3), (MODES[0], n_cut), (MODES[1], n_cut)])?))
}

pub fn single_ion_space() -> Arc<HilbertSpace> {
    Arc::new(HilbertSpace::new([(SINGLE_ION, 4)]).expect("static labels"))
}

/// Ion factor labels present in `space`.
pub fn ion_labels(space: &HilbertSpace) -> Vec<&'static str> {
    if space.contains(SINGLE_ION) {
        alloc::vec![SINGLE_ION]
    } else {
        IONS.iter().copied().filter(|l| space.contains(l)).collect()
    }
}

fn require_ions(space: &HilbertSpace) -> Result<Vec<&'static str>> {
    let ions = ion_labels(space);
    if ions.is_empty() {
        return Err(Error::UnknownLabel(String::from(IONS[0])));
    }
    Ok(ions)
}

fn require_modes(space: &HilbertSpace) -> Result<()> {
    for m in MODES {
        space.position(m)?;
    }
    Ok(())
}

fn ion_dim(space: &HilbertSpace, label: &str) -> Result<usize> {
    let d = space.factor_dim(label)?;
    if d < 3 {
        return Err(Error::input(alloc::format!("ion factor `{label}` needs at least the levels g, e, r")));
    }
    Ok(d)
}

/// `|k⟩⟨l|` on one ion.
pub fn ion_ketbra(space: &Arc<HilbertSpace>, ion: &str, k: usize, l: usize) -> Result<Operator> {
    let d = ion_dim(space, ion)?;
    if k >= d || l >= d {
        return Err(Error::input(alloc::format!("level index out of range for `{ion}`")));
    }
    Operator::local(space, ion, ketbra(d, k, l).as_ref())
}

/// `X_j = |e⟩⟨r| + |r⟩⟨e|` on one ion.
pub fn ion_x(space: &Arc<HilbertSpace>, ion: &str) -> Result<Operator> {
    Ok(ion_ketbra(space, ion, E, R)? + ion_ketbra(space, ion, R, E)?)
}

pub fn annihilation(space: &Arc<HilbertSpace>, mode: &str) -> Result<Operator> {
    let n = space.factor_dim(mode)?;
    Operator::local(space, mode, destroy(n).as_ref())
}

/// `(Ω_mw/2) Σ_j (|g_j⟩⟨e_j| + h.c.)`
pub fn microwave(p: &SystemParams, space: &Arc<HilbertSpace>) -> Result<Operator> {
    let mut h = Operator::zeros(space);
    for ion in require_ions(space)? {
        h = h + ion_ketbra(space, ion, G, E)? + ion_ketbra(space, ion, E, G)?;
    }
    Ok(h.scaled(p.omega_mw / 2.0))
}

/// `(Ω_a/2) Σ_j η_jp X_j ⊗ a_p†`: the part of the laser coupling that
/// creates a phonon in mode `p`.
fn raising_coupling(p: &SystemParams, d: &DerivedParams, space: &Arc<HilbertSpace>, mode: usize) -> Result<Operator> {
    let ad = annihilation(space, MODES[mode])?.adjoint();
    let mut k = Operator::zeros(space);
    for (j, ion) in IONS.iter().enumerate() {
        k = k + ion_x(space, ion)?.scaled(d.eta_matrix[j][mode]);
    }
    Ok((&k * &ad).scaled(p.omega_a / 2.0))
}

// ---------------------------------------------------------------------------
// Hamiltonians

/// Interaction-picture Hamiltonian on ions ⊗ modes:
/// `Σ_j{(Ω_a/2)|e_j⟩⟨r_j| Σ_p η_jp(a_p† e^{iν_p t} + a_p e^{−iν_p t}) + (Ω_mw/2)|g_j⟩⟨e_j| + h.c.}`.
pub fn interaction_hamiltonian(p: &SystemParams, space: &Arc<HilbertSpace>) -> Result<HarmonicHamiltonian> {
    misaligned_with_microwave(p, space, 1.0, 0.0, true)
}

pub fn build_h_interaction(p: &SystemParams, space: &Arc<HilbertSpace>, t: f64) -> Result<Operator> {
    Ok(interaction_hamiltonian(p, space)?.at(t))
}

/// Time-independent frame of [`interaction_hamiltonian`]:
/// `Σ_p ν_p a_p†a_p + Σ_j{(Ω_a/2) X_j Σ_p η_jp(a_p + a_p†)} + microwave`.
pub fn build_h_static(p: &SystemParams, space: &Arc<HilbertSpace>) -> Result<Operator> {
    require_modes(space)?;
    let d = derive(p)?;
    let mut h = microwave(p, space)?;
    for m in 0..2 {
        let a = annihilation(space, MODES[m])?;
        h = h + (&a.adjoint() * &a).scaled(d.nu_modes[m]);
        let up = raising_coupling(p, &d, space, m)?;
        h = h + up.adjoint() + up;
    }
    Ok(h)
}

/// Phonon-free effective Hamiltonian with the microwave drive:
/// `λ X₁X₂ + λ Σ_j(|e_j⟩⟨e_j| + |r_j⟩⟨r_j|) + (Ω_mw/2) Σ_j(|g_j⟩⟨e_j| + h.c.)`.
///
/// The single-ion shift acts on the laser-coupled pair {e, r}: it is the
/// diagonal of `−Σ_p Ω_a²/(4ν_p) (Σ_j η_jp X_j)²` with `X_j² = |e⟩⟨e| + |r⟩⟨r|`.
pub fn build_h_effective(p: &SystemParams, space: &Arc<HilbertSpace>) -> Result<Operator> {
    Ok(effective_laser_part(p, space, 1.0)? + microwave(p, space)?)
}

fn effective_laser_part(p: &SystemParams, space: &Arc<HilbertSpace>, weight: f64) -> Result<Operator> {
    let d = derive(p)?;
    let ions = require_ions(space)?;
    if ions.len() != 2 {
        return Err(Error::input("the effective Hamiltonian needs two ions"));
    }
    let pair = &ion_x(space, IONS[0])? * &ion_x(space, IONS[1])?;
    let mut h = pair.scaled(d.lambda);
    for (j, ion) in IONS.iter().enumerate() {
        let shift = -d.level_shift_sum(p.omega_a, j);
        let proj = ion_ketbra(space, ion, E, E)? + ion_ketbra(space, ion, R, R)?;
        h = h + proj.scaled(shift);
    }
    Ok(h.scaled(weight))
}

/// `Σ_j s_{j,x}` with `s_x = X/2`.
fn collective_sx(space: &Arc<HilbertSpace>) -> Result<Operator> {
    let mut s = Operator::zeros(space);
    for ion in require_ions(space)? {
        s = s + ion_x(space, ion)?.scaled(0.5);
    }
    Ok(s)
}

/// Laser-ion coupling for ions displaced by phase φ from the node, with the
/// drive sign flipped when `sign < 0` (phase φ + π):
/// `sign·Ω_a Σ_j s_{j,x}[Σ_p η_jp(a_p† e^{iν_p t} + a_p e^{−iν_p t}) cos φ + sin φ]`.
pub fn misaligned_hamiltonian(p: &SystemParams, space: &Arc<HilbertSpace>, sign: f64) -> Result<HarmonicHamiltonian> {
    misaligned_with_microwave(p, space, sign, p.phi, false)
}

pub fn build_h_misaligned(p: &SystemParams, space: &Arc<HilbertSpace>, sign: f64, t: f64) -> Result<Operator> {
    Ok(misaligned_hamiltonian(p, space, sign)?.at(t))
}

fn misaligned_with_microwave(
    p: &SystemParams,
    space: &Arc<HilbertSpace>,
    sign: f64,
    phi: f64,
    with_microwave: bool,
) -> Result<HarmonicHamiltonian> {
    require_modes(space)?;
    let d = derive(p)?;
    let mut constant = collective_sx(space)?.scaled(sign * p.omega_a * libm::sin(phi));
    if with_microwave {
        constant = constant + microwave(p, space)?;
    }
    let mut terms = alloc::vec![(0.0, constant)];
    for m in 0..2 {
        let up = raising_coupling(p, &d, space, m)?.scaled(sign * libm::cos(phi));
        terms.push((-d.nu_modes[m], up.adjoint()));
        terms.push((d.nu_modes[m], up));
    }
    HarmonicHamiltonian::new(space.clone(), terms)
}

/// Effective Hamiltonian for a misaligned crystal (no microwave):
/// `cos²φ [λ X₁X₂ + λ Σ_j(|e_j⟩⟨e_j| + |r_j⟩⟨r_j|)] + sign·Ω_a sin φ Σ_j s_{j,x}`.
pub fn build_h_misaligned_eff(p: &SystemParams, space: &Arc<HilbertSpace>, sign: f64) -> Result<Operator> {
    let c = libm::cos(p.phi);
    let laser = effective_laser_part(p, space, c * c)?;
    Ok(laser + collective_sx(space)?.scaled(sign * p.omega_a * libm::sin(p.phi)))
}

// ---------------------------------------------------------------------------
// Closed-form evolution operator of the misaligned coupling

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionCoeffs {
    pub a: [c64; 2],
    pub b: [c64; 2],
    pub c: [c64; 2],
}

pub fn evolution_coeffs(p: &SystemParams, t: f64) -> Result<EvolutionCoeffs> {
    if !(t >= 0.0) {
        return Err(Error::input("evolution time must be nonnegative"));
    }
    let d = derive(p)?;
    let cphi = libm::cos(p.phi);
    let mut out = EvolutionCoeffs { a: [ZERO; 2], b: [ZERO; 2], c: [ZERO; 2] };
    for m in 0..2 {
        let nu = d.nu_modes[m];
        let e_plus = linalg::cis(nu * t) - cre(1.0);
        let e_minus = linalg::cis(-nu * t) - cre(1.0);
        let pref = p.eta * p.eta * p.omega_a * p.omega_a * cphi * cphi;
        out.a[m] = (cre(-t / nu) + e_plus / (I * (nu * nu))) * pref;
        let amp = p.eta * p.omega_a * cphi;
        out.b[m] = e_minus * amp / (-I * nu);
        out.c[m] = e_plus * amp / (I * nu);
    }
    Ok(out)
}

/// `U(t) = e^{−iΩ_a sin φ Σ_j s_{j,x} t} Π_p e^{−iA_p J_p²} e^{−iB_p J_p a_p} e^{−iC_p J_p a_p†}`
/// with `J_p = Σ_j η_jp s_{j,x} / η`, for the `sign = +1` coupling.
pub fn evolution_operator(p: &SystemParams, space: &Arc<HilbertSpace>, t: f64) -> Result<Operator> {
    require_modes(space)?;
    let d = derive(p)?;
    let k = evolution_coeffs(p, t)?;
    let n = space.dim();
    let exp_of = |op: &Operator, coeff: c64| -> Mat<c64> {
        linalg::expm(linalg::scale(op.data(), -I * coeff).as_ref())
    };
    let sx = collective_sx(space)?;
    let mut u = exp_of(&sx, cre(p.omega_a * libm::sin(p.phi) * t));
    if p.eta != 0.0 {
        for m in 0..2 {
            let mut j = Operator::zeros(space);
            for (i, ion) in IONS.iter().enumerate() {
                j = j + ion_x(space, ion)?.scaled(0.5 * d.eta_matrix[i][m] / p.eta);
            }
            let a = annihilation(space, MODES[m])?;
            let ad = a.adjoint();
            let f_a = exp_of(&(&j * &j), k.a[m]);
            let f_b = exp_of(&(&j * &a), k.b[m]);
            let f_c = exp_of(&(&j * &ad), k.c[m]);
            u = &(&(&u * &f_a) * &f_b) * &f_c;
        }
    }
    debug_assert_eq!(u.nrows(), n);
    Operator::new(space.clone(), u)
}

// ---------------------------------------------------------------------------
// Dissipators

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DissipatorKind {
    /// Natural decay of |r⟩ at γ_r, split equally to g and e.
    NaturalR,
    /// Engineered decay of |r⟩ at γ_eff, split equally to g and e.
    EngineeredEff,
    /// Four-level single ion: |a⟩ decays at γ to g and e (and to r when p_d > 0).
    SingleIonFull,
    /// Phonon damping and heating, κ_p(n̄+1) L[a_p] + κ_p n̄ L[a_p†].
    PhononThermal,
    /// γ_cd L[Σ_j(|g_j⟩⟨g_j| − |r_j⟩⟨r_j|)].
    CollectiveDephasing,
    /// Engineered decay with branching: γ_eff p_s/2 to each of g and e, plus
    /// dephasing of |r⟩ at γ_eff p_d.
    EngineeredBranching,
}

impl DissipatorKind {
    pub const ALL: [DissipatorKind; 6] = [
        Self::NaturalR,
        Self::EngineeredEff,
        Self::SingleIonFull,
        Self::PhononThermal,
        Self::CollectiveDephasing,
        Self::EngineeredBranching,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::NaturalR => "natural_r",
            Self::EngineeredEff => "engineered_eff",
            Self::SingleIonFull => "single_ion_full",
            Self::PhononThermal => "phonon_thermal",
            Self::CollectiveDephasing => "collective_dephasing",
            Self::EngineeredBranching => "engineered_branching",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::input(alloc::format!("unknown dissipator kind `{name}`")))
    }
}

/// `(rate, jump operator)` channels of one kind on `space`.
pub fn build_dissipators(p: &SystemParams, kind: DissipatorKind, space: &Arc<HilbertSpace>) -> Result<Vec<(f64, Operator)>> {
    let mut out = Vec::new();
    match kind {
        DissipatorKind::NaturalR | DissipatorKind::EngineeredEff | DissipatorKind::EngineeredBranching => {
            let rate = if kind == DissipatorKind::NaturalR { p.gamma_r } else { derive(p)?.gamma_eff };
            let (ps, pd) = if kind == DissipatorKind::EngineeredBranching { (p.p_s, p.p_d) } else { (1.0, 0.0) };
            for ion in require_ions(space)? {
                out.push((rate * ps / 2.0, ion_ketbra(space, ion, G, R)?));
                out.push((rate * ps / 2.0, ion_ketbra(space, ion, E, R)?));
                if kind == DissipatorKind::EngineeredBranching {
                    out.push((rate * pd, ion_ketbra(space, ion, R, R)?));
                }
            }
        }
        DissipatorKind::SingleIonFull => {
            if space.factor_dim(SINGLE_ION)? != 4 {
                return Err(Error::input("single_ion_full needs the four-level `ion` factor"));
            }
            out.push((p.gamma * p.p_s / 2.0, ion_ketbra(space, SINGLE_ION, G, A)?));
            out.push((p.gamma * p.p_s / 2.0, ion_ketbra(space, SINGLE_ION, E, A)?));
            if p.p_d > 0.0 {
                out.push((p.gamma * p.p_d, ion_ketbra(space, SINGLE_ION, R, A)?));
            }
        }
        DissipatorKind::PhononThermal => {
            require_modes(space)?;
            for (m, kappa) in [p.kappa1, p.kappa2].into_iter().enumerate() {
                let a = annihilation(space, MODES[m])?;
                let ad = a.adjoint();
                out.push((kappa * (p.nbar_th + 1.0), a));
                if p.nbar_th > 0.0 {
                    out.push((kappa * p.nbar_th, ad));
                }
            }
        }
        DissipatorKind::CollectiveDephasing => {
            let mut c = Operator::zeros(space);
            for ion in require_ions(space)? {
                c = c + ion_ketbra(space, ion, G, G)? - ion_ketbra(space, ion, R, R)?;
            }
            out.push((p.gamma_cd, c));
        }
    }
    Ok(out)
}

/// Drive of the single-ion |r⟩ ↔ |a⟩ transition, `(Ω_b/2)(|a⟩⟨r| + |r⟩⟨a|)`.
pub fn single_ion_drive(p: &SystemParams, space: &Arc<HilbertSpace>) -> Result<Operator> {
    let h = ion_ketbra(space, SINGLE_ION, A, R)? + ion_ketbra(space, SINGLE_ION, R, A)?;
    Ok(h.scaled(p.omega_b / 2.0))
}

/// Product basis ket of the two ions, e.g. `two_ion_ket(space, E, G)` = |eg⟩.
/// Phonon factors, when present, are put in the vacuum.
pub fn two_ion_ket(space: &Arc<HilbertSpace>, l1: usize, l2: usize) -> Result<crate::qop::Ket> {
    let digits: Vec<usize> = space
        .factors()
        .iter()
        .map(|f| match f.label.as_str() {
            "ion1" => l1,
            "ion2" => l2,
            _ => 0,
        })
        .collect();
    crate::qop::Ket::basis(space, &digits)
}
