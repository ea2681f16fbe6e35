//! Bell states, populations and the CHSH correlation.
//!
//! The qubit of each ion is the pair {|g⟩ = (1,0)ᵀ, |e⟩ = (0,1)ᵀ}; Pauli
//! operators are embedded with zeros on every other level.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use faer::{c64, Mat};

use crate::linalg::{cre, I, ONE};
use crate::model::{level, two_ion_ket, IONS};
use crate::qop::{DensityMatrix, HilbertSpace, Ket, Operator};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellKind {
    /// `(|eg⟩ − |ge⟩)/√2`
    S,
    /// `(|eg⟩ + |ge⟩)/√2`
    T,
}

/// Two-ion states whose populations are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    S,
    T,
    EE,
    GG,
}

impl Target {
    pub const ALL: [Target; 4] = [Target::S, Target::T, Target::EE, Target::GG];

    pub fn name(self) -> &'static str {
        match self {
            Target::S => "S",
            Target::T => "T",
            Target::EE => "ee",
            Target::GG => "gg",
        }
    }

    pub fn ket(self, space: &Arc<HilbertSpace>) -> Result<Ket> {
        match self {
            Target::S => bell_state(BellKind::S, space),
            Target::T => bell_state(BellKind::T, space),
            Target::EE => ion_only(space).and_then(|_| two_ion_ket(space, level::E, level::E)),
            Target::GG => ion_only(space).and_then(|_| two_ion_ket(space, level::G, level::G)),
        }
    }
}

fn ion_only(space: &HilbertSpace) -> Result<()> {
    let ok = space.factors().len() == 2
        && space.factors().iter().zip(IONS).all(|(f, l)| f.label == l && f.dim >= 2);
    if ok {
        Ok(())
    } else {
        Err(Error::input("expected the two-ion internal space (`ion1`, `ion2`)"))
    }
}

pub fn bell_state(kind: BellKind, space: &Arc<HilbertSpace>) -> Result<Ket> {
    ion_only(space)?;
    let eg = two_ion_ket(space, level::E, level::G)?;
    let ge = two_ion_ket(space, level::G, level::E)?;
    let s = match kind {
        BellKind::S => cre(-1.0),
        BellKind::T => ONE,
    };
    Ok(eg.add(&ge.scaled(s)).scaled(cre(FRAC_1_SQRT_2)))
}

/// The two-ion internal subspace of `space`.
pub fn ion_subspace(space: &HilbertSpace) -> Result<Arc<HilbertSpace>> {
    Ok(Arc::new(space.subspace(&IONS)?))
}

/// `Tr_n ρ`: the state with every non-ion factor traced out.
pub fn reduce_to_ions(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.space().factors().len() == 2 {
        ion_only(rho.space())?;
        return Ok(rho.clone());
    }
    rho.partial_trace(&IONS)
}

/// `⟨x| Tr_n ρ |x⟩` for a normalized ket on the internal space.
pub fn population(rho: &DensityMatrix, x: &Ket) -> Result<f64> {
    let norm = x.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::input(alloc::format!("population target is not normalized (‖x‖ = {norm})")));
    }
    let reduced = reduce_to_ions(rho)?;
    if **x.space() != **reduced.space() {
        return Err(Error::DimensionMismatch { expected: reduced.dim(), found: x.space().dim() });
    }
    Ok(reduced.overlap(x))
}

/// `O ⊗ I` on `full`, where `O` acts on a leading block of `full`'s factors.
pub fn embed(op: &Operator, full: &Arc<HilbertSpace>) -> Result<Operator> {
    let sub = op.space().factors();
    let all = full.factors();
    if sub.len() > all.len() || sub.iter().zip(all).any(|(a, b)| a != b) {
        return Err(Error::input("operator factors must be a leading block of the target space"));
    }
    if sub.len() == all.len() {
        return Operator::new(full.clone(), op.data().to_owned());
    }
    let rest = HilbertSpace::from_factors(all[sub.len()..].to_vec())?;
    let id = Operator::identity(&Arc::new(rest));
    let k = op.kron(&id)?;
    Operator::new(full.clone(), k.into_data())
}

/// Projectors `|X⟩⟨X| ⊗ I_phonons` for the reported targets, ready for
/// trajectory recording on `space`.
pub fn population_observables(space: &Arc<HilbertSpace>) -> Result<Vec<(String, Operator)>> {
    let ions = ion_subspace(space)?;
    Target::ALL
        .iter()
        .map(|t| Ok((alloc::format!("P_{}", t.name()), embed(&t.ket(&ions)?.projector(), space)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Pauli matrix on the {g, e} block of a `dim`-level ion, zero elsewhere.
pub fn qubit_pauli(dim: usize, which: Pauli) -> Mat<c64> {
    let (g, e) = (level::G, level::E);
    let mut m = Mat::<c64>::zeros(dim, dim);
    match which {
        Pauli::X => {
            m[(g, e)] = ONE;
            m[(e, g)] = ONE;
        }
        Pauli::Y => {
            m[(g, e)] = -I;
            m[(e, g)] = I;
        }
        Pauli::Z => {
            m[(g, g)] = ONE;
            m[(e, e)] = -ONE;
        }
    }
    m
}

/// `σ_{y,1}⊗(−σ_{y,2}−σ_{x,2})/√2 + σ_{x,1}⊗(−σ_{y,2}−σ_{x,2})/√2
///  + σ_{x,1}⊗(σ_{y,2}−σ_{x,2})/√2 − σ_{y,1}⊗(σ_{y,2}−σ_{x,2})/√2`
pub fn chsh_operator(space: &Arc<HilbertSpace>) -> Result<Operator> {
    ion_only(space)?;
    let d1 = space.factors()[0].dim;
    let d2 = space.factors()[1].dim;
    let pair = |a: Pauli, b: Pauli| Operator::locals(space, &[(IONS[0], qubit_pauli(d1, a).as_ref()), (IONS[1], qubit_pauli(d2, b).as_ref())]);
    let (x, y) = (Pauli::X, Pauli::Y);
    let yy = pair(y, y)?;
    let yx = pair(y, x)?;
    let xy = pair(x, y)?;
    let xx = pair(x, x)?;
    let t1 = -&(&yy + &yx);
    let t2 = -&(&xy + &xx);
    let t3 = &xy - &xx;
    let t4 = &yx - &yy;
    let o = t1 + t2 + t3 + t4;
    Ok(o.scaled(FRAC_1_SQRT_2))
}

/// `S = Tr[O_CHSH Tr_n ρ]`
pub fn chsh_correlation(rho: &DensityMatrix) -> Result<f64> {
    let reduced = reduce_to_ions(rho)?;
    let o = chsh_operator(reduced.space())?;
    Ok(reduced.expectation(&o).re)
}
