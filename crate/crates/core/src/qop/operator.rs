use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use faer::{c64, Mat, MatRef};

use super::HilbertSpace;
use crate::linalg::{self, cabs, cre, ONE, ZERO};
use crate::{Error, Result};

/// Dense operator on a labeled tensor-product space.
#[derive(Debug, Clone)]
pub struct Operator {
    space: Arc<HilbertSpace>,
    data: Mat<c64>,
}

/// `|k⟩⟨l|` on a single factor of dimension `dim`.
pub fn ketbra(dim: usize, k: usize, l: usize) -> Mat<c64> {
    let mut m = Mat::<c64>::zeros(dim, dim);
    m[(k, l)] = ONE;
    m
}

/// Truncated annihilation operator on `n` Fock states.
pub fn destroy(n: usize) -> Mat<c64> {
    let mut m = Mat::<c64>::zeros(n, n);
    for k in 1..n {
        m[(k - 1, k)] = cre(libm::sqrt(k as f64));
    }
    m
}

impl Operator {
    pub fn new(space: Arc<HilbertSpace>, data: Mat<c64>) -> Result<Self> {
        let d = space.dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: data.nrows().max(data.ncols()) });
        }
        Ok(Self { space, data })
    }

    pub fn zeros(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        Self { space: space.clone(), data: Mat::zeros(d, d) }
    }

    pub fn identity(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        Self { space: space.clone(), data: Mat::identity(d, d) }
    }

    /// `m` acting on the factor `label`, identity elsewhere.
    pub fn local(space: &Arc<HilbertSpace>, label: &str, m: MatRef<'_, c64>) -> Result<Self> {
        Self::locals(space, &[(label, m)])
    }

    /// Tensor product of single-factor operators; unlisted factors get the
    /// identity.
    pub fn locals(space: &Arc<HilbertSpace>, parts: &[(&str, MatRef<'_, c64>)]) -> Result<Self> {
        let mut slots: Vec<Option<MatRef<'_, c64>>> = alloc::vec![None; space.factors().len()];
        for (label, m) in parts {
            let pos = space.position(label)?;
            let dim = space.factors()[pos].dim;
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
            }
            if slots[pos].is_some() {
                return Err(Error::input(alloc::format!("factor `{label}` listed twice")));
            }
            slots[pos] = Some(*m);
        }
        let mut acc = Mat::<c64>::identity(1, 1);
        for (slot, f) in slots.iter().zip(space.factors()) {
            acc = match slot {
                Some(m) => linalg::kron_dense(acc.as_ref(), *m),
                None => linalg::kron_dense(acc.as_ref(), Mat::<c64>::identity(f.dim, f.dim).as_ref()),
            };
        }
        Ok(Self { space: space.clone(), data: acc })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> MatRef<'_, c64> {
        self.data.as_ref()
    }

    pub fn into_data(self) -> Mat<c64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.data[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self { space: self.space.clone(), data: self.data.adjoint().to_owned() }
    }

    /// `max |A − A†|`
    pub fn hermiticity_defect(&self) -> f64 {
        linalg::max_abs_diff(self.data.as_ref(), self.data.adjoint().to_owned().as_ref())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn trace(&self) -> c64 {
        linalg::trace(self.data.as_ref())
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.scaled_c(cre(s))
    }

    pub fn scaled_c(&self, s: c64) -> Self {
        Self { space: self.space.clone(), data: linalg::scale(self.data.as_ref(), s) }
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(self.data.as_ref())
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        linalg::max_abs_diff(self.data.as_ref(), other.data.as_ref())
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Operator) -> Operator {
        &(self * other) - &(other * self)
    }

    /// `a ⊗ b` on the product space (factor order a-then-b).
    pub fn kron(&self, other: &Operator) -> Result<Operator> {
        let space = Arc::new(self.space.tensor(&other.space)?);
        Ok(Self { space, data: linalg::kron_dense(self.data.as_ref(), other.data.as_ref()) })
    }

    pub fn same_space(&self, other: &Operator) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space
    }

    fn assert_same_space(&self, other: &Operator) {
        assert!(self.same_space(other), "operators live on different Hilbert spaces");
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.assert_same_space(rhs);
        Operator { space: self.space.clone(), data: &self.data + &rhs.data }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.assert_same_space(rhs);
        Operator { space: self.space.clone(), data: &self.data - &rhs.data }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.assert_same_space(rhs);
        Operator { space: self.space.clone(), data: &self.data * &rhs.data }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scaled(-1.0)
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

/// State vector on a labeled space.
#[derive(Debug, Clone)]
pub struct Ket {
    space: Arc<HilbertSpace>,
    amps: Vec<c64>,
}

impl Ket {
    pub fn new(space: Arc<HilbertSpace>, amps: Vec<c64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: amps.len() });
        }
        Ok(Self { space, amps })
    }

    /// Product basis state with one level index per factor.
    pub fn basis(space: &Arc<HilbertSpace>, digits: &[usize]) -> Result<Self> {
        if digits.len() != space.factors().len() {
            return Err(Error::DimensionMismatch { expected: space.factors().len(), found: digits.len() });
        }
        let mut index = 0;
        for ((&d, f), stride) in digits.iter().zip(space.factors()).zip(space.strides()) {
            if d >= f.dim {
                return Err(Error::input(alloc::format!("level {d} out of range for `{}`", f.label)));
            }
            index += d * stride;
        }
        let mut amps = alloc::vec![ZERO; space.dim()];
        amps[index] = ONE;
        Ok(Self { space: space.clone(), amps })
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.amps.iter().map(|a| a.re * a.re + a.im * a.im).sum())
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket) -> c64 {
        assert_eq!(self.amps.len(), other.amps.len());
        self.amps.iter().zip(&other.amps).fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn scaled(&self, s: c64) -> Ket {
        Ket { space: self.space.clone(), amps: self.amps.iter().map(|a| a * s).collect() }
    }

    pub fn add(&self, other: &Ket) -> Ket {
        assert_eq!(self.amps.len(), other.amps.len());
        Ket { space: self.space.clone(), amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect() }
    }

    pub fn normalized(&self) -> Result<Ket> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::input("cannot normalise the zero vector"));
        }
        Ok(self.scaled(cre(1.0 / n)))
    }

    /// `|self⟩⟨self|`
    pub fn projector(&self) -> Operator {
        let n = self.amps.len();
        let data = Mat::from_fn(n, n, |i, j| self.amps[i] * self.amps[j].conj());
        Operator { space: self.space.clone(), data }
    }

    /// `⟨self|A|self⟩`
    pub fn expectation(&self, op: &Operator) -> c64 {
        let n = self.amps.len();
        let mut acc = ZERO;
        for j in 0..n {
            if self.amps[j] == ZERO {
                continue;
            }
            for i in 0..n {
                acc += self.amps[i].conj() * op.get(i, j) * self.amps[j];
            }
        }
        acc
    }

    pub fn apply(&self, op: &Operator) -> Ket {
        let n = self.amps.len();
        let amps = (0..n).map(|i| (0..n).fold(ZERO, |acc, j| acc + op.get(i, j) * self.amps[j])).collect();
        Ket { space: self.space.clone(), amps }
    }

    pub fn max_abs_diff(&self, other: &Ket) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| cabs(a - b)).fold(0.0, f64::max)
    }
}
