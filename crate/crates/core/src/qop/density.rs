use alloc::sync::Arc;
use alloc::vec::Vec;

use faer::{c64, Mat, MatRef};

use super::{HilbertSpace, Ket, Operator};
use crate::linalg::{self, cre, ZERO};
use crate::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-9;

/// Validated density matrix: Hermitian, unit trace, positive semidefinite up
/// to the tolerances above.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(space: Arc<HilbertSpace>, data: Mat<c64>) -> Result<Self> {
        Self::from_operator(Operator::new(space, data)?)
    }

    pub fn from_operator(op: Operator) -> Result<Self> {
        Self::check(&op, TRACE_TOL)?;
        Ok(Self { op })
    }

    /// Accepts the output of a numerical propagation: the matrix is
    /// Hermitized first and the trace is checked against `trace_tol`.
    pub fn from_numerical(space: Arc<HilbertSpace>, data: MatRef<'_, c64>, trace_tol: f64) -> Result<Self> {
        let herm = Mat::from_fn(data.nrows(), data.ncols(), |i, j| (data[(i, j)] + data[(j, i)].conj()) * 0.5);
        let op = Operator::new(space, herm)?;
        Self::check(&op, trace_tol)?;
        Ok(Self { op })
    }

    fn check(op: &Operator, trace_tol: f64) -> Result<()> {
        let defect = op.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::input(alloc::format!("density matrix is not Hermitian (defect {defect:.2e})")));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::input(alloc::format!("density matrix trace is {} + {}i", tr.re, tr.im)));
        }
        let (values, _) = linalg::hermitian_eigen(op.data())?;
        let min = values.first().copied().unwrap_or(0.0);
        if min < -POSITIVITY_TOL {
            return Err(Error::input(alloc::format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn pure(ket: &Ket) -> Result<Self> {
        Self::from_operator(ket.normalized()?.projector())
    }

    pub fn maximally_mixed(space: &Arc<HilbertSpace>) -> Self {
        let d = space.dim();
        let op = Operator::identity(space).scaled(1.0 / d as f64);
        Self { op }
    }

    /// Diagonal state with the given populations (must sum to one).
    pub fn diagonal(space: &Arc<HilbertSpace>, populations: &[f64]) -> Result<Self> {
        let d = space.dim();
        if populations.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: populations.len() });
        }
        let data = Mat::from_fn(d, d, |i, j| if i == j { cre(populations[i]) } else { ZERO });
        Self::new(space.clone(), data)
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        self.op.space()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn data(&self) -> MatRef<'_, c64> {
        self.op.data()
    }

    pub fn as_operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.op.get(i, j)
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    /// `Tr(ρ²)`
    pub fn purity(&self) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let z = self.get(i, j);
                acc += z.re * z.re + z.im * z.im;
            }
        }
        acc
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(linalg::hermitian_eigen(self.data())?.0)
    }

    /// `Tr(Aρ)`
    pub fn expectation(&self, a: &Operator) -> c64 {
        let d = self.dim();
        let mut acc = ZERO;
        for i in 0..d {
            for k in 0..d {
                acc += a.get(i, k) * self.get(k, i);
            }
        }
        acc
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn overlap(&self, psi: &Ket) -> f64 {
        let amps = psi.amplitudes();
        let d = self.dim();
        let mut acc = ZERO;
        for j in 0..d {
            if amps[j] == ZERO {
                continue;
            }
            for i in 0..d {
                acc += amps[i].conj() * self.get(i, j) * amps[j];
            }
        }
        acc.re
    }

    pub fn kron(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(Self { op: self.op.kron(&other.op)? })
    }

    /// Reduced state on the factors in `keep`, in this space's factor order.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let space = self.space();
        let reduced = Arc::new(space.subspace(keep)?);
        let factors = space.factors();
        let kept: Vec<bool> = factors.iter().map(|f| keep.contains(&f.label.as_str())).collect();
        let d = space.dim();
        let dk = reduced.dim();
        let dt = d / dk;

        // Split every flat index into (kept index, traced index).
        let mut split = Vec::with_capacity(d);
        let mut digits = alloc::vec![0usize; factors.len()];
        for _ in 0..d {
            let (mut k, mut t) = (0usize, 0usize);
            for (pos, f) in factors.iter().enumerate() {
                if kept[pos] {
                    k = k * f.dim + digits[pos];
                } else {
                    t = t * f.dim + digits[pos];
                }
            }
            split.push((k, t));
            for pos in (0..factors.len()).rev() {
                digits[pos] += 1;
                if digits[pos] < factors[pos].dim {
                    break;
                }
                digits[pos] = 0;
            }
        }
        let mut by_traced: Vec<Vec<(usize, usize)>> = alloc::vec![Vec::with_capacity(dk); dt];
        for (f, &(k, t)) in split.iter().enumerate() {
            by_traced[t].push((k, f));
        }
        let mut out = Mat::<c64>::zeros(dk, dk);
        for group in &by_traced {
            for &(k2, f2) in group {
                for &(k1, f1) in group {
                    out[(k1, k2)] += self.get(f1, f2);
                }
            }
        }
        Ok(Self { op: Operator::new(reduced, out)? })
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.op.max_abs_diff(&other.op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn qubit_space(label: &str) -> Arc<HilbertSpace> {
        Arc::new(HilbertSpace::new([(label, 2)]).unwrap())
    }

    #[test]
    fn rejects_invalid_states() {
        let s = qubit_space("q");
        let bad_trace = Mat::from_fn(2, 2, |i, j| if i == j { ONE } else { ZERO });
        assert!(DensityMatrix::new(s.clone(), bad_trace).is_err());
        let negative = Mat::from_fn(2, 2, |i, j| if i == j { cre(if i == 0 { 1.5 } else { -0.5 }) } else { ZERO });
        assert!(DensityMatrix::new(s.clone(), negative).is_err());
        let non_herm = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => cre(0.5),
            (0, 1) => cre(0.1),
            _ => ZERO,
        });
        assert!(DensityMatrix::new(s, non_herm).is_err());
    }

    #[test]
    fn partial_trace_of_product_state() {
        let a = DensityMatrix::diagonal(&qubit_space("a"), &[0.3, 0.7]).unwrap();
        let b = DensityMatrix::maximally_mixed(&Arc::new(HilbertSpace::new([("b", 3)]).unwrap()));
        let ab = a.kron(&b).unwrap();
        let back = ab.partial_trace(&["a"]).unwrap();
        assert!(back.max_abs_diff(&a) < 1e-12);
        let other = ab.partial_trace(&["b"]).unwrap();
        assert!(other.max_abs_diff(&b) < 1e-12);
        assert!(matches!(ab.partial_trace(&["c"]), Err(Error::UnknownLabel(_))));
    }
}
