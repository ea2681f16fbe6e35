use alloc::sync::Arc;
use alloc::vec::Vec;

use faer::{c64, Mat, MatRef};

use super::{HilbertSpace, Operator};
use crate::linalg::{cabs, cre, SparseOp, I, ZERO};
use crate::{Error, Result};

/// `a ⊗ b`, factor order a-then-b.
pub fn kron(a: &Operator, b: &Operator) -> Result<Operator> {
    a.kron(b)
}

/// Sparse (CSR) linear map on column-major vectorized operators of `space`.
#[derive(Debug, Clone)]
pub struct SuperOperator {
    space: Arc<HilbertSpace>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<c64>,
}

impl SuperOperator {
    /// Builds from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(space: Arc<HilbertSpace>, mut triplets: Vec<(usize, usize, c64)>) -> Result<Self> {
        let n = space.dim() * space.dim();
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= n || c >= n) {
            return Err(Error::DimensionMismatch { expected: n, found: r.max(c) + 1 });
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = alloc::vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<c64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { space, row_ptr, cols, vals })
    }

    /// Sum of superoperators on the same space.
    pub fn sum(parts: &[SuperOperator]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::input("empty superoperator sum"))?;
        let mut triplets = Vec::with_capacity(parts.iter().map(|p| p.nnz()).sum());
        for p in parts {
            if *p.space != *first.space {
                return Err(Error::DimensionMismatch { expected: first.space.dim(), found: p.space.dim() });
            }
            triplets.extend(p.triplets());
        }
        Self::from_triplets(first.space.clone(), triplets)
    }

    pub fn space(&self) -> &Arc<HilbertSpace> {
        &self.space
    }

    /// Side length of the vectorized problem, `dim(space)²`.
    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn scaled(&self, s: c64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= s;
        }
        out
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.dim());
        (0..self.dim())
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1]).fold(ZERO, |acc, k| acc + self.vals[k] * x[self.cols[k]])
            })
            .collect()
    }

    /// `L† x`
    pub fn apply_adjoint(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.dim());
        let mut out = alloc::vec![ZERO; self.dim()];
        for r in 0..self.dim() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.cols[k]] += self.vals[k].conj() * x[r];
            }
        }
        out
    }

    /// `unvec(L · vec(ρ))`
    pub fn apply_matrix(&self, rho: MatRef<'_, c64>) -> Mat<c64> {
        let d = self.space.dim();
        unvectorize(&self.apply(&vectorize(rho)), d)
    }

    /// `max_j |(vec(I)† L)_j|`; zero for trace-preserving generators.
    pub fn trace_defect(&self) -> f64 {
        let d = self.space.dim();
        let mut row = alloc::vec![ZERO; self.dim()];
        for i in 0..d {
            let r = i + d * i;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row[self.cols[k]] += self.vals[k];
            }
        }
        row.into_iter().map(cabs).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let n = self.dim();
        let mut m = Mat::<c64>::zeros(n, n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Frobenius norm of the stored entries.
    pub fn norm_fro(&self) -> f64 {
        libm::sqrt(self.vals.iter().map(|v| v.re * v.re + v.im * v.im).sum())
    }
}

/// Column-major vectorization.
pub fn vectorize(m: MatRef<'_, c64>) -> Vec<c64> {
    let mut v = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn unvectorize(v: &[c64], d: usize) -> Mat<c64> {
    assert_eq!(v.len(), d * d);
    Mat::from_fn(d, d, |i, j| v[i + d * j])
}

/// Entries of `ρ ↦ coeff·Aρ`, i.e. `coeff·(I ⊗ A)`.
fn push_left(out: &mut Vec<(usize, usize, c64)>, a: &SparseOp, coeff: c64) {
    let d = a.dim();
    for &(i, k, v) in a.entries() {
        let w = v * coeff;
        for m in 0..d {
            out.push((m * d + i, m * d + k, w));
        }
    }
}

/// Entries of `ρ ↦ coeff·ρB`, i.e. `coeff·(Bᵀ ⊗ I)`.
fn push_right(out: &mut Vec<(usize, usize, c64)>, b: &SparseOp, coeff: c64) {
    let d = b.dim();
    for &(k, j, v) in b.entries() {
        let w = v * coeff;
        for m in 0..d {
            out.push((j * d + m, k * d + m, w));
        }
    }
}

/// Entries of `ρ ↦ coeff·AρB`, i.e. `coeff·(Bᵀ ⊗ A)`.
fn push_sandwich(out: &mut Vec<(usize, usize, c64)>, a: &SparseOp, b: &SparseOp, coeff: c64) {
    let d = a.dim();
    for &(k, j, vb) in b.entries() {
        for &(i, l, va) in a.entries() {
            out.push((j * d + i, k * d + l, va * vb * coeff));
        }
    }
}

/// Matrix of `ρ ↦ i[ρ, H] = i(ρH − Hρ)`.
pub fn hamiltonian_super(h: &Operator) -> Result<SuperOperator> {
    let defect = h.hermiticity_defect();
    if defect > 1e-10 {
        return Err(Error::input(alloc::format!("Hamiltonian is not Hermitian (defect {defect:.2e})")));
    }
    let hs = SparseOp::from_dense(h.data());
    let mut t = Vec::with_capacity(2 * hs.nnz() * h.dim());
    push_right(&mut t, &hs, I);
    push_left(&mut t, &hs, -I);
    SuperOperator::from_triplets(h.space().clone(), t)
}

/// Matrix of `rate·(cρc† − ½c†cρ − ½ρc†c)`.
pub fn dissipator_super(c: &Operator, rate: f64) -> Result<SuperOperator> {
    if !(rate >= 0.0) {
        return Err(Error::input(alloc::format!("dissipation rate must be nonnegative, got {rate}")));
    }
    let cs = SparseOp::from_dense(c.data());
    let cd = cs.adjoint();
    let cdc = SparseOp::from_dense((&c.adjoint() * c).data());
    let r = cre(rate);
    let mut t = Vec::new();
    if rate > 0.0 {
        push_sandwich(&mut t, &cs, &cd, r);
        push_left(&mut t, &cdc, r * -0.5);
        push_right(&mut t, &cdc, r * -0.5);
    }
    SuperOperator::from_triplets(c.space().clone(), t)
}
