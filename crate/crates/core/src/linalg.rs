//! Dense helpers on top of `faer` that the rest of the crate shares.

use alloc::vec::Vec;

use faer::{c64, Mat, MatRef, Side};

use crate::{Error, Result};

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

#[inline]
pub fn cre(re: f64) -> c64 {
    c64::new(re, 0.0)
}

#[inline]
pub fn cabs(z: c64) -> f64 {
    libm::hypot(z.re, z.im)
}

/// `e^{iθ}`
#[inline]
pub fn cis(theta: f64) -> c64 {
    c64::new(libm::cos(theta), libm::sin(theta))
}

#[inline]
pub fn cexp(z: c64) -> c64 {
    let m = libm::exp(z.re);
    c64::new(m * libm::cos(z.im), m * libm::sin(z.im))
}

/// Largest entry modulus.
pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(cabs(m[(i, j)]));
        }
    }
    best
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max(cabs(a[(i, j)] - b[(i, j)]));
        }
    }
    best
}

/// Maximum absolute row sum (the induced ∞-norm).
pub fn norm_inf(m: MatRef<'_, c64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| cabs(m[(i, j)])).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm_one(m: MatRef<'_, c64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| cabs(m[(i, j)])).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).fold(ZERO, |acc, i| acc + m[(i, i)])
}

pub fn scale(m: MatRef<'_, c64>, s: c64) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

/// Dense Kronecker product `a ⊗ b` (row index `i_a * dim_b + i_b`).
pub fn kron_dense(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut out = Mat::<c64>::zeros(ra * rb, ca * cb);
    for ja in 0..ca {
        for ia in 0..ra {
            let x = a[(ia, ja)];
            if x == ZERO {
                continue;
            }
            for jb in 0..cb {
                for ib in 0..rb {
                    out[(ia * rb + ib, ja * cb + jb)] = x * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix: ascending real eigenvalues and
/// the unitary whose columns are the eigenvectors.
pub fn hermitian_eigen(h: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::numeric(alloc::format!("Hermitian eigensolver: {e:?}")))?;
    let s = evd.S();
    let values = (0..h.nrows()).map(|i| s[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

/// `exp(-i h t)` for Hermitian `h`, built from its spectral decomposition.
pub fn unitary_propagator(h: MatRef<'_, c64>, t: f64) -> Result<Mat<c64>> {
    let (values, v) = hermitian_eigen(h)?;
    Ok(spectral_function(&values, v.as_ref(), |e| cis(-e * t)))
}

/// `V f(Λ) V†`.
pub fn spectral_function(values: &[f64], v: MatRef<'_, c64>, f: impl Fn(f64) -> c64) -> Mat<c64> {
    let n = values.len();
    let phases: Vec<c64> = values.iter().map(|&e| f(e)).collect();
    let scaled = Mat::from_fn(n, n, |i, k| v[(i, k)] * phases[k]);
    &scaled * v.adjoint()
}

/// General complex matrix exponential by scaling and squaring of a truncated
/// Taylor series.
pub fn expm(a: MatRef<'_, c64>) -> Mat<c64> {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = norm_one(a);
    let mut squarings = 0u32;
    let mut s = 1.0;
    while norm * s > 0.25 {
        s *= 0.5;
        squarings += 1;
    }
    let scaled = scale(a, cre(s));
    // ‖A‖ ≤ 1/4 keeps the degree-18 remainder far below machine precision.
    let mut result = Mat::<c64>::identity(n, n);
    let mut term = Mat::<c64>::identity(n, n);
    for k in 1..=18u32 {
        term = scale((&term * &scaled).as_ref(), cre(1.0 / k as f64));
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Column `j` of a matrix with unit row stride.
pub(crate) fn col_slice<'a>(x: MatRef<'a, c64>, j: usize) -> &'a [c64] {
    x.col(j).try_as_col_major().expect("unit row stride").as_slice()
}

/// Sparse view of a dense operator: `(row, col, value)` for every nonzero.
///
/// Left/right products against dense density matrices cost `nnz · n`, which
/// is what keeps the master-equation right-hand sides cheap.
#[derive(Debug, Clone)]
pub struct SparseOp {
    n: usize,
    entries: Vec<(usize, usize, c64)>,
}

impl SparseOp {
    pub fn from_dense(m: MatRef<'_, c64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != ZERO {
                    entries.push((i, j, v));
                }
            }
        }
        Self { n: m.nrows(), entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, c64)] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect(),
        }
    }

    /// `out += coeff · self · x`
    pub fn left_mul_acc(&self, x: MatRef<'_, c64>, coeff: c64, out: &mut Mat<c64>) {
        if x.row_stride() != 1 {
            return self.left_mul_acc(x.to_owned().as_ref(), coeff, out);
        }
        for j in 0..x.ncols() {
            let xc = col_slice(x, j);
            let oc = out.col_as_slice_mut(j);
            for &(i, k, v) in &self.entries {
                oc[i] += v * coeff * xc[k];
            }
        }
    }

    /// `out += coeff · x · self`
    pub fn right_mul_acc(&self, x: MatRef<'_, c64>, coeff: c64, out: &mut Mat<c64>) {
        if x.row_stride() != 1 {
            return self.right_mul_acc(x.to_owned().as_ref(), coeff, out);
        }
        let rows = x.nrows();
        for &(k, j, v) in &self.entries {
            let w = v * coeff;
            let xc = col_slice(x, k);
            let oc = out.col_as_slice_mut(j);
            for i in 0..rows {
                oc[i] += w * xc[i];
            }
        }
    }

    pub fn left_mul(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        let mut out = Mat::<c64>::zeros(self.n, x.ncols());
        self.left_mul_acc(x, ONE, &mut out);
        out
    }

    pub fn right_mul(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        let mut out = Mat::<c64>::zeros(x.nrows(), self.n);
        self.right_mul_acc(x, ONE, &mut out);
        out
    }

    /// Induced ∞-norm.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = alloc::vec![0.0f64; self.n];
        for &(i, _, v) in &self.entries {
            rows[i] += cabs(v);
        }
        rows.into_iter().fold(0.0, f64::max)
    }
}
