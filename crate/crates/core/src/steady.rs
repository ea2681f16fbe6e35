//! Stationary states of time-independent Lindblad generators.

use alloc::vec::Vec;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat};

use crate::linalg::{self, cabs, cre, ONE, ZERO};
use crate::qop::{dissipator_super, hamiltonian_super, vectorize, DensityMatrix, Operator, SuperOperator};
use crate::{Error, Result};

/// Singular values below `NULL_TOL · ‖L‖₂` count towards the nullspace.
pub const NULL_TOL: f64 = 1e-10;

/// Vectorized problems up to this size get a dense SVD for the nullspace
/// count; larger ones use inverse subspace iteration on the sparse factors.
pub const DENSE_SVD_LIMIT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    Direct,
    LongTime,
}

#[derive(Debug, Clone)]
pub struct SteadyResult {
    pub rho_ss: DensityMatrix,
    /// `‖L vec(ρ_ss)‖₂`
    pub residual: f64,
    /// Dimension of the kernel of `L`; `None` when the method does not
    /// determine it.
    pub nullspace_dim: Option<usize>,
    pub method: SteadyMethod,
}

/// `L = i[·, H] + Σ_k rate_k L[c_k]` as a sparse superoperator.
pub fn liouvillian(h: &Operator, dissipators: &[(f64, Operator)]) -> Result<SuperOperator> {
    let mut parts = Vec::with_capacity(dissipators.len() + 1);
    parts.push(hamiltonian_super(h)?);
    for (rate, c) in dissipators {
        if **c.space() != **h.space() {
            return Err(Error::DimensionMismatch { expected: h.dim(), found: c.dim() });
        }
        parts.push(dissipator_super(c, *rate)?);
    }
    SuperOperator::sum(&parts)
}

/// Solves `L x = 0` with `Tr x = 1` by replacing the first diagonal row of
/// `L` with the trace functional. Fails with
/// [`Error::AmbiguousSteadyState`] when the kernel is not one-dimensional.
///
/// `L` commutes with the adjoint map, so its kernel is spanned by Hermitian
/// matrices and the solve runs on the real `d²`-dimensional space of
/// Hermitian coordinates.
pub fn steady_state(l: &SuperOperator) -> Result<SteadyResult> {
    let d = l.space().dim();
    let n = l.dim();
    let defect = l.trace_defect();
    let scale = spectral_norm_estimate(l);
    if defect > 1e-10 * scale.max(1.0) {
        return Err(Error::input(alloc::format!("generator is not trace preserving (defect {defect:.2e})")));
    }
    let real = hermitian_coordinates(l)?;

    if n <= DENSE_SVD_LIMIT {
        let mut dense = Mat::<f64>::zeros(n, n);
        for &(r, c, v) in &real {
            dense[(r, c)] += v;
        }
        let sv = dense.singular_values().map_err(|e| Error::numeric(alloc::format!("SVD: {e:?}")))?;
        let sigma_max = sv.iter().copied().fold(0.0, f64::max);
        let null = sv.iter().filter(|&&s| s < NULL_TOL * sigma_max).count();
        if null != 1 {
            return Err(Error::AmbiguousSteadyState(null));
        }
    }

    let mut bordered: Vec<(usize, usize, f64)> = real.into_iter().filter(|&(r, _, _)| r != 0).collect();
    for i in 0..d {
        bordered.push((0, i + d * i, 1.0));
    }
    let bordered = merge_duplicates(bordered);
    let triplets: Vec<Triplet<usize, usize, f64>> = bordered.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::numeric(alloc::format!("sparse assembly: {e:?}")))?;
    let lu = m.sp_lu().map_err(|e| Error::numeric(alloc::format!("sparse LU: {e:?}")))?;

    let mut b = Mat::<f64>::zeros(n, 1);
    b[(0, 0)] = 1.0;
    let mut x = lu.solve(&b);
    // Two rounds of iterative refinement.
    for _ in 0..2 {
        let mut r = b.clone();
        for &(i, j, v) in &bordered {
            r[(i, 0)] -= v * x[(j, 0)];
        }
        let dx = lu.solve(&r);
        x = &x + &dx;
    }
    let finite = (0..n).all(|i| x[(i, 0)].is_finite());
    if !finite {
        let null = if n > DENSE_SVD_LIMIT { 1 + bordered_nullity(&lu, n, scale) } else { 2 };
        return Err(Error::AmbiguousSteadyState(null.max(2)));
    }

    let nullspace_dim = if n > DENSE_SVD_LIMIT {
        let null = 1 + bordered_nullity(&lu, n, scale);
        if null != 1 {
            return Err(Error::AmbiguousSteadyState(null));
        }
        null
    } else {
        1
    };

    let xs: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let rho = clean_state(from_hermitian_coordinates(&xs, d))?;
    let rho_ss = DensityMatrix::new(l.space().clone(), rho)?;
    let residual = residual_norm(l, &rho_ss);
    Ok(SteadyResult { rho_ss, residual, nullspace_dim: Some(nullspace_dim), method: SteadyMethod::Direct })
}

/// `‖L vec(ρ)‖₂`
pub fn residual_norm(l: &SuperOperator, rho: &DensityMatrix) -> f64 {
    let r = l.apply(&vectorize(rho.data()));
    libm::sqrt(r.iter().map(|z| z.re * z.re + z.im * z.im).sum())
}

/// Real matrix of `L` restricted to Hermitian arguments. Coordinate `i + d·i`
/// holds `ρ_ii`; for `i < j`, `i + d·j` holds `Re ρ_ij` and `j + d·i` holds
/// `Im ρ_ij`.
fn hermitian_coordinates(l: &SuperOperator) -> Result<Vec<(usize, usize, f64)>> {
    let d = l.space().dim();
    let mut out = Vec::with_capacity(2 * l.nnz());
    for (row, col, v) in l.triplets() {
        let (i, j) = (row % d, row / d);
        if i > j {
            continue;
        }
        let (k, m) = (col % d, col / d);
        // ρ_km in coordinates: (index, coefficient) pairs.
        let parts: [(usize, c64); 2] = if k == m {
            [(k + d * k, ONE), (usize::MAX, ZERO)]
        } else if k < m {
            [(k + d * m, ONE), (m + d * k, c64::new(0.0, 1.0))]
        } else {
            [(m + d * k, ONE), (k + d * m, c64::new(0.0, -1.0))]
        };
        for (idx, coeff) in parts {
            if idx == usize::MAX {
                continue;
            }
            let w = v * coeff;
            if i == j {
                out.push((i + d * i, idx, w.re));
            } else {
                out.push((i + d * j, idx, w.re));
                out.push((j + d * i, idx, w.im));
            }
        }
    }
    if out.iter().any(|t| !t.2.is_finite()) {
        return Err(Error::numeric("generator has non-finite entries"));
    }
    Ok(out)
}

fn merge_duplicates(mut t: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    t.sort_unstable_by_key(|&(r, c, _)| (c, r));
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
    for (r, c, v) in t {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out
}

fn from_hermitian_coordinates(x: &[f64], d: usize) -> Mat<c64> {
    Mat::from_fn(d, d, |i, j| {
        if i == j {
            cre(x[i + d * i])
        } else if i < j {
            c64::new(x[i + d * j], x[j + d * i])
        } else {
            c64::new(x[j + d * i], -x[i + d * j])
        }
    })
}

/// Number of singular values of the bordered matrix below tolerance,
/// estimated by block inverse iteration on `(MᵀM)⁻¹`.
fn bordered_nullity(lu: &faer::sparse::linalg::solvers::Lu<usize, f64>, n: usize, scale: f64) -> usize {
    const BLOCK: usize = 3;
    const ITERS: usize = 25;
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut x = Mat::from_fn(n, BLOCK, |_, _| next());
    orthonormalize(&mut x);
    let mut mu = Vec::new();
    for _ in 0..ITERS {
        let y = lu.solve_transpose(&x);
        let z = lu.solve(&y);
        let rq = x.transpose() * &z;
        let sym = Mat::from_fn(BLOCK, BLOCK, |i, j| cre((rq[(i, j)] + rq[(j, i)]) * 0.5));
        mu = linalg::hermitian_eigen(sym.as_ref()).map(|(v, _)| v).unwrap_or_default();
        x = z;
        if (0..n).any(|i| (0..BLOCK).any(|j| !x[(i, j)].is_finite())) {
            return BLOCK;
        }
        orthonormalize(&mut x);
    }
    // μ ≈ 1/σ² for the smallest singular values σ of M.
    mu.iter().filter(|&&m| m > 0.0 && 1.0 / libm::sqrt(m) < NULL_TOL * scale).count()
}

fn orthonormalize(x: &mut Mat<f64>) {
    let (n, b) = (x.nrows(), x.ncols());
    for j in 0..b {
        for k in 0..j {
            let dot: f64 = (0..n).map(|i| x[(i, k)] * x[(i, j)]).sum();
            for i in 0..n {
                let v = x[(i, k)];
                x[(i, j)] -= v * dot;
            }
        }
        let norm = libm::sqrt((0..n).map(|i| x[(i, j)] * x[(i, j)]).sum());
        if norm > 0.0 {
            for i in 0..n {
                x[(i, j)] *= 1.0 / norm;
            }
        }
    }
}

/// Power-iteration estimate of `‖L‖₂`.
fn spectral_norm_estimate(l: &SuperOperator) -> f64 {
    let n = l.dim();
    let mut v: Vec<c64> = (0..n).map(|i| c64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05)).collect();
    let mut sigma = 0.0;
    for _ in 0..30 {
        let norm = libm::sqrt(v.iter().map(|z| z.re * z.re + z.im * z.im).sum());
        if norm == 0.0 {
            return 0.0;
        }
        for z in &mut v {
            *z *= 1.0 / norm;
        }
        let w = l.apply(&v);
        sigma = libm::sqrt(w.iter().map(|z| z.re * z.re + z.im * z.im).sum());
        v = l.apply_adjoint(&w);
    }
    sigma
}

/// Hermitizes, clips eigenvalues in `[−POSITIVITY_TOL, 0)` and renormalizes.
fn clean_state(x: Mat<c64>) -> Result<Mat<c64>> {
    clean_state_with(x, crate::qop::POSITIVITY_TOL)
}

fn clean_state_with(x: Mat<c64>, tol: f64) -> Result<Mat<c64>> {
    let d = x.nrows();
    let tr = linalg::trace(x.as_ref());
    if cabs(tr) == 0.0 {
        return Err(Error::numeric("steady-state solution has zero trace"));
    }
    let herm = Mat::from_fn(d, d, |i, j| (x[(i, j)] + x[(j, i)].conj()) * 0.5 / tr.re);
    let (values, v) = linalg::hermitian_eigen(herm.as_ref())?;
    let min = values.first().copied().unwrap_or(0.0);
    if min < -tol {
        return Err(Error::numeric(alloc::format!("steady state has eigenvalue {min:.3e}")));
    }
    if min >= 0.0 {
        return Ok(herm);
    }
    let clipped: Vec<f64> = values.iter().map(|&e| e.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let out = linalg::spectral_function(&clipped, v.as_ref(), |e| cre(e / total));
    Ok(Mat::from_fn(d, d, |i, j| (out[(i, j)] + out[(j, i)].conj()) * 0.5))
}

/// Stationary state by implicit-Euler propagation of `rho0` to `t_end` in
/// `steps` equal steps, `(I − h L) x_{k+1} = x_k`. The scheme is L-stable, so
/// large steps damp every transient while keeping the fixed point exact.
pub fn steady_long_time(l: &SuperOperator, rho0: &DensityMatrix, t_end: f64, steps: usize) -> Result<SteadyResult> {
    if !(t_end > 0.0 && t_end.is_finite()) || steps == 0 {
        return Err(Error::input("long-time propagation needs t_end > 0 and at least one step"));
    }
    if **rho0.space() != **l.space() {
        return Err(Error::DimensionMismatch { expected: l.space().dim(), found: rho0.dim() });
    }
    let d = l.space().dim();
    let n = l.dim();
    let h = t_end / steps as f64;
    let mut t: Vec<(usize, usize, f64)> = hermitian_coordinates(l)?.into_iter().map(|(r, c, v)| (r, c, -h * v)).collect();
    t.extend((0..n).map(|i| (i, i, 1.0)));
    let t = merge_duplicates(t);
    let triplets: Vec<Triplet<usize, usize, f64>> = t.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::numeric(alloc::format!("sparse assembly: {e:?}")))?;
    let lu = m.sp_lu().map_err(|e| Error::numeric(alloc::format!("sparse LU: {e:?}")))?;

    let r0 = rho0.data();
    let mut x = Mat::from_fn(n, 1, |k, _| {
        let (i, j) = (k % d, k / d);
        match i.cmp(&j) {
            core::cmp::Ordering::Equal => r0[(i, i)].re,
            core::cmp::Ordering::Less => r0[(i, j)].re,
            core::cmp::Ordering::Greater => r0[(j, i)].im,
        }
    });
    for _ in 0..steps {
        x = lu.solve(&x);
    }
    let xs: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("implicit propagation produced non-finite values"));
    }
    let rho_ss = DensityMatrix::new(l.space().clone(), clean_state(from_hermitian_coordinates(&xs, d))?)?;
    let residual = residual_norm(l, &rho_ss);
    Ok(SteadyResult { rho_ss, residual, nullspace_dim: None, method: SteadyMethod::LongTime })
}
