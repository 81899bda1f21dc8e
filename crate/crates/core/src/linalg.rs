//! Dense solves shared by the steady-state solvers.

use nalgebra::linalg::{LU, SVD};
use nalgebra::Dyn;
use num_complex::Complex64;

use crate::error::{QfpmeError, Result};
use crate::operators::{CMatrix, CVector};

/// Pivot ratio below which an LU factorization is treated as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

pub struct Factorized {
    lu: LU<Complex64, Dyn, Dyn>,
    pivot_ratio: f64,
}

impl Factorized {
    pub fn new(m: CMatrix) -> Self {
        let lu = LU::new(m);
        let u = lu.u();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..u.nrows().min(u.ncols()) {
            let p = u[(i, i)].norm();
            lo = lo.min(p);
            hi = hi.max(p);
        }
        let pivot_ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        Self { lu, pivot_ratio }
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn is_singular(&self) -> bool {
        !(self.pivot_ratio > SINGULAR_PIVOT_RATIO)
    }

    pub fn solve(&self, b: &CVector) -> CVector {
        self.lu.solve(b).expect("non-singular factorization")
    }
}

/// How a stationary vector was pinned down.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSelection {
    /// One-dimensional kernel, fixed by the trace condition.
    Unique,
    /// Kernel of the given dimension; the reference state was projected onto
    /// it along the range of the generator (its long-time limit).
    Projected(usize),
}

/// Solves `S v = 0` subject to `functional · v = 1`.
///
/// The equation in row `anchor_row` is replaced by the normalization, which is
/// exact when `functional` is a left null vector of `S` with a non-zero entry
/// at `anchor_row`. When the kernel is degenerate, `reference` is projected
/// onto it; without a reference a degenerate kernel is an error.
pub fn stationary_vector(
    s: &CMatrix,
    functional: &CVector,
    anchor_row: usize,
    reference: Option<&CVector>,
) -> Result<(CVector, KernelSelection)> {
    let n = s.nrows();
    let mut bordered = s.clone();
    for j in 0..n {
        bordered[(anchor_row, j)] = functional[j];
    }
    let lu = Factorized::new(bordered);
    if !lu.is_singular() {
        let mut rhs = CVector::zeros(n);
        rhs[anchor_row] = Complex64::new(1.0, 0.0);
        let v = lu.solve(&rhs);
        let scale = s.norm().max(1.0) * v.norm().max(1.0);
        if (s * &v).norm() <= 1e-9 * scale {
            return Ok((v, KernelSelection::Unique));
        }
    }
    kernel_projection(s, functional, reference)
}

fn kernel_projection(
    s: &CMatrix,
    functional: &CVector,
    reference: Option<&CVector>,
) -> Result<(CVector, KernelSelection)> {
    let n = s.nrows();
    let svd = SVD::new(s.clone(), true, true);
    let u = svd.u.as_ref().expect("u computed");
    let v_t = svd.v_t.as_ref().expect("v_t computed");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = 1e-10 * smax.max(1.0);
    let null: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] < tol)
        .collect();
    match null.len() {
        0 => Err(QfpmeError::NoStationaryState),
        1 => {
            let v: CVector = v_t.row(null[0]).adjoint();
            let t = functional.transpose() * &v;
            if t[0].norm() < 1e-12 {
                return Err(QfpmeError::NoStationaryState);
            }
            Ok((v / t[0], KernelSelection::Unique))
        }
        k => {
            let reference = reference.ok_or(QfpmeError::DegenerateKernel(k))?;
            if reference.len() != n {
                return Err(QfpmeError::DimensionMismatch {
                    expected: n,
                    actual: reference.len(),
                });
            }
            // P = V0 (U0† V0)⁻¹ U0†
            let v0 = CMatrix::from_fn(n, k, |i, c| v_t[(null[c], i)].conj());
            let u0 = CMatrix::from_fn(n, k, |i, c| u[(i, null[c])]);
            let gram = u0.adjoint() * &v0;
            let gram_inv = gram.try_inverse().ok_or(QfpmeError::DegenerateKernel(k))?;
            let v = &v0 * (gram_inv * (u0.adjoint() * reference));
            let t = (functional.transpose() * &v)[0];
            if t.norm() < 1e-12 {
                return Err(QfpmeError::NoStationaryState);
            }
            Ok((v / t, KernelSelection::Projected(k)))
        }
    }
}

/// Solves `S v = b` with `functional · v = 0`, for `b` in the range of `S`
/// (`functional · b = 0`). Requires a one-dimensional kernel.
pub struct TraceFreeSolver {
    lu: Factorized,
    anchor_row: usize,
}

impl TraceFreeSolver {
    pub fn new(s: &CMatrix, functional: &CVector, anchor_row: usize) -> Result<Self> {
        let mut bordered = s.clone();
        for j in 0..s.ncols() {
            bordered[(anchor_row, j)] = functional[j];
        }
        let lu = Factorized::new(bordered);
        if lu.is_singular() {
            let kernel = nullity(s);
            return Err(if kernel > 1 {
                QfpmeError::DegenerateKernel(kernel)
            } else {
                QfpmeError::NoStationaryState
            });
        }
        Ok(Self { lu, anchor_row })
    }

    pub fn solve(&self, b: &CVector) -> CVector {
        let mut rhs = b.clone();
        rhs[self.anchor_row] = Complex64::new(0.0, 0.0);
        self.lu.solve(&rhs)
    }
}

pub fn nullity(s: &CMatrix) -> usize {
    let sv = s.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&x| x < 1e-10 * smax.max(1.0)).count()
}

/// Eigenvalues of the hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Principal square root of a positive semidefinite hermitian matrix
/// (negative eigenvalues clipped to zero).
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()).scale(lam.max(0.0).sqrt());
    }
    out
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(ρ) σ sqrt(ρ)))²`.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let sr = psd_sqrt(rho);
    let inner = &sr * sigma * &sr;
    let t: f64 = hermitian_eigenvalues(&inner)
        .iter()
        .map(|x| x.max(0.0).sqrt())
        .sum();
    t * t
}
