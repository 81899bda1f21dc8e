//! Dense complex matrices and superoperators acting on column-stacked
//! vectorizations, `vec(A X B) = (B^T ⊗ A) vec(X)`.

mod spectrum;
mod spin;

pub use spectrum::{spectral_decompose, Spectrum};
pub use spin::{spin_operators, spin_operators_with_limit, SpinOperators, MAX_HILBERT_DIM};

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{QfpmeError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// `(σ_x + iσ_y)/2 = |0><1|`: raises the ground state `|1>` (`σ_z = -1`)
/// to the excited state `|0>` (`σ_z = +1`).
pub fn sigma_plus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])
}

/// `(σ_x - iσ_y)/2 = |1><0|`: relaxes towards the ground state `|1>`.
pub fn sigma_minus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)])
}

/// Projector onto computational basis state `k`.
pub fn basis_projector(dim: usize, k: usize) -> CMatrix {
    let mut p = CMatrix::zeros(dim, dim);
    p[(k, k)] = c(1., 0.);
    p
}

pub fn maximally_mixed(dim: usize) -> CMatrix {
    identity(dim).unscale(dim as f64)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.trace()
}

/// Largest entry of the anti-hermitian part `(X - X†)/2`.
pub fn anti_hermitian_norm(x: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            worst = worst.max(0.5 * (x[(i, j)] - x[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(x: &CMatrix) -> CMatrix {
    (x + x.adjoint()).scale(0.5)
}

pub fn ensure_square(x: &CMatrix) -> Result<usize> {
    if x.nrows() != x.ncols() {
        return Err(QfpmeError::DimensionMismatch {
            expected: x.nrows(),
            actual: x.ncols(),
        });
    }
    Ok(x.nrows())
}

pub fn ensure_hermitian(x: &CMatrix, tol: f64) -> Result<()> {
    ensure_square(x)?;
    let scale = x.norm().max(1.0);
    let deviation = anti_hermitian_norm(x);
    if deviation > tol * scale {
        return Err(QfpmeError::NotHermitian { deviation });
    }
    Ok(())
}

/// Column-stacking vectorization.
pub fn vectorize(x: &CMatrix) -> CVector {
    CVector::from_column_slice(x.as_slice())
}

pub fn devectorize(v: &CVector, dim: usize) -> Result<CMatrix> {
    if v.len() != dim * dim {
        return Err(QfpmeError::DimensionMismatch {
            expected: dim * dim,
            actual: v.len(),
        });
    }
    Ok(CMatrix::from_column_slice(dim, dim, v.as_slice()))
}

/// `vec(1)†`, the trace functional: `trace_row · vec(X) = Tr X`.
pub fn trace_row(dim: usize) -> CVector {
    vectorize(&identity(dim))
}

/// A linear map on `R x R` matrices, stored as its `R² x R²` matrix in the
/// column-stacking convention.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    hilbert_dim: usize,
    matrix: CMatrix,
}

#[derive(Debug, Clone, Copy)]
pub enum SuperOpKind<'a> {
    /// `X -> -i[H, X]`
    Hamiltonian(&'a CMatrix),
    /// `X -> L X L† - {L†L, X}/2`
    Dissipator(&'a CMatrix),
    /// `X -> {A, X}`
    Anticommutator(&'a CMatrix),
    /// `X -> A X B`
    LeftRight(&'a CMatrix, &'a CMatrix),
}

impl SuperOperator {
    pub fn from_matrix(hilbert_dim: usize, matrix: CMatrix) -> Result<Self> {
        let d = hilbert_dim * hilbert_dim;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(QfpmeError::DimensionMismatch {
                expected: d,
                actual: matrix.nrows(),
            });
        }
        Ok(Self {
            hilbert_dim,
            matrix,
        })
    }

    pub fn zeros(hilbert_dim: usize) -> Self {
        let d = hilbert_dim * hilbert_dim;
        Self {
            hilbert_dim,
            matrix: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(hilbert_dim: usize) -> Self {
        let d = hilbert_dim * hilbert_dim;
        Self {
            hilbert_dim,
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// Liouville-space dimension `R²`.
    pub fn dim(&self) -> usize {
        self.hilbert_dim * self.hilbert_dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let v = &self.matrix * vectorize(x);
        CMatrix::from_column_slice(self.hilbert_dim, self.hilbert_dim, v.as_slice())
    }

    pub fn apply_vec(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            hilbert_dim: self.hilbert_dim,
            matrix: self.matrix.scale(factor),
        }
    }

    /// Largest `|<<1| S>>|` entry; zero for trace-preserving maps.
    pub fn trace_defect(&self) -> f64 {
        let t = trace_row(self.hilbert_dim).transpose() * &self.matrix;
        t.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &Self) {
        assert_eq!(
            self.hilbert_dim, other.hilbert_dim,
            "superoperator dimension mismatch"
        );
    }
}

impl Add for &SuperOperator {
    type Output = SuperOperator;
    fn add(self, rhs: &SuperOperator) -> SuperOperator {
        self.check_compatible(rhs);
        SuperOperator {
            hilbert_dim: self.hilbert_dim,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &SuperOperator {
    type Output = SuperOperator;
    fn sub(self, rhs: &SuperOperator) -> SuperOperator {
        self.check_compatible(rhs);
        SuperOperator {
            hilbert_dim: self.hilbert_dim,
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul<f64> for &SuperOperator {
    type Output = SuperOperator;
    fn mul(self, rhs: f64) -> SuperOperator {
        self.scale(rhs)
    }
}

/// Builds one of the elementary superoperators. All arguments must be square
/// and of the same dimension.
pub fn build_superop(kind: SuperOpKind<'_>) -> Result<SuperOperator> {
    match kind {
        SuperOpKind::Hamiltonian(h) => {
            let r = ensure_square(h)?;
            let id = identity(r);
            let m = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
            SuperOperator::from_matrix(r, m)
        }
        SuperOpKind::Dissipator(l) => {
            let r = ensure_square(l)?;
            let id = identity(r);
            let ldl = l.adjoint() * l;
            let m = l.conjugate().kronecker(l)
                - (id.kronecker(&ldl) + ldl.transpose().kronecker(&id)).scale(0.5);
            SuperOperator::from_matrix(r, m)
        }
        SuperOpKind::Anticommutator(a) => {
            let r = ensure_square(a)?;
            let id = identity(r);
            SuperOperator::from_matrix(r, id.kronecker(a) + a.transpose().kronecker(&id))
        }
        SuperOpKind::LeftRight(a, b) => {
            let r = ensure_square(a)?;
            if ensure_square(b)? != r {
                return Err(QfpmeError::DimensionMismatch {
                    expected: r,
                    actual: b.nrows(),
                });
            }
            SuperOperator::from_matrix(r, b.transpose().kronecker(a))
        }
    }
}

/// `-i[H, ·] + Σ_k rate_k D[L_k]`.
pub fn build_liouvillian(h: &CMatrix, jumps: &[(f64, CMatrix)]) -> Result<SuperOperator> {
    let r = ensure_square(h)?;
    let mut total = build_superop(SuperOpKind::Hamiltonian(h))?;
    for (rate, jump) in jumps {
        if !(rate.is_finite() && *rate >= 0.0) {
            return Err(QfpmeError::InvalidParameter(format!(
                "jump rate must be >= 0, got {rate}"
            )));
        }
        if ensure_square(jump)? != r {
            return Err(QfpmeError::DimensionMismatch {
                expected: r,
                actual: jump.nrows(),
            });
        }
        total = &total + &build_superop(SuperOpKind::Dissipator(jump))?.scale(*rate);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    fn random_matrix(r: usize, seed: &[f64]) -> CMatrix {
        CMatrix::from_fn(r, r, |i, j| {
            let k = 2 * (i * r + j);
            c(seed[k % seed.len()], seed[(k + 1) % seed.len()])
        })
    }

    fn random_hermitian(r: usize, seed: &[f64]) -> CMatrix {
        hermitian_part(&random_matrix(r, seed))
    }

    #[test]
    fn vectorize_identity_column_stacks() {
        let v = vectorize(&identity(2));
        let expected = [1.0, 0.0, 0.0, 1.0];
        for (z, e) in v.iter().zip(expected) {
            assert_eq!(*z, c(e, 0.0));
        }
    }

    #[test]
    fn devectorize_round_trip_sigma_x() {
        let sx = sigma_x();
        assert_eq!(devectorize(&vectorize(&sx), 2).unwrap(), sx);
        assert!(matches!(
            devectorize(&CVector::zeros(3), 2),
            Err(QfpmeError::DimensionMismatch {
                expected: 4,
                actual: 3
            })
        ));
    }

    #[test]
    fn dissipator_of_sigma_z_on_sigma_x() {
        // σz σx σz - σx = -2 σx
        let d = build_superop(SuperOpKind::Dissipator(&sigma_z())).unwrap();
        assert!(close(&d.apply(&sigma_x()), &sigma_x().scale(-2.0), 1e-15));
    }

    #[test]
    fn hamiltonian_kills_commuting_operators() {
        let h = sigma_z().scale(0.7) + identity(2);
        let s = build_superop(SuperOpKind::Hamiltonian(&h)).unwrap();
        assert!(s.apply(&sigma_z()).norm() < 1e-15);
        assert!(s.apply(&identity(2)).norm() < 1e-15);
    }

    #[test]
    fn anticommutator_with_identity() {
        let s = build_superop(SuperOpKind::Anticommutator(&sigma_z())).unwrap();
        assert!(close(&s.apply(&identity(2)), &sigma_z().scale(2.0), 1e-15));
    }

    #[test]
    fn left_right_dimension_mismatch() {
        let a = identity(2);
        let b = identity(3);
        assert!(build_superop(SuperOpKind::LeftRight(&a, &b)).is_err());
    }

    #[test]
    fn unitary_liouvillian_annihilates_identity() {
        let l = build_liouvillian(&sigma_x(), &[]).unwrap();
        assert!(l.apply(&maximally_mixed(2)).norm() < 1e-15);
    }

    #[test]
    fn negative_rate_rejected() {
        let err = build_liouvillian(&sigma_x(), &[(-1.0, sigma_minus())]).unwrap_err();
        assert!(matches!(err, QfpmeError::InvalidParameter(_)));
    }

    #[test]
    fn thermal_qubit_detailed_balance() {
        let (kappa, nb) = (0.01, 0.5);
        let l = build_liouvillian(
            &CMatrix::zeros(2, 2),
            &[
                (kappa * nb, sigma_plus()),
                (kappa * (nb + 1.0), sigma_minus()),
            ],
        )
        .unwrap();
        // (excited, ground) populations solving the rate equations
        let rho = CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(nb / (2.0 * nb + 1.0), 0.0),
            c((nb + 1.0) / (2.0 * nb + 1.0), 0.0),
        ]));
        assert!(l.apply(&rho).norm() < 1e-16);
        assert!((rho[(1, 1)].re - 0.75).abs() < 1e-15);
        assert!((rho[(0, 0)].re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn vec_of_sandwich_for_random_states() {
        let sx = sigma_x();
        let s = build_superop(SuperOpKind::LeftRight(&sx, &sx)).unwrap();
        let kron = sx.transpose().kronecker(&sx);
        for k in 0..20 {
            let seed: Vec<f64> = (0..8).map(|i| ((k * 8 + i) as f64 * 0.7).sin()).collect();
            let rho = random_hermitian(2, &seed);
            let direct = vectorize(&(&sx * &rho * &sx));
            assert!((&kron * vectorize(&rho) - &direct).norm() < 1e-15);
            assert!((s.apply_vec(&vectorize(&rho)) - direct).norm() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn vec_sandwich_identity(seed in prop::collection::vec(-1.0f64..1.0, 54)) {
            let a = random_matrix(3, &seed[0..18]);
            let x = random_matrix(3, &seed[18..36]);
            let b = random_matrix(3, &seed[36..54]);
            let lhs = vectorize(&(&a * &x * &b));
            let rhs = b.transpose().kronecker(&a) * vectorize(&x);
            prop_assert!((lhs - rhs).norm() < 1e-13);
        }

        #[test]
        fn liouvillians_preserve_trace_and_hermiticity(
            seed in prop::collection::vec(-1.0f64..1.0, 72),
            rates in prop::collection::vec(0.0f64..2.0, 2),
        ) {
            let h = random_hermitian(3, &seed[0..18]);
            let j1 = random_matrix(3, &seed[18..36]);
            let j2 = random_matrix(3, &seed[36..54]);
            let x = random_hermitian(3, &seed[54..72]);
            let generators = [
                build_superop(SuperOpKind::Hamiltonian(&h)).unwrap(),
                build_superop(SuperOpKind::Dissipator(&j1)).unwrap(),
                build_liouvillian(&h, &[(rates[0], j1.clone()), (rates[1], j2.clone())]).unwrap(),
            ];
            for g in &generators {
                prop_assert!(g.trace_defect() < 1e-13);
                let y = g.apply(&x);
                prop_assert!(anti_hermitian_norm(&y) <= 1e-12 * (1.0 + y.norm()));
            }
        }
    }
}
