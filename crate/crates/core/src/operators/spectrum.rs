use nalgebra::DVector;
use num_complex::Complex64;

use super::{trace_row, vectorize, CMatrix, CVector, SuperOperator};
use crate::error::{QfpmeError, Result};

/// Biorthonormal eigendecomposition `S = Σ_j η_j |x_j>><<y_j|`.
///
/// The stationary modes (`η = 0`) come first; index 0 holds `x_0 = vec(M_0)`
/// with `y_0 = vec(1)`. Any further zero modes are traceless.
#[derive(Debug, Clone)]
pub struct Spectrum {
    hilbert_dim: usize,
    eigenvalues: Vec<Complex64>,
    right: CMatrix,
    /// Rows are `y_j†`; equals `right⁻¹`.
    dual: CMatrix,
    stationary_modes: usize,
    residual: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    pub fn right_vectors(&self) -> &CMatrix {
        &self.right
    }

    /// Matrix whose rows are the conjugated left vectors `y_j†`.
    pub fn dual_rows(&self) -> &CMatrix {
        &self.dual
    }

    pub fn right(&self, j: usize) -> CVector {
        self.right.column(j).into_owned()
    }

    pub fn left(&self, j: usize) -> CVector {
        self.dual.row(j).transpose().map(|z| z.conj())
    }

    /// Number of zero eigenvalues (1 when the stationary state is unique).
    pub fn stationary_modes(&self) -> usize {
        self.stationary_modes
    }

    /// Relative reconstruction residual `‖S - X η X⁻¹‖ / ‖S‖`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.right.clone();
        for (j, eta) in self.eigenvalues.iter().enumerate() {
            let col = scaled.column(j) * *eta;
            scaled.set_column(j, &col);
        }
        scaled * &self.dual
    }

    /// `max_{j≠k} |<<y_j|x_k>>|` together with `max_j |<<y_j|x_j>> - 1|`.
    pub fn biorthonormality_defect(&self) -> (f64, f64) {
        let g = &self.dual * &self.right;
        let mut off = 0.0f64;
        let mut diag = 0.0f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                if i == j {
                    diag = diag.max((g[(i, j)] - Complex64::new(1.0, 0.0)).norm());
                } else {
                    off = off.max(g[(i, j)].norm());
                }
            }
        }
        (off, diag)
    }
}

fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

/// Decomposes `s` (assumed diagonalizable) with the stationary pair pinned to
/// the given trace-one matrix `stationary`.
pub fn spectral_decompose(s: &SuperOperator, stationary: &CMatrix) -> Result<Spectrum> {
    let r = s.hilbert_dim();
    let d = s.dim();
    if stationary.nrows() != r || stationary.ncols() != r {
        return Err(QfpmeError::DimensionMismatch {
            expected: r,
            actual: stationary.nrows(),
        });
    }
    let sm = s.matrix();
    let norm = frobenius(sm).max(f64::MIN_POSITIVE);

    let m0 = vectorize(stationary);
    let tr = trace_row(r);
    let m0_trace = tr.dot(&m0);
    if (m0_trace - Complex64::new(1.0, 0.0)).norm() > 1e-8 {
        return Err(QfpmeError::InvalidParameter(format!(
            "stationary matrix must have unit trace, got {m0_trace}"
        )));
    }
    let defect = (sm * &m0).norm() / (norm * m0.norm());
    if defect > 1e-8 {
        return Err(QfpmeError::InvalidParameter(format!(
            "stationary matrix is not annihilated by the superoperator (relative residual {defect:.3e})"
        )));
    }

    let fm = faer::Mat::<faer::c64>::from_fn(d, d, |i, j| sm[(i, j)]);
    let evd = fm
        .eigen()
        .map_err(|e| QfpmeError::LinearAlgebra(format!("eigendecomposition failed: {e:?}")))?;
    let values: Vec<Complex64> = (0..d).map(|i| evd.S()[i]).collect();
    let vectors = CMatrix::from_fn(d, d, |i, j| evd.U()[(i, j)]);

    let zero_tol = 1e-8 * norm.max(1.0);
    let (zero_idx, other_idx): (Vec<usize>, Vec<usize>) =
        (0..d).partition(|&j| values[j].norm() < zero_tol);
    if zero_idx.is_empty() {
        return Err(QfpmeError::NoStationaryState);
    }

    // Extra zero modes, made traceless and pivoted Gram-Schmidt selected.
    let mut candidates: Vec<CVector> = zero_idx
        .iter()
        .map(|&j| {
            let x = vectorize_column(&vectors, j);
            let t = tr.dot(&x);
            x - &m0 * t
        })
        .collect();
    let mut extra: Vec<CVector> = Vec::new();
    for _ in 1..zero_idx.len() {
        let (best, best_norm) = candidates
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_norm <= 1e-12 {
            return Err(QfpmeError::NearDefective {
                residual: f64::INFINITY,
                threshold: 1e-8,
            });
        }
        let q = candidates.swap_remove(best).unscale(best_norm);
        for v in candidates.iter_mut() {
            let overlap = q.dotc(v);
            *v -= &q * overlap;
        }
        extra.push(q);
    }

    let mut eigenvalues = Vec::with_capacity(d);
    let mut right = CMatrix::zeros(d, d);
    right.set_column(0, &m0);
    eigenvalues.push(Complex64::new(0.0, 0.0));
    for (k, v) in extra.iter().enumerate() {
        right.set_column(k + 1, v);
        eigenvalues.push(Complex64::new(0.0, 0.0));
    }
    let offset = 1 + extra.len();
    for (k, &j) in other_idx.iter().enumerate() {
        let x = vectorize_column(&vectors, j);
        let n = x.norm();
        right.set_column(offset + k, &x.unscale(n));
        eigenvalues.push(values[j]);
    }

    let dual = right
        .clone()
        .try_inverse()
        .ok_or(QfpmeError::NearDefective {
            residual: f64::INFINITY,
            threshold: 1e-8,
        })?;

    let mut spectrum = Spectrum {
        hilbert_dim: r,
        eigenvalues,
        right,
        dual,
        stationary_modes: zero_idx.len(),
        residual: 0.0,
    };
    let residual = frobenius(&(spectrum.reconstruct() - sm)) / norm;
    spectrum.residual = residual;
    if !(residual <= 1e-8) {
        return Err(QfpmeError::NearDefective {
            residual,
            threshold: 1e-8,
        });
    }
    Ok(spectrum)
}

fn vectorize_column(m: &CMatrix, j: usize) -> CVector {
    DVector::from_iterator(m.nrows(), m.column(j).iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{basis_projector, build_liouvillian, sigma_minus, sigma_x, sigma_z, spin_operators};

    fn sorted_real(spec: &Spectrum) -> Vec<f64> {
        let mut v: Vec<f64> = spec.eigenvalues().iter().map(|e| e.re).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn amplitude_damping_spectrum() {
        let kappa = 0.8;
        let l = build_liouvillian(&CMatrix::zeros(2, 2), &[(kappa, sigma_minus())]).unwrap();
        let spec = spectral_decompose(&l, &basis_projector(2, 1)).unwrap();
        let ev = sorted_real(&spec);
        let expected = [-kappa, -kappa / 2.0, -kappa / 2.0, 0.0];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
        assert_eq!(spec.stationary_modes(), 1);
        assert!(spec.residual() < 1e-10);
    }

    #[test]
    fn stationary_pair_is_state_and_trace() {
        let l = build_liouvillian(&sigma_x(), &[(0.5, sigma_minus())]).unwrap();
        let m0 = {
            let (v, _) = crate::linalg::stationary_vector(l.matrix(), &trace_row(2), 0, None).unwrap();
            crate::operators::devectorize(&v, 2).unwrap()
        };
        let spec = spectral_decompose(&l, &m0).unwrap();
        assert!((spec.right(0) - vectorize(&m0)).norm() < 1e-12);
        assert!((spec.left(0) - trace_row(2)).norm() < 1e-10);
        let (off, diag) = spec.biorthonormality_defect();
        assert!(off < 1e-8 && diag < 1e-8);
        assert!((spec.reconstruct() - l.matrix()).norm() < 1e-10);
    }

    #[test]
    fn degenerate_zero_modes_keep_trace_dual() {
        // pure dephasing of two spins: a four-dimensional stationary space
        let a = spin_operators(2).unwrap().collective[2].clone();
        let l = build_liouvillian(&CMatrix::zeros(4, 4), &[(1.0, a)]).unwrap();
        let spec = spectral_decompose(&l, &crate::operators::maximally_mixed(4)).unwrap();
        assert!(spec.stationary_modes() > 1);
        assert!((spec.left(0) - trace_row(4)).norm() < 1e-10);
        for j in 1..spec.stationary_modes() {
            assert!(trace_row(4).dot(&spec.right(j)).norm() < 1e-10);
        }
        assert!(spec.biorthonormality_defect().0 < 1e-8);
    }

    #[test]
    fn rejects_non_stationary_reference() {
        let l = build_liouvillian(&sigma_z(), &[(0.5, sigma_minus())]).unwrap();
        assert!(spectral_decompose(&l, &basis_projector(2, 0)).is_err());
    }
}
