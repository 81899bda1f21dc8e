//! Adaptive Dormand-Prince 5(4) integrator for complex linear systems.

use num_complex::Complex64;

use crate::error::{QfpmeError, Result};
use crate::operators::CVector;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const B_ERR: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub min_step: f64,
}

pub struct Dopri5<F> {
    f: F,
    tol: Tolerances,
    pub y: CVector,
    pub t: f64,
    h: f64,
    steps: usize,
}

fn axpy_all(y: &CVector, h: f64, coeffs: &[f64], k: &[CVector]) -> CVector {
    let mut out = y.clone();
    for (a, kj) in coeffs.iter().zip(k) {
        if *a != 0.0 {
            out.axpy(Complex64::new(h * a, 0.0), kj, Complex64::new(1.0, 0.0));
        }
    }
    out
}

impl<F: FnMut(f64, &CVector) -> CVector> Dopri5<F> {
    pub fn new(f: F, t0: f64, y0: CVector, h0: f64, tol: Tolerances) -> Self {
        Self { f, tol, y: y0, t: t0, h: h0, steps: 0 }
    }

    /// Integrates to exactly `t_end`, calling `post` on every accepted state.
    pub fn advance_to(&mut self, t_end: f64, mut post: impl FnMut(&mut CVector)) -> Result<()> {
        while self.t < t_end {
            if self.steps >= self.tol.max_steps {
                return Err(QfpmeError::StepSizeUnderflow { time: self.t });
            }
            let last = self.t + self.h >= t_end;
            let h = if last { t_end - self.t } else { self.h };
            let mut k: Vec<CVector> = Vec::with_capacity(7);
            k.push((self.f)(self.t, &self.y));
            for s in 1..7 {
                let stage = axpy_all(&self.y, h, &A[s][..s], &k);
                k.push((self.f)(self.t + C[s] * h, &stage));
            }
            let mut y_new = axpy_all(&self.y, h, &A[6], &k);
            let err = axpy_all(&CVector::zeros(y_new.len()), h, &B_ERR, &k);

            let mut acc = 0.0;
            for i in 0..err.len() {
                let sc = self.tol.atol + self.tol.rtol * self.y[i].norm().max(y_new[i].norm());
                acc += (err[i].norm() / sc).powi(2);
            }
            let e = (acc / err.len().max(1) as f64).sqrt();
            self.steps += 1;

            if !e.is_finite() {
                self.h = h * 0.2;
            } else if e <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                post(&mut y_new);
                self.y = y_new;
                let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
            } else {
                self.h = h * (0.9 * e.powf(-0.2)).clamp(0.2, 1.0);
            }
            if self.h < self.tol.min_step * t_end.abs().max(1.0) {
                return Err(QfpmeError::StepSizeUnderflow { time: self.t });
            }
        }
        Ok(())
    }
}
