use num_complex::Complex64;

use crate::error::{QfpmeError, Result};
use crate::ode::{Dopri5, Tolerances};
use crate::operators::{CMatrix, CVector, SuperOperator};
use crate::qfpme::HermiteState;

/// Partial sums with `Σ|terms|` above this lose more than ~1e-13 to rounding.
const MAX_ABS_SUM: f64 = 1e3;
/// Largest admissible contribution of the last two retained orders.
const MAX_TAIL: f64 = 1e-13;

struct Series<'a> {
    blocks: &'a [CMatrix],
    norms: Vec<f64>,
    /// `ln(σ^{m/2} / √m!)`
    log_scale: Vec<f64>,
    sigma: f64,
}

struct SeriesValue {
    value: CMatrix,
    abs_sum: f64,
    tail: f64,
}

impl<'a> Series<'a> {
    fn new(state: &'a HermiteState) -> Self {
        let sigma = state.sigma();
        let mut log_scale = Vec::with_capacity(state.order());
        let mut acc = 0.0;
        for m in 0..state.order() {
            if m > 0 {
                acc += 0.5 * (sigma / m as f64).ln();
            }
            log_scale.push(acc);
        }
        Self { blocks: state.matrices(), norms: state.matrices().iter().map(|m| m.norm()).collect(), log_scale, sigma }
    }

    /// `χ(K) = e^{-K²σ/2} Σ_m M_m (iK)^m σ^{m/2} / √m!` for `K ≥ 0`.
    fn at(&self, k: f64) -> SeriesValue {
        let r = self.blocks[0].nrows();
        if k == 0.0 {
            return SeriesValue { value: self.blocks[0].clone(), abs_sum: self.norms[0], tail: 0.0 };
        }
        let base = -0.5 * k * k * self.sigma;
        let ln_k = k.ln();
        let mut value = CMatrix::zeros(r, r);
        let mut abs_sum = 0.0;
        let n = self.blocks.len();
        let mut tail = 0.0f64;
        for (m, block) in self.blocks.iter().enumerate() {
            let g = (base + self.log_scale[m] + m as f64 * ln_k).exp();
            if g == 0.0 || self.norms[m] == 0.0 {
                continue;
            }
            let phase = match m % 4 {
                0 => Complex64::new(g, 0.0),
                1 => Complex64::new(0.0, g),
                2 => Complex64::new(-g, 0.0),
                _ => Complex64::new(0.0, -g),
            };
            value += block * phase;
            abs_sum += g * self.norms[m];
            if m + 2 >= n {
                tail = tail.max(g * self.norms[m]);
            }
        }
        SeriesValue { value, abs_sum, tail }
    }

    fn reliable(&self, k: f64) -> bool {
        let v = self.at(k);
        v.abs_sum < MAX_ABS_SUM && v.tail < MAX_TAIL
    }
}

/// Truncated series for `Tr χ(K)` evaluated term by term, with no
/// continuation.
pub fn series_characteristic(state: &HermiteState, ks: &[f64]) -> Vec<Complex64> {
    let series = Series::new(state);
    ks.iter()
        .map(|&k| {
            let t = series.at(k.abs()).value.trace();
            if k < 0.0 {
                t.conj()
            } else {
                t
            }
        })
        .collect()
}

/// `φ(K) = <e^{iKD}> = Tr χ(K)`.
pub fn characteristic_function(state: &HermiteState, ks: &[f64]) -> Result<Vec<Complex64>> {
    Ok(operator_characteristic(state, ks)?.iter().map(|m| m.trace()).collect())
}

/// Operator-valued transform `χ(K) = ∫ e^{iKD} ρ(D) dD`.
///
/// For steady states without feedback the truncated series is only used up
/// to the largest `K` at which it is numerically reliable; beyond that `χ`
/// is continued with the exact equation
/// `χ' = [Λ/(γK) + (i/2)𝓒_A - Kσ] χ`.
pub fn operator_characteristic(state: &HermiteState, ks: &[f64]) -> Result<Vec<CMatrix>> {
    Ok(evaluate(&[state], None, ks, None)?.pop().expect("one state"))
}

/// As [`operator_characteristic`] but switching to the continuation at
/// `k0` whenever the state carries the generator data.
#[cfg(test)]
pub(crate) fn operator_characteristic_from(state: &HermiteState, ks: &[f64], k0: f64) -> Result<Vec<CMatrix>> {
    Ok(evaluate(&[state], None, ks, Some(k0))?.pop().expect("one state"))
}

/// `χ` and `∂_μ χ` on the same frequencies, `∂_μ 𝓛₀ = dl`.
pub(crate) fn characteristic_with_derivative(
    state: &HermiteState,
    derivative: &HermiteState,
    dl: &SuperOperator,
    ks: &[f64],
) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    let mut out = evaluate(&[state, derivative], Some(dl), ks, None)?;
    let d = out.pop().expect("two states");
    let v = out.pop().expect("two states");
    Ok((v, d))
}

struct Continuation {
    sigma: f64,
    half_i_ca: CMatrix,
    lam_over_gamma: CMatrix,
    dl_over_gamma: Option<CMatrix>,
}

impl Continuation {
    fn rhs(&self, k: f64, y: &CVector) -> CVector {
        let r2 = self.lam_over_gamma.nrows();
        let blocks = y.len() / r2;
        let mut out = CVector::zeros(y.len());
        for b in 0..blocks {
            let x = y.rows(b * r2, r2);
            let mut d = &self.lam_over_gamma * x / Complex64::new(k, 0.0) + &self.half_i_ca * x
                - x * Complex64::new(k * self.sigma, 0.0);
            if b == 1 {
                if let Some(dl) = &self.dl_over_gamma {
                    d += dl * y.rows(0, r2) / Complex64::new(k, 0.0);
                }
            }
            out.rows_mut(b * r2, r2).copy_from(&d);
        }
        out
    }

    fn initial_step(&self, k0: f64) -> f64 {
        let rate = self.half_i_ca.norm() + k0 * self.sigma + self.lam_over_gamma.norm() / k0;
        (0.05 / rate).min(0.1 * k0)
    }
}

fn evaluate(
    states: &[&HermiteState],
    dl: Option<&SuperOperator>,
    ks: &[f64],
    force_k0: Option<f64>,
) -> Result<Vec<Vec<CMatrix>>> {
    let r = states[0].hilbert_dim();
    let series: Vec<Series> = states.iter().map(|s| Series::new(s)).collect();
    let mut order: Vec<usize> = (0..ks.len()).collect();
    order.sort_by(|&a, &b| ks[a].abs().total_cmp(&ks[b].abs()));
    let reliable = |k: f64| series.iter().all(|s| s.reliable(k));

    let first_bad = match force_k0 {
        Some(k0) => order.iter().position(|&i| ks[i].abs() > k0),
        None => order.iter().position(|&i| !reliable(ks[i].abs())),
    };
    let ctx = states[0].steady_context();
    let mut out: Vec<Vec<CMatrix>> = vec![vec![CMatrix::zeros(r, r); ks.len()]; states.len()];

    let split = match (first_bad, ctx) {
        (Some(pos), Some(ctx)) => Some((pos, ctx)),
        _ => None,
    };
    let series_end = split.map(|(pos, _)| pos).unwrap_or(order.len());
    for &i in &order[..series_end] {
        for (s, o) in series.iter().zip(out.iter_mut()) {
            o[i] = s.at(ks[i].abs()).value;
        }
    }

    if let Some((pos, ctx)) = split {
        let k_bad = ks[order[pos]].abs();
        let sigma = states[0].sigma();
        let step = (0.05 / sigma.sqrt()).min(k_bad / 32.0);
        let mut k0 = 0.0;
        if let Some(forced) = force_k0 {
            k0 = forced;
        } else {
            let mut k = step;
            while k < k_bad && reliable(k) {
                k0 = k;
                k += step;
            }
        }
        if k0 == 0.0 {
            return Err(QfpmeError::TruncationTooSmall { required: 2 * states[0].order(), available: states[0].order() });
        }
        let cont = Continuation {
            sigma,
            half_i_ca: &ctx.anticommutator * Complex64::new(0.0, 0.5),
            lam_over_gamma: ctx.unconditional.unscale(ctx.gamma),
            dl_over_gamma: dl.map(|d| d.matrix().unscale(ctx.gamma)),
        };
        let r2 = r * r;
        let mut y0 = CVector::zeros(r2 * states.len());
        for (b, s) in series.iter().enumerate() {
            y0.rows_mut(b * r2, r2).copy_from_slice(s.at(k0).value.as_slice());
        }
        let tol = Tolerances { rtol: 1e-11, atol: 1e-15, max_steps: 1_000_000, min_step: 1e-15 };
        let h0 = cont.initial_step(k0);
        let mut ode = Dopri5::new(|k, y: &CVector| cont.rhs(k, y), k0, y0, h0, tol);
        for &i in &order[pos..] {
            let k = ks[i].abs();
            if k <= k0 {
                for (s, o) in series.iter().zip(out.iter_mut()) {
                    o[i] = s.at(k).value;
                }
                continue;
            }
            ode.advance_to(k, |_| {})?;
            for (b, o) in out.iter_mut().enumerate() {
                o[i] = CMatrix::from_column_slice(r, r, &ode.y.as_slice()[b * r2..(b + 1) * r2]);
            }
        }
    }

    for (i, &k) in ks.iter().enumerate() {
        if k < 0.0 {
            for o in out.iter_mut() {
                o[i] = o[i].adjoint();
            }
        }
    }
    Ok(out)
}
