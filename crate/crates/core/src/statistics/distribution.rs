use std::f64::consts::PI;

use num_complex::Complex64;

use super::characteristic::operator_characteristic;
use super::signal::{signal_moment, signal_variance};
use crate::error::{QfpmeError, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::operators::{hermitian_part, CMatrix};
use crate::qfpme::HermiteState;

/// Relative width of the raised-cosine taper above the cutoff frequency.
pub const TAPER_FRACTION: f64 = 0.25;
/// Default cutoff is this many inverse detector-noise widths, `8/√σ`.
pub const DEFAULT_CUTOFF_WIDTHS: f64 = 8.0;
/// Largest clipped negative mass accepted before the truncation is deemed
/// insufficient.
pub const MAX_CLIP_MASS: f64 = 1e-3;

/// Uniform grid of signal values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        let ok = min.is_finite() && max.is_finite() && (points == 1 || (points >= 2 && max > min));
        if !ok {
            return Err(QfpmeError::InvalidParameter(format!("invalid grid [{min}, {max}] with {points} points")));
        }
        Ok(Self { min, max, points })
    }

    /// A window covering the bulk of the signal distribution of `state`,
    /// `mean ± (6 sd + 4√σ)`.
    pub fn auto(state: &HermiteState, points: usize) -> Self {
        let half = support_half_width(state);
        let mean = signal_moment(state, 1).unwrap_or(0.0);
        let spread = half - mean.abs();
        Self { min: mean - spread, max: mean + spread, points: points.max(2) }
    }

    /// Whether the grid contains the window of [`GridSpec::auto`].
    pub fn covers(&self, state: &HermiteState) -> bool {
        let auto = Self::auto(state, 2);
        self.min <= auto.min && self.max >= auto.max
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let h = self.spacing();
        (0..self.points).map(|i| self.min + h * i as f64).collect()
    }

    pub fn spacing(&self) -> f64 {
        if self.points < 2 {
            0.0
        } else {
            (self.max - self.min) / (self.points - 1) as f64
        }
    }

    /// Same window with twice the resolution.
    pub fn refined(&self) -> Self {
        Self { points: 2 * self.points - 1, ..*self }
    }
}

fn support_half_width(state: &HermiteState) -> f64 {
    let root = state.sigma().sqrt();
    let mean = signal_moment(state, 1).unwrap_or(0.0);
    let sd = signal_variance(state).ok().filter(|v| *v > 0.0).map(f64::sqrt).unwrap_or(root);
    mean.abs() + 6.0 * sd + 4.0 * root
}

/// Frequencies and quadrature weights for the inverse transform
/// `ρ(D) = (1/π) ∫_0^∞ Herm[e^{-iKD} χ(K)] T(K) dK`.
///
/// The spacing `ΔK = π/(2W)` makes the implied period `4W` at least twice
/// the window `[-W, W]`, so aliased copies only contribute from `|D| ≥ 3W`.
#[derive(Debug, Clone)]
pub(crate) struct FourierPlan {
    pub ks: Vec<f64>,
    pub weights: Vec<f64>,
    pub cutoff: f64,
}

impl FourierPlan {
    pub fn new(state: &HermiteState, grid: &GridSpec, cutoff: Option<f64>) -> Result<Self> {
        let default = DEFAULT_CUTOFF_WIDTHS / state.sigma().sqrt();
        let cutoff = cutoff.unwrap_or(default);
        if !(cutoff.is_finite() && cutoff >= default * (1.0 - 1e-12)) {
            return Err(QfpmeError::InvalidParameter(format!(
                "cutoff {cutoff} below the minimum 8/√σ = {default}"
            )));
        }
        let w = support_half_width(state).max(grid.min.abs()).max(grid.max.abs());
        let k_end = cutoff * (1.0 + TAPER_FRACTION);
        let n = (k_end / (PI / (2.0 * w))).ceil().max(8.0) as usize;
        let dk = k_end / n as f64;
        let ks: Vec<f64> = (0..=n).map(|j| j as f64 * dk).collect();
        let weights = ks
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                let trap = if j == 0 || j == n { 0.5 } else { 1.0 };
                trap * dk / PI * taper(k, cutoff)
            })
            .collect();
        Ok(Self { ks, weights, cutoff })
    }

    pub fn scalar(&self, phis: &[Complex64], grid: &[f64]) -> Vec<f64> {
        grid.iter()
            .map(|&d| {
                self.ks
                    .iter()
                    .zip(&self.weights)
                    .zip(phis)
                    .map(|((&k, &w), phi)| w * (Complex64::from_polar(1.0, -k * d) * phi).re)
                    .sum()
            })
            .collect()
    }

    pub fn operator(&self, chis: &[CMatrix], grid: &[f64]) -> Vec<CMatrix> {
        let r = chis[0].nrows();
        grid.iter()
            .map(|&d| {
                let mut acc = CMatrix::zeros(r, r);
                for ((&k, &w), chi) in self.ks.iter().zip(&self.weights).zip(chis) {
                    if w != 0.0 {
                        acc += chi * (Complex64::from_polar(w, -k * d));
                    }
                }
                hermitian_part(&acc)
            })
            .collect()
    }
}

fn taper(k: f64, cutoff: f64) -> f64 {
    if k <= cutoff {
        1.0
    } else if k >= cutoff * (1.0 + TAPER_FRACTION) {
        0.0
    } else {
        0.5 * (1.0 + (PI * (k - cutoff) / (TAPER_FRACTION * cutoff)).cos())
    }
}

pub(crate) fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2).zip(values.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// `P(D)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDistribution {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Frequency above which the characteristic function was tapered off.
    pub cutoff: f64,
    /// Hermite truncation `N` of the source state.
    pub order: usize,
    /// Integral of the negative ripple removed before renormalizing.
    pub clip_mass: f64,
    /// Trapezoid integral of the raw density over the grid.
    pub raw_mass: f64,
}

impl SignalDistribution {
    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// `∫ D^q P(D) dD` by the trapezoid rule.
    pub fn moment(&self, q: i32) -> f64 {
        let f: Vec<f64> = self.grid.iter().zip(&self.density).map(|(d, p)| d.powi(q) * p).collect();
        trapezoid(&self.grid, &f)
    }

    /// Grid points that are strict local maxima with density at least
    /// `min_fraction` of the global maximum.
    pub fn local_maxima(&self, min_fraction: f64) -> Vec<f64> {
        let top = self.density.iter().copied().fold(0.0, f64::max);
        (1..self.density.len().saturating_sub(1))
            .filter(|&i| {
                let p = self.density[i];
                p > self.density[i - 1] && p >= self.density[i + 1] && p >= min_fraction * top
            })
            .map(|i| self.grid[i])
            .collect()
    }
}

/// Clips negative ripple and reports its mass. The result is renormalized to
/// unit mass when the grid spans the whole distribution, otherwise to the
/// unclipped in-window mass.
pub(crate) fn clip_and_normalize(grid: &[f64], raw: Vec<f64>, full_support: bool) -> Result<(Vec<f64>, f64, f64)> {
    let raw_mass = trapezoid(grid, &raw);
    let negative: Vec<f64> = raw.iter().map(|p| (-p).max(0.0)).collect();
    let clip_mass = if grid.len() > 1 { trapezoid(grid, &negative) } else { negative[0] };
    if clip_mass > MAX_CLIP_MASS {
        return Err(QfpmeError::TruncationFailure { mass: clip_mass });
    }
    let mut density: Vec<f64> = raw.into_iter().map(|p| p.max(0.0)).collect();
    if grid.len() > 1 {
        let mass = trapezoid(grid, &density);
        if !(mass > 0.0) {
            return Err(QfpmeError::TruncationFailure { mass: clip_mass });
        }
        let target = if full_support { 1.0 } else { raw_mass.max(0.0) };
        density.iter_mut().for_each(|p| *p *= target / mass);
    }
    Ok((density, clip_mass, raw_mass))
}

/// Options shared by the grid-based statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionOptions {
    /// Defaults to [`GridSpec::auto`] with `points` points.
    pub grid: Option<GridSpec>,
    pub points: usize,
    /// Defaults to `8/√σ`.
    pub cutoff: Option<f64>,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self { grid: None, points: 1001, cutoff: None }
    }
}

impl ReconstructionOptions {
    pub fn resolve_grid(&self, state: &HermiteState) -> GridSpec {
        self.grid.unwrap_or_else(|| GridSpec::auto(state, self.points))
    }
}

/// `P(D) = Tr ρ(D)` from the inverse transform of the characteristic
/// function with a raised-cosine taper above the cutoff.
pub fn reconstruct_distribution(state: &HermiteState, opts: &ReconstructionOptions) -> Result<SignalDistribution> {
    let grid = opts.resolve_grid(state);
    let plan = FourierPlan::new(state, &grid, opts.cutoff)?;
    let chis = operator_characteristic(state, &plan.ks)?;
    let phis: Vec<Complex64> = chis.iter().map(|c| c.trace()).collect();
    let values = grid.values();
    let raw = plan.scalar(&phis, &values);
    let (density, clip_mass, raw_mass) = clip_and_normalize(&values, raw, grid.covers(state))?;
    Ok(SignalDistribution { grid: values, density, cutoff: plan.cutoff, order: state.order(), clip_mass, raw_mass })
}

/// Operator-valued density `ρ(D)` on a grid.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    pub grid: Vec<f64>,
    pub matrices: Vec<CMatrix>,
    pub cutoff: f64,
}

pub fn reconstruct_joint(state: &HermiteState, opts: &ReconstructionOptions) -> Result<JointDistribution> {
    let grid = opts.resolve_grid(state);
    let plan = FourierPlan::new(state, &grid, opts.cutoff)?;
    let chis = operator_characteristic(state, &plan.ks)?;
    let values = grid.values();
    let matrices = plan.operator(&chis, &values);
    Ok(JointDistribution { grid: values, matrices, cutoff: plan.cutoff })
}

/// System state conditioned on a signal value.
#[derive(Debug, Clone)]
pub struct ConditionalState {
    /// `ρ̃(D) = ρ(D)/P(D)`, unit trace, eigenvalues in `[0, 1]`.
    pub state: CMatrix,
    pub density: f64,
    /// Total magnitude of eigenvalue corrections applied.
    pub clip: f64,
}

pub const DEFAULT_CONDITIONAL_FLOOR: f64 = 1e-12;

/// `ρ̃(D) = ρ(D) / P(D)`; an error where `P(D)` falls below `floor`.
pub fn conditional_state(state: &HermiteState, d: f64, floor: f64) -> Result<ConditionalState> {
    let grid = GridSpec::new(d, d, 1)?;
    let plan = FourierPlan::new(state, &grid, None)?;
    let chis = operator_characteristic(state, &plan.ks)?;
    let rho = plan.operator(&chis, &[d]).pop().expect("one point");
    let density = rho.trace().re;
    if !(density >= floor) {
        return Err(QfpmeError::ConditionalUndefined { signal: d, density, floor });
    }
    let (state, clip) = clip_spectrum(&(rho / Complex64::new(density, 0.0)));
    Ok(ConditionalState { state, density, clip })
}

fn clip_spectrum(rho: &CMatrix) -> (CMatrix, f64) {
    let h = hermitian_part(rho);
    let eig = h.clone().symmetric_eigen();
    let mut clip = 0.0;
    let mut vals: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&x| {
            let c = x.clamp(0.0, 1.0);
            clip += (c - x).abs();
            c
        })
        .collect();
    let total: f64 = vals.iter().sum();
    vals.iter_mut().for_each(|v| *v /= total);
    let r = rho.nrows();
    let mut out = CMatrix::zeros(r, r);
    for (k, &lam) in vals.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out += (v * v.adjoint()) * Complex64::new(lam, 0.0);
    }
    (out, clip)
}

/// Eigenvalues below this count as zero in entropies (`0 ln 0 = 0`).
pub const ENTROPY_EIGEN_FLOOR: f64 = 1e-14;

/// Von Neumann entropy in nats.
pub fn von_neumann_entropy(rho: &CMatrix) -> f64 {
    hermitian_eigenvalues(rho).iter().filter(|&&x| x > ENTROPY_EIGEN_FLOOR).map(|&x| -x * x.ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutualInfoOptions {
    pub reconstruction: ReconstructionOptions,
    /// Grid points with `P(D)` at or below this are skipped.
    pub density_floor: f64,
    /// Absolute change accepted between successive grid refinements.
    pub refine_tol: f64,
    pub max_refinements: usize,
}

impl Default for MutualInfoOptions {
    fn default() -> Self {
        Self {
            reconstruction: ReconstructionOptions { points: 401, ..Default::default() },
            density_floor: 1e-12,
            refine_tol: 1e-7,
            max_refinements: 5,
        }
    }
}

fn mutual_information_on(state: &HermiteState, grid: &GridSpec, opts: &MutualInfoOptions) -> Result<f64> {
    let plan = FourierPlan::new(state, grid, opts.reconstruction.cutoff)?;
    let chis = operator_characteristic(state, &plan.ks)?;
    let values = grid.values();
    let joint = plan.operator(&chis, &values);
    let mut weighted = Vec::with_capacity(values.len());
    let mut mass = Vec::with_capacity(values.len());
    for rho in &joint {
        let mu: Vec<f64> = hermitian_eigenvalues(rho).into_iter().map(|x| x.max(0.0)).collect();
        let p: f64 = mu.iter().sum();
        if p <= opts.density_floor {
            weighted.push(0.0);
            mass.push(0.0);
            continue;
        }
        let s: f64 = mu.iter().filter(|&&x| x / p > ENTROPY_EIGEN_FLOOR).map(|&x| -x * (x / p).ln()).sum();
        weighted.push(s);
        mass.push(p);
    }
    let conditional = trapezoid(&values, &weighted) / trapezoid(&values, &mass);
    Ok(von_neumann_entropy(state.unconditional()) - conditional)
}

/// `I = S[M_0] - ∫ S[ρ̃(D)] P(D) dD`, in nats, refining the grid until it
/// is stable.
pub fn mutual_information(state: &HermiteState, opts: &MutualInfoOptions) -> Result<f64> {
    let mut grid = opts.reconstruction.resolve_grid(state);
    let mut value = mutual_information_on(state, &grid, opts)?;
    for _ in 0..opts.max_refinements {
        grid = grid.refined();
        let next = mutual_information_on(state, &grid, opts)?;
        let converged = (next - value).abs() < opts.refine_tol;
        value = next;
        if converged {
            return Ok(value);
        }
    }
    Err(QfpmeError::Convergence(format!("mutual information unstable under grid refinement at {} points", grid.points)))
}

/// Mutual information with its truncation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergedMutualInformation {
    pub value: f64,
    pub orders: Vec<usize>,
    pub values: Vec<f64>,
}

/// Evaluates `I` at `N, N+4, …` (states from `solve`) until successive
/// values differ by less than `1e-4`.
pub fn mutual_information_converged(
    solve: impl Fn(usize) -> Result<HermiteState>,
    n: usize,
    max_order: usize,
    opts: &MutualInfoOptions,
) -> Result<ConvergedMutualInformation> {
    let mut orders = vec![n];
    let mut values = vec![mutual_information(&solve(n)?, opts)?];
    let mut current = n;
    while current + 4 <= max_order {
        current += 4;
        let v = mutual_information(&solve(current)?, opts)?;
        orders.push(current);
        values.push(v);
        let k = values.len();
        if (values[k - 1] - values[k - 2]).abs() < 1e-4 {
            return Ok(ConvergedMutualInformation { value: v, orders, values });
        }
    }
    Err(QfpmeError::Convergence(format!("mutual information not converged in N: orders {orders:?}, values {values:?}")))
}
