//! Monte Carlo unraveling of the monitored dynamics: Gaussian Kraus updates
//! for the measurement, an Euler step of the (signal-dependent) Liouvillian
//! and the low-pass filter `dD = γ(z - D)dt`.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{QfpmeError, Result};
use crate::operators::{hermitian_part, vectorize, CMatrix, CVector};
use crate::qfpme::{InitialDetector, ModelSpec};
use crate::statistics::SignalDistribution;

/// Above this value of `γ dt` or `λ‖A‖² dt` the first-order splitting is
/// inaccurate and a warning is attached to the ensemble.
pub const STEP_WARNING: f64 = 0.05;

/// `10⁻³ min(1/γ, 1/λ, 1/‖𝓛₀‖)`.
pub fn default_dt(model: &ModelSpec) -> f64 {
    let l0 = model.liouvillian().matrix().clone().singular_values().max();
    let mut rate = model.gamma().max(model.lambda());
    rate = rate.max(l0);
    1e-3 / rate
}

/// Precomputed pieces of one trajectory step for a fixed model.
#[derive(Debug, Clone)]
pub struct Propagator {
    /// Eigenvectors of `A` as columns.
    basis: CMatrix,
    eigenvalues: Vec<f64>,
    liouvillian: CMatrix,
    feedback: Vec<(crate::hermite::FeedbackFunctionSpec, CMatrix)>,
    lambda: f64,
    gamma: f64,
    hilbert_dim: usize,
}

impl Propagator {
    pub fn new(model: &ModelSpec) -> Self {
        let eig = SymmetricEigen::new(hermitian_part(model.measured()));
        Self {
            basis: eig.eigenvectors,
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            liouvillian: model.liouvillian().matrix().clone(),
            feedback: model
                .feedback()
                .iter()
                .filter(|c| c.strength != 0.0)
                .map(|c| (c.function.clone(), c.generator.matrix() * Complex64::new(c.strength, 0.0)))
                .collect(),
            lambda: model.lambda(),
            gamma: model.gamma(),
            hilbert_dim: model.hilbert_dim(),
        }
    }

    /// Overrides the filter bandwidth `γ` (e.g. `0` freezes the signal).
    pub fn with_filter_rate(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// One step of length `dt`: draws `z ~ Normal(Tr Aρ, 1/(4λdt))`, applies
    /// `K(z) ρ K(z)†` with `K(z) ∝ exp(-λdt(z - A)²)`, then an Euler step of
    /// `𝓛(D)` at the pre-step signal, then `D += γ(z - D)dt`, and
    /// renormalizes. Returns `z`.
    pub fn step<R: Rng + ?Sized>(&self, rho: &mut CMatrix, d: &mut f64, dt: f64, rng: &mut R) -> Result<f64> {
        let r = self.hilbert_dim;
        let mut local = self.basis.adjoint() * &*rho * &self.basis;
        let mean: f64 = (0..r).map(|i| self.eigenvalues[i] * local[(i, i)].re).sum();
        let noise: f64 = rng.sample(StandardNormal);
        let z = mean + noise / (4.0 * self.lambda * dt).sqrt();

        let exponents: Vec<f64> = self.eigenvalues.iter().map(|a| self.lambda * dt * (z - a) * (z - a)).collect();
        let shift = exponents.iter().copied().fold(f64::INFINITY, f64::min);
        let k: Vec<f64> = exponents.iter().map(|e| (shift - e).exp()).collect();
        for i in 0..r {
            for j in 0..r {
                local[(i, j)] *= k[i] * k[j];
            }
        }
        let measured = &self.basis * local * self.basis.adjoint();

        let v = vectorize(&measured);
        let mut dv: CVector = &self.liouvillian * &v;
        for (f, gen) in &self.feedback {
            dv += gen * &v * Complex64::new(f.evaluate(*d), 0.0);
        }
        let stepped = v + dv * Complex64::new(dt, 0.0);
        let mut next = hermitian_part(&CMatrix::from_column_slice(r, r, stepped.as_slice()));
        let tr = next.trace().re;
        if !(tr.is_finite() && tr > 1e-300) {
            return Err(QfpmeError::NormCollapse { index: 0, time: 0.0 });
        }
        next /= Complex64::new(tr, 0.0);
        *rho = next;
        *d += self.gamma * (z - *d) * dt;
        Ok(z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    /// Step size; defaults to [`default_dt`].
    pub dt: Option<f64>,
    pub t_end: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub initial_state: CMatrix,
    /// `Stationary` draws `D(0) ~ Normal(0, σ)`; `Delta` starts at `D(0) = 0`.
    pub initial_detector: InitialDetector,
    /// Times (≤ `t_end`) at which the signal is recorded; `t_end` is always
    /// recorded last.
    pub sample_times: Vec<f64>,
}

impl TrajectoryConfig {
    pub fn new(initial_state: CMatrix, t_end: f64, n_traj: usize, seed: u64) -> Self {
        Self {
            dt: None,
            t_end,
            n_traj,
            seed,
            initial_state,
            initial_detector: InitialDetector::Stationary,
            sample_times: Vec::new(),
        }
    }

    fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(QfpmeError::InvalidParameter("t_end must be finite and non-negative".into()));
        }
        if self.n_traj == 0 {
            return Err(QfpmeError::EmptyEnsemble);
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(QfpmeError::InvalidParameter("dt must be > 0".into()));
            }
        }
        if self.sample_times.iter().any(|t| !(*t >= 0.0 && *t <= self.t_end)) {
            return Err(QfpmeError::InvalidParameter("sample times must lie in [0, t_end]".into()));
        }
        crate::operators::ensure_hermitian(&self.initial_state, 1e-10)?;
        if self.initial_state.nrows() != model.hilbert_dim() {
            return Err(QfpmeError::DimensionMismatch { expected: model.hilbert_dim(), actual: self.initial_state.nrows() });
        }
        if (self.initial_state.trace().re - 1.0).abs() > 1e-10 {
            return Err(QfpmeError::InvalidParameter("initial state must have unit trace".into()));
        }
        Ok(())
    }
}

/// Result of [`run_ensemble`].
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    /// Recording times; the last entry is `t_end`.
    pub times: Vec<f64>,
    /// `signals[k][i]`: signal of trajectory `i` at `times[k]`.
    pub signals: Vec<Vec<f64>>,
    pub final_states: Vec<CMatrix>,
    pub dt: f64,
    pub warnings: Vec<String>,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.final_states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.final_states.is_empty()
    }

    pub fn final_signals(&self) -> &[f64] {
        self.signals.last().expect("t_end recorded")
    }

    /// Signals at the recording time closest to `t`.
    pub fn signals_at(&self, t: f64) -> &[f64] {
        let k = (0..self.times.len())
            .min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))
            .expect("non-empty");
        &self.signals[k]
    }
}

/// Runs `n_traj` independent trajectories in parallel. Trajectory `i` uses
/// the ChaCha8 stream `i` of `seed`, so results do not depend on scheduling.
pub fn run_ensemble(config: &TrajectoryConfig, model: &ModelSpec) -> Result<TrajectoryEnsemble> {
    config.validate(model)?;
    let prop = Propagator::new(model);
    let requested = config.dt.unwrap_or_else(|| default_dt(model));
    let steps = (config.t_end / requested).ceil().max(1.0) as usize;
    let dt = if config.t_end > 0.0 { config.t_end / steps as f64 } else { requested };

    let mut warnings = Vec::new();
    if model.gamma() * dt > STEP_WARNING {
        warnings.push(format!("gamma*dt = {:.3e} exceeds {STEP_WARNING}", model.gamma() * dt));
    }
    let a_norm = model.measured_radius();
    if model.lambda() * a_norm * a_norm * dt > STEP_WARNING {
        warnings.push(format!("lambda*|A|^2*dt = {:.3e} exceeds {STEP_WARNING}", model.lambda() * a_norm * a_norm * dt));
    }

    let mut times: Vec<f64> = config.sample_times.clone();
    times.push(config.t_end);
    let marks: Vec<usize> = times.iter().map(|t| ((t / dt).round() as usize).min(steps)).collect();
    let total_steps = if config.t_end > 0.0 { steps } else { 0 };
    let sigma = model.sigma();

    let results: Vec<Result<(Vec<f64>, CMatrix)>> = (0..config.n_traj)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(index as u64);
            let mut rho = config.initial_state.clone();
            let mut d = match config.initial_detector {
                InitialDetector::Stationary => sigma.sqrt() * rng.sample::<f64, _>(StandardNormal),
                InitialDetector::Delta => 0.0,
            };
            let mut recorded = vec![0.0; marks.len()];
            for (slot, &m) in recorded.iter_mut().zip(&marks) {
                if m == 0 {
                    *slot = d;
                }
            }
            for n in 1..=total_steps {
                prop.step(&mut rho, &mut d, dt, &mut rng)
                    .map_err(|_| QfpmeError::NormCollapse { index, time: n as f64 * dt })?;
                for (slot, &m) in recorded.iter_mut().zip(&marks) {
                    if m == n {
                        *slot = d;
                    }
                }
            }
            Ok((recorded, rho))
        })
        .collect();

    let mut signals = vec![Vec::with_capacity(config.n_traj); times.len()];
    let mut final_states = Vec::with_capacity(config.n_traj);
    for res in results {
        let (recorded, rho) = res?;
        for (k, v) in recorded.into_iter().enumerate() {
            signals[k].push(v);
        }
        final_states.push(rho);
    }
    Ok(TrajectoryEnsemble { times, signals, final_states, dt, warnings })
}

/// Density histogram of `samples` on uniform bins spanning `[min, max]`;
/// samples outside the range are dropped.
pub fn histogram(samples: &[f64], min: f64, max: f64, bins: usize) -> Vec<f64> {
    let width = (max - min) / bins as f64;
    let mut counts = vec![0.0; bins];
    for &s in samples {
        if s >= min && s <= max {
            let b = (((s - min) / width) as usize).min(bins - 1);
            counts[b] += 1.0;
        }
    }
    let n = samples.len().max(1) as f64;
    counts.iter().map(|c| c / (n * width)).collect()
}

/// Discrepancy between an empirical sample and a reconstructed distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramComparison {
    /// `½ Σ_i |p̂_i - q_i|` over shared bins.
    pub total_variation: f64,
    /// `sup_x |F̂(x) - F(x)|`.
    pub ks: f64,
    /// Monte Carlo standard error of the total variation,
    /// `½ Σ_i √(q_i(1 - q_i)/n)`.
    pub standard_error: f64,
    pub bins: usize,
    pub samples: usize,
}

/// Default number of shared bins for [`compare_histogram`].
pub const DEFAULT_BINS: usize = 20;

/// Compares `samples` with `dist` on `bins` uniform bins over the grid of
/// `dist`. The two outer bins absorb everything beyond the grid.
pub fn compare_histogram(samples: &[f64], dist: &SignalDistribution, bins: usize) -> Result<HistogramComparison> {
    if samples.is_empty() {
        return Err(QfpmeError::EmptyEnsemble);
    }
    if bins == 0 || dist.grid.len() < 2 {
        return Err(QfpmeError::InvalidParameter("need at least one bin and two grid points".into()));
    }
    let cdf = Cdf::new(dist);
    let lo = dist.grid[0];
    let hi = *dist.grid.last().expect("non-empty");
    let width = (hi - lo) / bins as f64;
    let mut q = Vec::with_capacity(bins);
    for b in 0..bins {
        let left = if b == 0 { 0.0 } else { cdf.eval(lo + b as f64 * width) };
        let right = if b + 1 == bins { 1.0 } else { cdf.eval(lo + (b + 1) as f64 * width) };
        q.push((right - left).max(0.0));
    }
    let n = samples.len() as f64;
    let mut counts = vec![0.0; bins];
    for &s in samples {
        let b = ((s - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
        counts[b] += 1.0;
    }
    let total_variation = 0.5 * counts.iter().zip(&q).map(|(c, qi)| (c / n - qi).abs()).sum::<f64>();
    let standard_error = 0.5 * q.iter().map(|qi| (qi * (1.0 - qi) / n).sqrt()).sum::<f64>();

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ks = 0.0f64;
    for (i, &s) in sorted.iter().enumerate() {
        let f = cdf.eval(s);
        ks = ks.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    Ok(HistogramComparison {
        total_variation: total_variation.min(1.0),
        ks: ks.min(1.0),
        standard_error,
        bins,
        samples: samples.len(),
    })
}

/// Piecewise-linear CDF from trapezoid integration of a density.
struct Cdf<'a> {
    grid: &'a [f64],
    cumulative: Vec<f64>,
}

impl<'a> Cdf<'a> {
    fn new(dist: &'a SignalDistribution) -> Self {
        let mut cumulative = vec![0.0];
        for i in 1..dist.grid.len() {
            let step = 0.5 * (dist.grid[i] - dist.grid[i - 1]) * (dist.density[i] + dist.density[i - 1]);
            cumulative.push(cumulative[i - 1] + step);
        }
        let total = *cumulative.last().expect("non-empty");
        if total > 0.0 {
            cumulative.iter_mut().for_each(|c| *c /= total);
        }
        Self { grid: &dist.grid, cumulative }
    }

    fn eval(&self, x: f64) -> f64 {
        let g = self.grid;
        if x <= g[0] {
            return 0.0;
        }
        if x >= g[g.len() - 1] {
            return 1.0;
        }
        let i = g.partition_point(|&v| v <= x) - 1;
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        self.cumulative[i] + t * (self.cumulative[i + 1] - self.cumulative[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::BasisParams;
    use crate::models::driven_qubit;
    use crate::operators::{basis_projector, identity, maximally_mixed, sigma_z};
    use crate::qfpme::HermiteState;
    use crate::statistics::{reconstruct_distribution, ReconstructionOptions};

    #[test]
    fn measurement_record_has_white_noise_variance() {
        let model = driven_qubit(0.0, 0.7, 1.0).unwrap();
        let prop = Propagator::new(&model);
        let dt = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, mut sum, mut sq) = (100_000, 0.0, 0.0);
        for _ in 0..n {
            let mut rho = maximally_mixed(2);
            let mut d = 0.0;
            let z = prop.step(&mut rho, &mut d, dt, &mut rng).unwrap();
            sum += z;
            sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        let expected = 1.0 / (4.0 * 0.7 * dt);
        assert!((var / expected - 1.0).abs() < 0.02, "{var} vs {expected}");
    }

    #[test]
    fn zero_bandwidth_freezes_the_signal() {
        let model = driven_qubit(1.0, 0.5, 2.0).unwrap();
        let prop = Propagator::new(&model).with_filter_rate(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rho = basis_projector(2, 0);
        let mut d = 0.37;
        for _ in 0..100 {
            prop.step(&mut rho, &mut d, 1e-3, &mut rng).unwrap();
        }
        assert_eq!(d, 0.37);
    }

    #[test]
    fn identity_measurement_leaves_state_alone() {
        let l0 = crate::SuperOperator::zeros(2);
        let model = ModelSpec::new(l0, identity(2), 1.0, 1.0).unwrap();
        let prop = Propagator::new(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho0 = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(0.6, 0.0), Complex64::new(0.1, 0.2), Complex64::new(0.1, -0.2), Complex64::new(0.4, 0.0)],
        );
        let mut rho = rho0.clone();
        let mut d = 0.0;
        for _ in 0..50 {
            prop.step(&mut rho, &mut d, 1e-2, &mut rng).unwrap();
        }
        assert!((rho - rho0).norm() < 1e-12);
    }

    #[test]
    fn ensembles_are_reproducible() {
        let model = driven_qubit(1.0, 0.5, 2.0).unwrap();
        let mut cfg = TrajectoryConfig::new(basis_projector(2, 0), 0.5, 16, 42);
        cfg.dt = Some(1e-3);
        cfg.sample_times = vec![0.0, 0.25];
        let a = run_ensemble(&cfg, &model).unwrap();
        let b = run_ensemble(&cfg, &model).unwrap();
        assert_eq!(a.signals, b.signals);
        assert_eq!(a.times, vec![0.0, 0.25, 0.5]);
        cfg.seed = 43;
        assert_ne!(run_ensemble(&cfg, &model).unwrap().signals, a.signals);
    }

    #[test]
    fn step_is_adjusted_to_the_horizon() {
        let model = driven_qubit(1.0, 0.5, 2.0).unwrap();
        let mut cfg = TrajectoryConfig::new(basis_projector(2, 0), 1.0, 1, 1);
        cfg.dt = Some(0.3);
        let ens = run_ensemble(&cfg, &model).unwrap();
        assert!((ens.dt - 0.25).abs() < 1e-15);
        assert!(!ens.warnings.is_empty());
    }

    fn gaussian(sigma: f64) -> SignalDistribution {
        let s = HermiteState::initial(
            &maximally_mixed(2),
            BasisParams::new(sigma, 2).unwrap(),
            InitialDetector::Stationary,
        );
        reconstruct_distribution(&s, &ReconstructionOptions::default()).unwrap()
    }

    #[test]
    fn disjoint_samples_have_unit_distance() {
        let cmp = compare_histogram(&vec![1e3; 500], &gaussian(0.5), DEFAULT_BINS).unwrap();
        assert!(cmp.total_variation > 0.99 && cmp.ks > 0.99);
    }

    #[test]
    fn samples_from_the_distribution_are_close() {
        let sigma: f64 = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<f64> = (0..20_000).map(|_| sigma.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
        let cmp = compare_histogram(&samples, &gaussian(sigma), DEFAULT_BINS).unwrap();
        assert!(cmp.total_variation < 3.0 * cmp.standard_error, "{cmp:?}");
        assert!(cmp.ks < 0.015);
    }

    #[test]
    fn empty_samples_are_rejected() {
        assert!(matches!(compare_histogram(&[], &gaussian(0.5), 20), Err(QfpmeError::EmptyEnsemble)));
    }

    #[test]
    fn histogram_integrates_to_in_range_fraction() {
        let h = histogram(&[0.1, 0.2, 0.9, 5.0], 0.0, 1.0, 4);
        let mass: f64 = h.iter().map(|x| x * 0.25).sum();
        assert!((mass - 0.75).abs() < 1e-15);
    }

    #[test]
    fn invalid_configuration_is_rejected() {
        let model = driven_qubit(1.0, 0.5, 2.0).unwrap();
        let cfg = TrajectoryConfig::new(sigma_z(), 1.0, 4, 0);
        assert!(run_ensemble(&cfg, &model).is_err());
    }
}
