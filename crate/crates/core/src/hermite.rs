//! Generalized Hermite basis in the signal variable `D`.
//!
//! The joint state is `ρ(D) = Σ_n M_n p_n(D) w(D)` with the Gaussian weight
//! `w(D) = exp(-D²/2σ)/sqrt(2πσ)` and the orthonormal polynomials
//! `p_n(D) = 𝓗_n(D)/sqrt(σⁿ n!)`, `∫ p_n p_m w dD = δ_nm`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{QfpmeError, Result};

/// Basis scale `σ = γ/8λ` and the number of retained coefficient matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisParams {
    pub sigma: f64,
    pub n: usize,
}

impl BasisParams {
    pub fn new(sigma: f64, n: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(QfpmeError::InvalidParameter(format!(
                "sigma must be > 0, got {sigma}"
            )));
        }
        if n == 0 {
            return Err(QfpmeError::InvalidParameter(
                "truncation order must be >= 1".into(),
            ));
        }
        Ok(Self { sigma, n })
    }

    pub fn from_rates(gamma: f64, lambda: f64, n: usize) -> Result<Self> {
        Self::new(gamma / (8.0 * lambda), n)
    }

    pub fn with_order(self, n: usize) -> Self {
        Self { n, ..self }
    }

    /// Half-width of the signal window used for basis quadratures; wide
    /// enough to contain the oscillatory region of every retained order.
    pub fn quadrature_half_width(&self) -> f64 {
        self.sigma.sqrt() * (10.0 + 2.0 * (self.n as f64).sqrt())
    }
}

/// `w(D)`, the stationary detector-noise density.
pub fn gaussian_weight(d: f64, sigma: f64) -> f64 {
    (-d * d / (2.0 * sigma)).exp() / (2.0 * PI * sigma).sqrt()
}

/// `p_k(D) sqrt(w(D))` for `k < count`, by the normalized three-term recurrence
/// `q_{k+1} = D q_k / sqrt(σ(k+1)) - sqrt(k/(k+1)) q_{k-1}`.
///
/// These stay bounded for large `k` and `D`, unlike `p_k` itself.
pub fn half_weighted_polynomials(count: usize, d: f64, sigma: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    let q0 = (-d * d / (4.0 * sigma)).exp() / (2.0 * PI * sigma).powf(0.25);
    out.push(q0);
    if count > 1 {
        out.push(d / sigma.sqrt() * q0);
    }
    for k in 1..count.saturating_sub(1) {
        let kf = k as f64;
        let next = d / (sigma * (kf + 1.0)).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// `p_k(D)` for `k < count` (no weight). Grows like `D^k`; prefer
/// [`half_weighted_polynomials`] away from the origin.
pub fn normalized_polynomials(count: usize, d: f64, sigma: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(1.0);
    if count > 1 {
        out.push(d / sigma.sqrt());
    }
    for k in 1..count.saturating_sub(1) {
        let kf = k as f64;
        let next = d / (sigma * (kf + 1.0)).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// The weighted basis functions `p_k(D) w(D)` for `k < params.n`.
pub fn basis_values(d: f64, params: &BasisParams) -> Vec<f64> {
    let root_w = (-d * d / (4.0 * params.sigma)).exp() / (2.0 * PI * params.sigma).powf(0.25);
    half_weighted_polynomials(params.n, d, params.sigma)
        .into_iter()
        .map(|q| q * root_w)
        .collect()
}

/// `p_n(D) w(D)` for a single order.
pub fn basis_function(n: usize, d: f64, params: &BasisParams) -> f64 {
    let root_w = (-d * d / (4.0 * params.sigma)).exp() / (2.0 * PI * params.sigma).powf(0.25);
    half_weighted_polynomials(n + 1, d, params.sigma)[n] * root_w
}

/// Unnormalized generalized Hermite polynomial
/// `𝓗_n(x) = (σ/2)^{n/2} H_n(x/sqrt(2σ))`, evaluated through the physicists'
/// recurrence `H_{k+1}(y) = 2y H_k - 2k H_{k-1}`.
pub fn generalized_hermite(n: usize, x: f64, sigma: f64) -> f64 {
    let y = x / (2.0 * sigma).sqrt();
    let (mut prev, mut cur) = (1.0, 2.0 * y);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let next = 2.0 * y * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    (sigma / 2.0).powf(n as f64 / 2.0) * cur
}

/// Moment integrals `J_n(q) = ∫ D^q p_n(D) w(D) dD`, zero for `n > q`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    sigma: f64,
    /// `values[q][n]` for `n <= q + 1`.
    values: Vec<Vec<f64>>,
}

impl MomentTable {
    pub fn q_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn get(&self, n: usize, q: usize) -> f64 {
        self.values
            .get(q)
            .and_then(|row| row.get(n))
            .copied()
            .unwrap_or(0.0)
    }
}

pub fn j_moment_table(q_max: usize, params: &BasisParams) -> MomentTable {
    let sigma = params.sigma;
    let width = q_max + 2;
    let mut values = vec![vec![0.0; width]; q_max + 1];
    values[0][0] = 1.0;
    for q in 1..=q_max {
        for n in 0..=q {
            let up = values[q - 1].get(n + 1).copied().unwrap_or(0.0);
            let down = if n > 0 { values[q - 1][n - 1] } else { 0.0 };
            values[q][n] =
                (sigma * (n as f64 + 1.0)).sqrt() * up + (n as f64 * sigma).sqrt() * down;
        }
    }
    MomentTable { sigma, values }
}

/// Natural cubic spline through `(grid, values)`, constant beyond the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedFunction {
    grid: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl TabulatedFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(QfpmeError::DimensionMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if grid.len() < 2 {
            return Err(QfpmeError::InvalidParameter(
                "tabulated function needs at least two samples".into(),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0]))
            || grid.iter().chain(&values).any(|x| !x.is_finite())
        {
            return Err(QfpmeError::InvalidParameter(
                "tabulated grid must be finite and strictly increasing".into(),
            ));
        }
        let n = grid.len();
        let mut second = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let s = (grid[i] - grid[i - 1]) / (grid[i + 1] - grid[i - 1]);
            let p = s * second[i - 1] + 2.0;
            second[i] = (s - 1.0) / p;
            let slope = (values[i + 1] - values[i]) / (grid[i + 1] - grid[i])
                - (values[i] - values[i - 1]) / (grid[i] - grid[i - 1]);
            u[i] = (6.0 * slope / (grid[i + 1] - grid[i - 1]) - s * u[i - 1]) / p;
        }
        second[n - 1] = 0.0;
        for k in (0..n - 1).rev() {
            second[k] = second[k] * second[k + 1] + u[k];
        }
        Ok(Self {
            grid,
            values,
            second,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return self.values[0];
        }
        if x >= self.grid[n - 1] {
            return self.values[n - 1];
        }
        let hi = self.grid.partition_point(|&g| g <= x).min(n - 1);
        let lo = hi - 1;
        let h = self.grid[hi] - self.grid[lo];
        let a = (self.grid[hi] - x) / h;
        let b = (x - self.grid[lo]) / h;
        a * self.values[lo]
            + b * self.values[hi]
            + ((a * a * a - a) * self.second[lo] + (b * b * b - b) * self.second[hi]) * h * h / 6.0
    }
}

/// A feedback function `f_p(D)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackFunctionSpec {
    /// `Σ_k c_k D^k`.
    Polynomial(Vec<f64>),
    /// `θ(D)`, with `θ(0) = 1/2`.
    Heaviside,
    Tabulated(TabulatedFunction),
}

impl FeedbackFunctionSpec {
    pub fn linear() -> Self {
        Self::Polynomial(vec![0.0, 1.0])
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Polynomial(c) = self {
            if c.iter().any(|x| !x.is_finite()) {
                return Err(QfpmeError::InvalidParameter(
                    "polynomial coefficients must be finite".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, d: f64) -> f64 {
        match self {
            Self::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ck| acc * d + ck),
            Self::Heaviside => {
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
            Self::Tabulated(t) => t.evaluate(d),
        }
    }
}

/// `α_{n,m} = ∫ p_n p_m w f dD` for one feedback function; symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatrix {
    entries: DMatrix<f64>,
}

impl AlphaMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(QfpmeError::DimensionMismatch {
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        Ok(Self { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.entries[(n, m)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn max_abs_diff(&self, other: &AlphaMatrix) -> f64 {
        (&self.entries - &other.entries).amax()
    }
}

pub fn alpha_matrix(f: &FeedbackFunctionSpec, params: &BasisParams) -> Result<AlphaMatrix> {
    f.validate()?;
    match f {
        FeedbackFunctionSpec::Polynomial(c) => Ok(polynomial_alpha(c, params)),
        FeedbackFunctionSpec::Heaviside => Ok(heaviside_alpha(params.n)),
        FeedbackFunctionSpec::Tabulated(t) => {
            let w = params.quadrature_half_width();
            let knots: Vec<f64> = t
                .grid()
                .iter()
                .copied()
                .filter(|&g| g > -w && g < w)
                .collect();
            project_function(|d| t.evaluate(d), &knots, params)
        }
    }
}

/// Jacobi matrix of multiplication by `D` raised to each power present in the
/// polynomial: `α^{(k)}_{n,m} = sqrt(σ(m+1)) α^{(k-1)}_{n,m+1} + sqrt(σm) α^{(k-1)}_{n,m-1}`.
fn polynomial_alpha(coefficients: &[f64], params: &BasisParams) -> AlphaMatrix {
    let n = params.n;
    let degree = coefficients.len().saturating_sub(1);
    let size = n + degree;
    let mut jacobi = DMatrix::<f64>::zeros(size, size);
    for m in 0..size.saturating_sub(1) {
        let v = (params.sigma * (m as f64 + 1.0)).sqrt();
        jacobi[(m, m + 1)] = v;
        jacobi[(m + 1, m)] = v;
    }
    let mut power = DMatrix::<f64>::identity(size, size);
    let mut total = DMatrix::<f64>::zeros(n, n);
    for (k, &ck) in coefficients.iter().enumerate() {
        if k > 0 {
            power = &power * &jacobi;
        }
        if ck != 0.0 {
            total += power.view((0, 0), (n, n)).scale(ck);
        }
    }
    AlphaMatrix { entries: total }
}

fn ln_double_factorial(k: i64) -> f64 {
    // (-1)!! = 0!! = 1
    let mut acc = 0.0;
    let mut j = k;
    while j > 1 {
        acc += (j as f64).ln();
        j -= 2;
    }
    acc
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|j| (j as f64).ln()).sum()
}

/// Closed form for `f = θ(D)`. The off-diagonal expression holds with `n`
/// even and `m` odd; the other ordering follows by symmetry.
pub fn heaviside_entry(n: usize, m: usize) -> f64 {
    if n == m {
        return 0.5;
    }
    if (n + m).is_multiple_of(2) {
        return 0.0;
    }
    let (n, m) = if n.is_multiple_of(2) { (n, m) } else { (m, n) };
    let sign = if ((n + m - 1) / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    let ln_mag = ln_double_factorial(m as i64) + ln_double_factorial(n as i64 - 1)
        - 0.5 * ((2.0 * PI).ln() + ln_factorial(n) + ln_factorial(m));
    sign * ln_mag.exp() / (m as f64 - n as f64)
}

fn heaviside_alpha(n: usize) -> AlphaMatrix {
    AlphaMatrix {
        entries: DMatrix::from_fn(n, n, heaviside_entry),
    }
}

const GAUSS_ORDER: usize = 16;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// `∫ p_n p_m w f dD` by composite Gauss-Legendre quadrature over
/// `±`[`BasisParams::quadrature_half_width`], splitting at `breakpoints`
/// (discontinuities or kinks of `f`) and doubling the panel count until
/// successive tables agree to `1e-12`.
pub fn project_function(
    f: impl Fn(f64) -> f64,
    breakpoints: &[f64],
    params: &BasisParams,
) -> Result<AlphaMatrix> {
    let w = params.quadrature_half_width();
    let mut edges = vec![-w];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > -w && b < w)
        .collect();
    inner.sort_by(|a, b| a.total_cmp(b));
    inner.dedup();
    edges.extend(inner);
    edges.push(w);

    let (nodes, weights) = gauss_legendre(GAUSS_ORDER);
    let n = params.n;
    let integrate = |panels: usize| -> DMatrix<f64> {
        let mut acc = DMatrix::<f64>::zeros(n, n);
        for seg in edges.windows(2) {
            let h = (seg[1] - seg[0]) / panels as f64;
            for p in 0..panels {
                let a = seg[0] + p as f64 * h;
                for (x, wt) in nodes.iter().zip(&weights) {
                    let d = a + 0.5 * h * (x + 1.0);
                    let g = 0.5 * h * wt * f(d);
                    if g == 0.0 {
                        continue;
                    }
                    let q = half_weighted_polynomials(n, d, params.sigma);
                    for i in 0..n {
                        let gi = g * q[i];
                        for j in i..n {
                            acc[(i, j)] += gi * q[j];
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                acc[(i, j)] = acc[(j, i)];
            }
        }
        acc
    };

    let mut panels = if edges.len() > 8 { 1 } else { 4 };
    let mut prev = integrate(panels);
    let mut change = f64::INFINITY;
    for _ in 0..12 {
        panels *= 2;
        let next = integrate(panels);
        change = (&next - &prev).amax();
        prev = next;
        if change < 1e-12 {
            return Ok(AlphaMatrix { entries: prev });
        }
    }
    Err(QfpmeError::QuadratureNonConvergence { residual: change })
}
