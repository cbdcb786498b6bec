//! Fractional integral `I^μ` and Hilfer derivative `D^{μ,ν}`: closed forms on
//! power functions and product integration on sampled functions.
//!
//! Sampled functions carry a weight exponent `w`: the stored samples are
//! `y(s) = (s - lower)^{1-w} f(s)`, so `w = 1` means plain samples and the
//! singular factor `(s - lower)^{w-1}` is integrated exactly by the rules.

use std::sync::Arc;

use thiserror::Error;

use crate::quad::GaussRule;
use crate::special::{gamma, rgamma, SpecialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("grid has {found} points, at least {needed} required")]
    InsufficientGrid { needed: usize, found: usize },
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Hilfer order (μ, ν) with λ = μ + ν - μν.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HilferOrder {
    mu: f64,
    nu: f64,
    lam: f64,
}

impl HilferOrder {
    pub fn new(mu: f64, nu: f64) -> Result<Self, FracError> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(FracError::Domain(format!("mu must lie in (0, 1), got {mu}")));
        }
        if !(0.0..=1.0).contains(&nu) {
            return Err(FracError::Domain(format!("nu must lie in [0, 1], got {nu}")));
        }
        // endpoints exact so that ν = 1 gives λ = 1 and ν = 0 gives λ = μ
        let lam = if nu == 1.0 {
            1.0
        } else if nu == 0.0 {
            mu
        } else {
            mu + nu - mu * nu
        };
        Ok(HilferOrder { mu, nu, lam })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lam(&self) -> f64 {
        self.lam
    }

    /// Order of the inner integral, (1 - ν)(1 - μ) = 1 - λ.
    pub fn inner(&self) -> f64 {
        (1.0 - self.nu) * (1.0 - self.mu)
    }

    /// Order of the outer integral, ν(1 - μ).
    pub fn outer(&self) -> f64 {
        self.nu * (1.0 - self.mu)
    }
}

/// Samples of `f` on a grid starting at the operator's lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFn {
    lower: f64,
    grid: Vec<f64>,
    values: Vec<f64>,
    weight: f64,
}

impl SampledFn {
    /// `values` are the weighted samples `(s - lower)^{1-weight} f(s)`;
    /// `values[0]` is their limit at `lower`.
    pub fn new(grid: Vec<f64>, values: Vec<f64>, weight: f64) -> Result<Self, FracError> {
        if grid.len() < 2 {
            return Err(FracError::InsufficientGrid {
                needed: 2,
                found: grid.len(),
            });
        }
        if grid.len() != values.len() {
            return Err(FracError::Grid(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        if grid.windows(2).any(|w| w[1] <= w[0] || !w[1].is_finite()) || !grid[0].is_finite() {
            return Err(FracError::Grid("grid must be finite and strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(FracError::Grid(format!("non-finite sample {v}")));
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(FracError::Domain(format!("weight must lie in (0, 1], got {weight}")));
        }
        Ok(SampledFn {
            lower: grid[0],
            grid,
            values,
            weight,
        })
    }

    /// Samples a plain function (weight 1).
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self, FracError> {
        let values = grid.iter().map(|&s| f(s)).collect();
        Self::new(grid, values, 1.0)
    }

    /// Samples a weighted representation `y(s)` directly.
    pub fn from_weighted(grid: Vec<f64>, weight: f64, y: impl Fn(f64) -> f64) -> Result<Self, FracError> {
        let values = grid.iter().map(|&s| y(s)).collect();
        Self::new(grid, values, weight)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn upper(&self) -> f64 {
        *self.grid.last().expect("at least two points")
    }

    /// Weighted value at `t` by linear interpolation.
    pub fn weighted_at(&self, t: f64) -> Result<f64, FracError> {
        self.check_range(t)?;
        let j = cell_index(&self.grid, t);
        if j + 1 == self.grid.len() {
            return Ok(self.values[j]);
        }
        let (a, b) = (self.grid[j], self.grid[j + 1]);
        let r = (t - a) / (b - a);
        Ok(self.values[j] * (1.0 - r) + self.values[j + 1] * r)
    }

    /// `f(t)` for `t > lower` (or `t = lower` when the weight is 1).
    pub fn value_at(&self, t: f64) -> Result<f64, FracError> {
        let y = self.weighted_at(t)?;
        if self.weight == 1.0 {
            return Ok(y);
        }
        if t == self.lower {
            return Err(FracError::Domain(
                "weighted function is singular at its lower bound".into(),
            ));
        }
        Ok((t - self.lower).powf(self.weight - 1.0) * y)
    }

    fn check_range(&self, t: f64) -> Result<(), FracError> {
        if !(t >= self.lower && t <= self.upper()) {
            return Err(FracError::Grid(format!(
                "t = {t} outside sampled range [{}, {}]",
                self.lower,
                self.upper()
            )));
        }
        Ok(())
    }
}

/// Index j with grid[j] <= t < grid[j+1] (last index when t is the end).
fn cell_index(grid: &[f64], t: f64) -> usize {
    match grid.binary_search_by(|s| s.total_cmp(&t)) {
        Ok(j) => j,
        Err(j) => j - 1,
    }
}

/// `lower + (upper - lower) (j/n)^exponent` for j = 0..=n.
pub fn graded_grid(lower: f64, upper: f64, n: usize, exponent: f64) -> Vec<f64> {
    let len = upper - lower;
    let mut g: Vec<f64> = (0..=n)
        .map(|j| lower + len * (j as f64 / n as f64).powf(exponent))
        .collect();
    g[n] = upper;
    g
}

/// `I^μ (t - t0)^{δ-1} = Γ(δ)/Γ(δ+μ) (t - t0)^{δ+μ-1}`.
pub fn frac_integral_power(mu: f64, delta: f64, t: f64, t0: f64) -> Result<f64, FracError> {
    if !(mu > 0.0) {
        return Err(FracError::Domain(format!("order must be positive, got {mu}")));
    }
    if !(delta > 0.0) {
        return Err(FracError::Domain(format!("delta must be positive, got {delta}")));
    }
    if !(t > t0) {
        return Err(FracError::Domain(format!("need t > t0, got t={t}, t0={t0}")));
    }
    Ok(gamma(delta)? * rgamma(delta + mu) * (t - t0).powf(delta + mu - 1.0))
}

/// `D^{μ,ν} (t - t0)^{δ-1} = Γ(δ)/Γ(δ-μ) (t - t0)^{δ-μ-1}` for δ > λ, and 0 at δ = λ.
///
/// For δ < λ the power is not in the weighted space and the inner derivative
/// is not integrable, so that case is a domain error.
pub fn hilfer_deriv_power(order: HilferOrder, delta: f64, t: f64, t0: f64) -> Result<f64, FracError> {
    if !(t > t0) {
        return Err(FracError::Domain(format!("need t > t0, got t={t}, t0={t0}")));
    }
    if !(delta > 0.0) {
        return Err(FracError::Domain(format!("delta must be positive, got {delta}")));
    }
    let lam = order.lam;
    if (delta - lam).abs() <= 1e-12 {
        return Ok(0.0);
    }
    if delta < lam {
        return Err(FracError::Domain(format!(
            "(t - t0)^{{delta-1}} with delta={delta} < lambda={lam} is outside the weighted space"
        )));
    }
    Ok(gamma(delta)? * rgamma(delta - order.mu) * (t - t0).powf(delta - order.mu - 1.0))
}

const GAUSS_POINTS: usize = 20;

/// Product-integration weights for `I^μ` of functions with a fixed weight.
///
/// The weighted samples are interpolated piecewise linearly and each cell is
/// integrated against `(t - s)^{μ-1} (s - lower)^{w-1}` with Gauss–Jacobi
/// rules matched to whichever factor is singular at the cell's ends. Cells
/// that are short compared with their distance to a singularity use a
/// difference of two matched rules so the near-singular factor is never
/// handed to Gauss–Legendre.
#[derive(Debug, Clone)]
pub struct ProductRule {
    mu: f64,
    weight: f64,
    rgamma_mu: f64,
    legendre: Arc<GaussRule>,
    right: Arc<GaussRule>,
    left: Arc<GaussRule>,
    both: Arc<GaussRule>,
}

impl ProductRule {
    pub fn new(mu: f64, weight: f64) -> Result<Self, FracError> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(FracError::Domain(format!("order must lie in (0, 1], got {mu}")));
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(FracError::Domain(format!("weight must lie in (0, 1], got {weight}")));
        }
        Ok(ProductRule {
            mu,
            weight,
            rgamma_mu: rgamma(mu),
            legendre: GaussRule::jacobi_shared(GAUSS_POINTS, 0.0, 0.0),
            right: GaussRule::jacobi_shared(GAUSS_POINTS, mu - 1.0, 0.0),
            left: GaussRule::jacobi_shared(GAUSS_POINTS, 0.0, weight - 1.0),
            both: GaussRule::jacobi_shared(GAUSS_POINTS, mu - 1.0, weight - 1.0),
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Weights `W_j` with `I^μ f(t) ≈ Σ_j W_j y_j` over `grid[..=m]`, where
    /// `grid[m]` is the first node at or beyond `t`.
    pub fn weights(&self, grid: &[f64], t: f64) -> Result<Vec<f64>, FracError> {
        let lower = grid[0];
        let upper = *grid.last().ok_or(FracError::InsufficientGrid { needed: 2, found: 0 })?;
        if !(t > lower && t <= upper) {
            return Err(FracError::Grid(format!("t = {t} outside ({lower}, {upper}]")));
        }
        let last = cell_index(grid, t);
        let m = if grid[last] == t { last } else { last + 1 };
        let mut w = vec![0.0; m + 1];
        for j in 0..m {
            let a = grid[j];
            let b_full = grid[j + 1];
            let b = b_full.min(t);
            let (m0, m1) = self.moments(lower, t, a, b, 0)?;
            // y = y_j (b_full - s)/H + y_{j+1} (s - a)/H on [a, b]
            let h = b_full - a;
            w[j] += m0 - m1 / h;
            w[j + 1] += m1 / h;
        }
        for v in &mut w {
            *v *= self.rgamma_mu;
        }
        Ok(w)
    }

    /// As [`ProductRule::weights`], but the weighted samples are interpolated
    /// linearly in `u = (s - lower)^{1-w}` rather than in `s`. That basis is
    /// exact for `f = a (s - lower)^{w-1} + b`, so a function that stays
    /// regular at the lower bound costs no accuracy.
    pub fn weights_power_basis(&self, grid: &[f64], t: f64) -> Result<Vec<f64>, FracError> {
        if self.weight == 1.0 {
            return self.weights(grid, t);
        }
        let lower = grid[0];
        if !(t > lower && t <= *grid.last().unwrap_or(&lower)) {
            return self.weights(grid, t);
        }
        let last = cell_index(grid, t);
        let m = if grid[last] == t { last } else { last + 1 };
        let u = |s: f64| (s - lower).powf(1.0 - self.weight);
        let plain = |a: f64, b: f64| ((t - a).powf(self.mu) - (t - b).powf(self.mu)) / self.mu;
        let mut w = vec![0.0; m + 1];
        for j in 0..m {
            let a = grid[j];
            let b_full = grid[j + 1];
            let b = b_full.min(t);
            let (m0, _) = self.moments(lower, t, a, b, 0)?;
            let (ua, ub) = (u(a), u(b_full));
            // ∫ K (s-l)^{w-1} (u - u_a) = ∫ (t-s)^{μ-1} - u_a m0
            let lin = (plain(a, b) - ua * m0) / (ub - ua);
            w[j] += m0 - lin;
            w[j + 1] += lin;
        }
        for v in &mut w {
            *v *= self.rgamma_mu;
        }
        Ok(w)
    }

    /// `(∫_a^b K, ∫_a^b K (s - a))` with `K = (t - s)^{μ-1} (s - lower)^{w-1}`.
    fn moments(&self, lower: f64, t: f64, a: f64, b: f64, depth: u32) -> Result<(f64, f64), FracError> {
        let mu1 = self.mu - 1.0;
        let w1 = self.weight - 1.0;
        let sing_left = w1 != 0.0;
        let sing_right = mu1 != 0.0;
        let len = b - a;
        let kernel_right = |s: f64| (t - s).powf(mu1);
        let kernel_left = |s: f64| if sing_left { (s - lower).powf(w1) } else { 1.0 };
        let pair = |rule: &GaussRule, lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| {
            (rule.integrate(lo, hi, f), rule.integrate(lo, hi, |s| f(s) * (s - a)))
        };
        let near_left = sing_left && a - lower < len;
        let near_right = sing_right && t - b < len;
        let left_end = sing_left && a == lower;
        let right_end = sing_right && b == t;
        let out = match (left_end, right_end) {
            (true, true) => pair(&self.both, a, b, &|_| 1.0),
            (true, false) if near_right => return self.split(lower, t, a, b, depth),
            (true, false) => pair(&self.left, a, b, &kernel_right),
            (false, true) if near_left => return self.split(lower, t, a, b, depth),
            (false, true) => pair(&self.right, a, b, &kernel_left),
            (false, false) if near_left && near_right => return self.split(lower, t, a, b, depth),
            (false, false) if near_left => {
                let whole = pair(&self.left, lower, b, &kernel_right);
                let head = pair(&self.left, lower, a, &kernel_right);
                (whole.0 - head.0, whole.1 - head.1)
            }
            (false, false) if near_right => {
                let whole = pair(&self.right, a, t, &kernel_left);
                let tail = pair(&self.right, b, t, &kernel_left);
                (whole.0 - tail.0, whole.1 - tail.1)
            }
            (false, false) => pair(&self.legendre, a, b, &|s| kernel_right(s) * kernel_left(s)),
        };
        Ok(out)
    }

    fn split(&self, lower: f64, t: f64, a: f64, b: f64, depth: u32) -> Result<(f64, f64), FracError> {
        if depth >= 60 {
            return Err(FracError::Grid(format!(
                "cannot resolve cell [{a}, {b}] against t = {t}"
            )));
        }
        let mid = 0.5 * (a + b);
        let (l0, l1) = self.moments(lower, t, a, mid, depth + 1)?;
        let (r0, r1) = self.moments(lower, t, mid, b, depth + 1)?;
        // right half's first moment is about mid; shift it back to a
        Ok((l0 + r0, l1 + r1 + (mid - a) * r0))
    }
}

/// `I^μ f(t)` by product integration.
pub fn frac_integral_quad(mu: f64, f: &SampledFn, t: f64) -> Result<f64, FracError> {
    if t == f.lower {
        return Err(FracError::Grid(format!("t = {t} equals the lower bound")));
    }
    f.check_range(t)?;
    if f.values.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let rule = ProductRule::new(mu, f.weight)?;
    let w = rule.weights(&f.grid, t)?;
    Ok(dot(&w, &f.values))
}

fn dot(w: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Limit of `(s - lower)^{1-w'} I^β f(s)` at the lower bound, where the
/// result weight is `w' = min(w + β, 1)`.
fn integral_limit(f: &SampledFn, beta: f64) -> Result<f64, FracError> {
    let w = f.weight;
    if w + beta <= 1.0 + 1e-12 {
        Ok(f.values[0] * gamma(w)? * rgamma(w + beta))
    } else {
        Ok(0.0)
    }
}

/// `I^β f` at every grid node, as a sampled function of weight `min(w + β, 1)`.
pub fn frac_integral_nodes(beta: f64, f: &SampledFn) -> Result<SampledFn, FracError> {
    if beta == 0.0 {
        return Ok(f.clone());
    }
    let new_weight = (f.weight + beta).min(1.0);
    let rule = ProductRule::new(beta, f.weight)?;
    let mut values = Vec::with_capacity(f.grid.len());
    values.push(integral_limit(f, beta)?);
    for &s in &f.grid[1..] {
        let w = rule.weights(&f.grid, s)?;
        let v = dot(&w, &f.values);
        values.push((s - f.lower).powf(1.0 - new_weight) * v);
    }
    SampledFn::new(f.grid.clone(), values, new_weight)
}

const MIN_DERIV_POINTS: usize = 5;

fn check_deriv_input(order: HilferOrder, f: &SampledFn) -> Result<(), FracError> {
    if f.grid.len() < MIN_DERIV_POINTS {
        return Err(FracError::InsufficientGrid {
            needed: MIN_DERIV_POINTS,
            found: f.grid.len(),
        });
    }
    if f.weight < order.lam - 1e-12 {
        return Err(FracError::Domain(format!(
            "function weight {} is below lambda = {}; D^(mu,nu) needs f in the weighted space",
            f.weight, order.lam
        )));
    }
    Ok(())
}

/// Three-point derivative at node j (forward at the start, central inside,
/// backward at the end).
fn fd_derivative(grid: &[f64], u: &[f64], j: usize) -> f64 {
    let n = grid.len() - 1;
    if j == 0 {
        let (x0, x1, x2) = (grid[0], grid[1], grid[2]);
        let (h1, h2) = (x1 - x0, x2 - x1);
        -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * u[0] + (h1 + h2) / (h1 * h2) * u[1] - h1 / (h2 * (h1 + h2)) * u[2]
    } else if j < n {
        let (x0, x1, x2) = (grid[j - 1], grid[j], grid[j + 1]);
        let (h1, h2) = (x1 - x0, x2 - x1);
        -h2 / (h1 * (h1 + h2)) * u[j - 1] + (h2 - h1) / (h1 * h2) * u[j] + h1 / (h2 * (h1 + h2)) * u[j + 1]
    } else {
        let (x0, x1, x2) = (grid[j - 2], grid[j - 1], grid[j]);
        let (h1, h2) = (x1 - x0, x2 - x1);
        h2 / (h1 * (h1 + h2)) * u[j - 2] - (h1 + h2) / (h1 * h2) * u[j - 1] + (h1 + 2.0 * h2) / (h2 * (h1 + h2)) * u[j]
    }
}

/// Ingredients of `D^{μ,ν} f = (I^{1-μ} f)' - (I^β f)(lower) (s - lower)^{κ-1}/Γ(κ)`,
/// where `I^{1-μ} f = (s - lower)^e V(s)` with `e = w - μ` and `V` regular.
struct DerivParts {
    e: f64,
    v: Vec<f64>,
    dv: Vec<f64>,
    /// `(I^β f)(lower)/Γ(κ)`; nonzero only when `w = λ`.
    initial: f64,
    /// Weight of the result.
    weight: f64,
}

impl DerivParts {
    fn new(order: HilferOrder, f: &SampledFn) -> Result<Self, FracError> {
        check_deriv_input(order, f)?;
        let mu = order.mu;
        let w = f.weight;
        let e = (w - mu).max(0.0);
        let rule = ProductRule::new(1.0 - mu, w)?;
        let g = &f.grid;
        let mut v = Vec::with_capacity(g.len());
        v.push(f.values[0] * gamma(w)? * rgamma(w + 1.0 - mu));
        for &s in &g[1..] {
            let wts = rule.weights(g, s)?;
            v.push(dot(&wts, &f.values) / (s - f.lower).powf(e));
        }
        let dv = (0..g.len()).map(|j| fd_derivative(g, &v, j)).collect();
        let initial = integral_limit(f, order.inner())? * rgamma(order.outer());
        let weight = if e > 1e-9 { e } else { 1.0 - mu };
        Ok(DerivParts {
            e,
            v,
            dv,
            initial,
            weight,
        })
    }

    /// `(s - lower)^{1-weight} D^{μ,ν} f` from `V`, `V'` at distance `d`.
    fn weighted(&self, d: f64, v: f64, dv: f64) -> f64 {
        if self.e > 1e-9 {
            // the initial term carries (s - lower)^{λ-w} = 1 whenever it is nonzero
            self.e * v + d * dv - self.initial
        } else {
            d.powf(1.0 - self.weight) * dv
        }
    }
}

/// `D^{μ,ν} f(t) = I^{ν(1-μ)} D I^{(1-ν)(1-μ)} f (t)`.
///
/// Evaluated as the Riemann–Liouville derivative `(I^{1-μ} f)'` minus the
/// initial term `(I^{(1-ν)(1-μ)} f)(lower) (t - lower)^{κ-1}/Γ(κ)`, with
/// `κ = ν(1-μ)`. The integral is computed by product integration and its
/// regular factor is differentiated by three-point differences.
pub fn hilfer_deriv_quad(order: HilferOrder, f: &SampledFn, t: f64) -> Result<f64, FracError> {
    Ok(hilfer_deriv_quad_many(order, f, &[t])?[0])
}

/// [`hilfer_deriv_quad`] at several points, sharing the integral.
pub fn hilfer_deriv_quad_many(order: HilferOrder, f: &SampledFn, ts: &[f64]) -> Result<Vec<f64>, FracError> {
    for &t in ts {
        f.check_range(t)?;
        if t == f.lower {
            return Err(FracError::Grid(format!("t = {t} equals the lower bound")));
        }
    }
    let parts = DerivParts::new(order, f)?;
    let out = ts
        .iter()
        .map(|&t| {
            let j = cell_index(&f.grid, t);
            let (v, dv) = if f.grid[j] == t {
                (parts.v[j], parts.dv[j])
            } else {
                let (a, b) = (f.grid[j], f.grid[j + 1]);
                let r = (t - a) / (b - a);
                (
                    parts.v[j] * (1.0 - r) + parts.v[j + 1] * r,
                    parts.dv[j] * (1.0 - r) + parts.dv[j + 1] * r,
                )
            };
            let d = t - f.lower;
            d.powf(parts.weight - 1.0) * parts.weighted(d, v, dv)
        })
        .collect();
    Ok(out)
}

/// `D^{μ,ν} f` at every node as a weighted sampled function.
///
/// The weight is `w - μ` (the exponent of `D^{μ,ν}` applied to the
/// least regular admissible component of `f`), or `1 - μ` when that is 0,
/// which happens only when the `(s - lower)^{λ-1}` component is annihilated.
pub fn hilfer_deriv_nodes(order: HilferOrder, f: &SampledFn) -> Result<SampledFn, FracError> {
    let parts = DerivParts::new(order, f)?;
    let values = f
        .grid
        .iter()
        .enumerate()
        .map(|(j, &s)| parts.weighted(s - f.lower, parts.v[j], parts.dv[j]))
        .collect();
    SampledFn::new(f.grid.clone(), values, parts.weight)
}

/// `(|D(I^μ f)(t) - f(t)|, |I^μ(D f)(t) - f(t) + (t - lower)^{λ-1}/Γ(λ) · I^{1-λ}f(lower)|)`.
pub fn composition_residuals(order: HilferOrder, f: &SampledFn, t: f64) -> Result<(f64, f64), FracError> {
    check_deriv_input(order, f)?;
    f.check_range(t)?;
    if t == f.lower {
        return Err(FracError::Grid(format!("t = {t} equals the lower bound")));
    }
    let ft = f.value_at(t)?;
    let mu = order.mu;

    let i_f = frac_integral_nodes(mu, f)?;
    let first = (hilfer_deriv_quad(order, &i_f, t)? - ft).abs();

    let d_f = hilfer_deriv_nodes(order, f)?;
    let i_d = frac_integral_quad(mu, &d_f, t)?;
    let correction = (t - f.lower).powf(order.lam - 1.0) * rgamma(order.lam) * integral_limit(f, order.inner())?;
    let second = (i_d - ft + correction).abs();
    Ok((first, second))
}
