//! Mild solutions of impulsive Hilfer systems, built interval by interval
//! with a changeable lower bound at every impulse point.
//!
//! On an active interval with lower bound `l` and weighted restart value `c`
//! the unknown is the weighted state `y(s) = (s - l)^{1-λ} x(s)`, which
//! satisfies
//!
//! ```text
//! y(t) = c + (t - l)^{1-λ} I^μ[ g(·, x(·)) ](t)
//! ```
//!
//! The integrand is stored in weighted form `F(s) = (s - l)^{1-λ} g(s, x(s))`
//! (weight λ) and integrated by product integration on a graded mesh, with a
//! Picard iteration at each node.

use thiserror::Error;

use crate::expr::{Bindings, Expr, ExprError};
use crate::fraccalc::{graded_grid, FracError, HilferOrder, ProductRule};
use crate::special::{gamma, rgamma, SpecialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("invalid mesh: {0}")]
    Mesh(String),
    #[error("{needed} impulse maps required by the schedule, {found} given")]
    ImpulseMaps { needed: usize, found: usize },
    #[error("Picard iteration on active interval {interval} did not converge at t = {t} after {iterations} iterations (last change {change:e})")]
    Picard {
        interval: usize,
        t: f64,
        iterations: usize,
        change: f64,
    },
    #[error("impulse equation on window {window} did not converge at t = {t} after {iterations} iterations")]
    Impulse { window: usize, t: f64, iterations: usize },
    #[error("cannot evaluate {location}: {source}")]
    Expr {
        location: String,
        #[source]
        source: ExprError,
    },
    #[error("{location} produced the non-finite value {value}")]
    NonFinite { location: String, value: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// Impulse regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Algebraic windows `x = φᵢ(t, x, x(pᵢ - 0))` on `(pᵢ, tᵢ₊₁]`.
    NonInstantaneous,
    /// Resets `x(tᵢ) = ψᵢ(tᵢ, x(tᵢ - 0))`.
    Instantaneous,
}

/// Impulse points, active-interval ends and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulsiveSchedule {
    t_points: Vec<f64>,
    p_points: Vec<f64>,
    horizon: f64,
}

/// Part of the time axis handled by one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Active { index: usize, lower: f64, upper: f64 },
    Window { index: usize, lower: f64, upper: f64 },
    Point { index: usize, at: f64 },
}

impl ImpulsiveSchedule {
    /// Non-instantaneous: `t₀ < p₀ < t₁ < p₁ < … ≤ T`, with as many p's as
    /// t's or one fewer. Instantaneous: `t₀ < t₁ < … ≤ T` and no p's.
    pub fn new(mode: Mode, t_points: Vec<f64>, p_points: Vec<f64>, horizon: f64) -> Result<Self, SolverError> {
        let bad = |m: String| Err(SolverError::Schedule(m));
        if t_points.is_empty() {
            return bad("at least t0 is required".into());
        }
        if !horizon.is_finite() || t_points.iter().chain(&p_points).any(|v| !v.is_finite()) {
            return bad("schedule points and horizon must be finite".into());
        }
        if horizon <= t_points[0] {
            return bad(format!("horizon {horizon} must exceed t0 = {}", t_points[0]));
        }
        let merged: Vec<f64> = match mode {
            Mode::Instantaneous => {
                if !p_points.is_empty() {
                    return bad("p_points are only meaningful for non-instantaneous impulses".into());
                }
                t_points.clone()
            }
            Mode::NonInstantaneous => {
                let (nt, np) = (t_points.len(), p_points.len());
                if np != nt && np + 1 != nt {
                    return bad(format!("{nt} t_points need {nt} or {} p_points, got {np}", nt - 1));
                }
                let mut m = Vec::with_capacity(nt + np);
                for i in 0..nt {
                    m.push(t_points[i]);
                    if i < np {
                        m.push(p_points[i]);
                    }
                }
                m
            }
        };
        if let Some(w) = merged.windows(2).find(|w| w[1] <= w[0]) {
            return bad(format!("points must increase strictly ({} then {})", w[0], w[1]));
        }
        if let Some(last) = merged.last().filter(|&&v| v > horizon) {
            return bad(format!("point {last} lies beyond the horizon {horizon}"));
        }
        Ok(ImpulsiveSchedule {
            t_points,
            p_points,
            horizon,
        })
    }

    pub fn t_points(&self) -> &[f64] {
        &self.t_points
    }

    pub fn p_points(&self) -> &[f64] {
        &self.p_points
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn t0(&self) -> f64 {
        self.t_points[0]
    }

    fn pieces(&self, mode: Mode) -> Vec<Piece> {
        let t = &self.t_points;
        let horizon = self.horizon;
        let mut out = Vec::new();
        match mode {
            Mode::Instantaneous => {
                for i in 0..t.len() {
                    if i > 0 {
                        out.push(Piece::Point { index: i, at: t[i] });
                    }
                    let upper = t.get(i + 1).copied().unwrap_or(horizon);
                    if upper > t[i] {
                        out.push(Piece::Active {
                            index: i,
                            lower: t[i],
                            upper,
                        });
                    }
                }
            }
            Mode::NonInstantaneous => {
                for i in 0..t.len() {
                    let p = self.p_points.get(i).copied();
                    let active_end = p.unwrap_or(horizon);
                    if active_end > t[i] {
                        out.push(Piece::Active {
                            index: i,
                            lower: t[i],
                            upper: active_end,
                        });
                    }
                    if let Some(p) = p {
                        let upper = t.get(i + 1).copied().unwrap_or(horizon);
                        if upper > p {
                            out.push(Piece::Window {
                                index: i,
                                lower: p,
                                upper,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Number of impulse maps the schedule consumes.
    pub fn impulses_needed(&self, mode: Mode) -> usize {
        self.pieces(mode)
            .iter()
            .filter(|p| !matches!(p, Piece::Active { .. }))
            .count()
    }

    /// Lengths of the active intervals (`pᵢ - tᵢ`, or `tᵢ₊₁ - tᵢ` for
    /// instantaneous impulses), truncated at the horizon.
    pub fn active_lengths(&self, mode: Mode) -> Vec<f64> {
        self.pieces(mode)
            .iter()
            .filter_map(|p| match p {
                Piece::Active { lower, upper, .. } => Some(upper - lower),
                _ => None,
            })
            .collect()
    }
}

/// Scalar impulsive Hilfer system.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulsiveSystem {
    pub mode: Mode,
    pub order: HilferOrder,
    pub schedule: ImpulsiveSchedule,
    /// Right-hand side `g(t, x)`.
    pub g: Expr,
    /// `φᵢ(t, x, y)` per window, or `ψᵢ(t, y)` per impulse (1-based impulses
    /// map to index `i - 1`).
    pub impulse_maps: Vec<Expr>,
    /// Weighted initial value `lim (t - t₀)^{1-λ} x(t)`.
    pub x0: f64,
}

impl ImpulsiveSystem {
    pub fn new(
        mode: Mode,
        order: HilferOrder,
        schedule: ImpulsiveSchedule,
        g: Expr,
        impulse_maps: Vec<Expr>,
        x0: f64,
    ) -> Result<Self, SolverError> {
        let needed = schedule.impulses_needed(mode);
        if impulse_maps.len() < needed {
            return Err(SolverError::ImpulseMaps {
                needed,
                found: impulse_maps.len(),
            });
        }
        if !x0.is_finite() {
            return Err(SolverError::Domain(format!("x0 must be finite, got {x0}")));
        }
        Ok(ImpulsiveSystem {
            mode,
            order,
            schedule,
            g,
            impulse_maps,
            x0,
        })
    }
}

/// Mesh resolution per interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub points_per_interval: usize,
    /// Grading exponent on active intervals; `None` means `1/λ`.
    pub grading: Option<f64>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec {
            points_per_interval: 64,
            grading: None,
        }
    }
}

impl MeshSpec {
    pub const MIN_POINTS: usize = 8;

    pub fn new(points_per_interval: usize, grading: Option<f64>) -> Result<Self, SolverError> {
        let m = MeshSpec {
            points_per_interval,
            grading,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), SolverError> {
        if self.points_per_interval < Self::MIN_POINTS {
            return Err(SolverError::Mesh(format!(
                "points_per_interval must be at least {}, got {}",
                Self::MIN_POINTS,
                self.points_per_interval
            )));
        }
        if let Some(r) = self.grading {
            if !(r.is_finite() && r > 0.0) {
                return Err(SolverError::Mesh(format!("grading must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Active,
    ImpulseWindow,
    PointImpulse,
}

impl SegmentKind {
    pub fn name(self) -> &'static str {
        match self {
            SegmentKind::Active => "active",
            SegmentKind::ImpulseWindow => "impulse_window",
            SegmentKind::PointImpulse => "point_impulse",
        }
    }
}

/// One piece of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Interval, window or impulse index from the schedule.
    pub index: usize,
    pub lower: f64,
    /// λ on active segments, 1 otherwise.
    pub weight: f64,
    /// Active segments start at `lower`; windows start after it.
    pub grid: Vec<f64>,
    pub weighted_values: Vec<f64>,
    /// Weighted value at `lower` for active segments; `x(pᵢ - 0)` for
    /// windows; `x(tᵢ - 0)` for point impulses.
    pub restart_value: f64,
}

impl Segment {
    pub fn upper(&self) -> f64 {
        *self.grid.last().expect("segments are non-empty")
    }

    /// `x` at node `j`; infinite at a singular lower bound.
    pub fn value(&self, j: usize) -> f64 {
        let y = self.weighted_values[j];
        if self.weight == 1.0 {
            return y;
        }
        let d = self.grid[j] - self.lower;
        if d == 0.0 {
            return if y == 0.0 { 0.0 } else { f64::INFINITY.copysign(y) };
        }
        d.powf(self.weight - 1.0) * y
    }

    /// Left limit at the segment's end.
    pub fn end_value(&self) -> f64 {
        self.value(self.grid.len() - 1)
    }

    fn contains(&self, t: f64) -> bool {
        match self.kind {
            SegmentKind::PointImpulse => t == self.lower,
            SegmentKind::Active => t >= self.lower && t <= self.upper(),
            SegmentKind::ImpulseWindow => t > self.lower && t <= self.upper(),
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let g = &self.grid;
        let y = &self.weighted_values;
        let yt = if t <= g[0] {
            // window left of its first node: x(pᵢ - 0) is the left anchor
            let (a, ya) = (self.lower, self.restart_value);
            if self.kind == SegmentKind::ImpulseWindow && g[0] > a {
                ya + (y[0] - ya) * (t - a) / (g[0] - a)
            } else {
                y[0]
            }
        } else {
            let j = g.partition_point(|&s| s < t);
            let (a, b) = (g[j - 1], g[j]);
            y[j - 1] + (y[j] - y[j - 1]) * (t - a) / (b - a)
        };
        if self.weight == 1.0 {
            yt
        } else if t == self.lower {
            f64::INFINITY.copysign(yt)
        } else {
            (t - self.lower).powf(self.weight - 1.0) * yt
        }
    }
}

/// Computed solution on `[t₀, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTrajectory {
    pub mode: Mode,
    pub order: HilferOrder,
    pub segments: Vec<Segment>,
}

/// One output row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub weighted_x: f64,
    pub kind: SegmentKind,
    pub index: usize,
}

impl PiecewiseTrajectory {
    /// `x(t)` from linear interpolation of the weighted values. A point
    /// impulse takes precedence at its own time. `None` outside `[t₀, T]`.
    pub fn eval(&self, t: f64) -> Option<f64> {
        let seg = self
            .segments
            .iter()
            .find(|s| s.kind == SegmentKind::PointImpulse && s.contains(t))
            .or_else(|| self.segments.iter().find(|s| s.contains(t)))?;
        Some(seg.eval(t))
    }

    /// Every stored node in time order.
    pub fn samples(&self) -> Vec<Sample> {
        self.segments
            .iter()
            .flat_map(|s| {
                (0..s.grid.len()).map(move |j| Sample {
                    t: s.grid[j],
                    x: s.value(j),
                    weighted_x: s.weighted_values[j],
                    kind: s.kind,
                    index: s.index,
                })
            })
            .collect()
    }

    pub fn active_segments(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Active)
    }

    /// Largest |x| over all finite samples.
    pub fn max_abs(&self) -> f64 {
        self.samples()
            .iter()
            .map(|s| s.x.abs())
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    }
}

const PICARD_TOL: f64 = 1e-10;
const PICARD_MAX: usize = 100;
const IMPULSE_TOL: f64 = 1e-12;
const IMPULSE_MAX: usize = 200;
const IMPULSE_DAMPING: f64 = 0.5;
const SECANT_AFTER: usize = 50;
/// Relative offsets of the probes used for the weighted integrand at a singular lower bound.
const LOWER_PROBE: f64 = 1e-6;
const LOWER_PROBE_RATIO: f64 = 1e-2;

fn eval_expr(e: &Expr, b: Bindings, location: impl FnOnce() -> String) -> Result<f64, SolverError> {
    match e.eval(&b) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(SolverError::NonFinite {
            location: location(),
            value: v,
        }),
        Err(source) => Err(SolverError::Expr {
            location: location(),
            source,
        }),
    }
}

/// Solves the system interval by interval.
pub fn solve(system: &ImpulsiveSystem, mesh: &MeshSpec) -> Result<PiecewiseTrajectory, SolverError> {
    mesh.validate()?;
    let lam = system.order.lam();
    let grading = mesh.grading.unwrap_or(1.0 / lam);
    let n = mesh.points_per_interval;
    let rule = ProductRule::new(system.order.mu(), lam)?;
    let mut segments: Vec<Segment> = Vec::new();
    let mut restart = system.x0;
    let mut impulse = 0usize;
    for piece in system.schedule.pieces(system.mode) {
        match piece {
            Piece::Active { index, lower, upper } => {
                let grid = graded_grid(lower, upper, n, grading);
                let values = solve_active(system, &rule, index, &grid, restart)?;
                segments.push(Segment {
                    kind: SegmentKind::Active,
                    index,
                    lower,
                    weight: lam,
                    grid,
                    weighted_values: values,
                    restart_value: restart,
                });
            }
            Piece::Window { index, lower, upper } => {
                let map = &system.impulse_maps[impulse];
                impulse += 1;
                let left = segments
                    .last()
                    .expect("a window follows an active interval")
                    .end_value();
                let h = (upper - lower) / n as f64;
                let grid: Vec<f64> = (1..=n)
                    .map(|k| if k == n { upper } else { lower + k as f64 * h })
                    .collect();
                let mut values = Vec::with_capacity(n);
                let mut guess = left;
                for &t in &grid {
                    guess = solve_window_point(map, index, t, left, guess)?;
                    values.push(guess);
                }
                // restart: φᵢ(tᵢ₊₁, x(tᵢ₊₁), x(pᵢ - 0))
                let end = *values.last().expect("n >= 8");
                restart = eval_expr(map, Bindings::new().t(upper).x(end).y(left), || {
                    format!("impulse map {index} at restart t = {upper}")
                })?;
                segments.push(Segment {
                    kind: SegmentKind::ImpulseWindow,
                    index,
                    lower,
                    weight: 1.0,
                    grid,
                    weighted_values: values,
                    restart_value: left,
                });
            }
            Piece::Point { index, at } => {
                let map = &system.impulse_maps[impulse];
                impulse += 1;
                let left = segments
                    .last()
                    .expect("an impulse follows an active interval")
                    .end_value();
                let value = eval_expr(map, Bindings::new().t(at).x(left).y(left), || {
                    format!("impulse map {} at t = {at}", index - 1)
                })?;
                restart = value;
                segments.push(Segment {
                    kind: SegmentKind::PointImpulse,
                    index,
                    lower: at,
                    weight: 1.0,
                    grid: vec![at],
                    weighted_values: vec![value],
                    restart_value: left,
                });
            }
        }
    }
    Ok(PiecewiseTrajectory {
        mode: system.mode,
        order: system.order,
        segments,
    })
}

/// Weighted integrand `(s - l)^{1-λ} g(s, (s - l)^{λ-1} y)`.
fn weighted_rhs(
    system: &ImpulsiveSystem,
    interval: usize,
    lower: f64,
    first_step: f64,
    s: f64,
    y: f64,
) -> Result<f64, SolverError> {
    let lam = system.order.lam();
    let location = || format!("g on active interval {interval} at t = {s}");
    if lam == 1.0 {
        return eval_expr(&system.g, Bindings::new().t(s).x(y), location);
    }
    let at = |d: f64| -> Result<f64, SolverError> {
        let x = d.powf(lam - 1.0) * y;
        let g = eval_expr(&system.g, Bindings::new().t(lower + d).x(x), location)?;
        Ok(d.powf(1.0 - lam) * g)
    };
    if s > lower {
        return at(s - lower);
    }
    // limit at s = l from two probes, eliminating the B d^{1-λ} term of A + B d^{1-λ}
    let (d1, d2) = (LOWER_PROBE * first_step, LOWER_PROBE * LOWER_PROBE_RATIO * first_step);
    let (f1, f2) = (at(d1)?, at(d2)?);
    let (p1, p2) = (d1.powf(1.0 - lam), d2.powf(1.0 - lam));
    Ok((f2 * p1 - f1 * p2) / (p1 - p2))
}

fn solve_active(
    system: &ImpulsiveSystem,
    rule: &ProductRule,
    interval: usize,
    grid: &[f64],
    restart: f64,
) -> Result<Vec<f64>, SolverError> {
    let lam = system.order.lam();
    let lower = grid[0];
    let h1 = grid[1] - grid[0];
    let mut y = vec![restart];
    let mut f = vec![weighted_rhs(system, interval, lower, h1, lower, restart)?];
    for (n, &t) in grid.iter().enumerate().skip(1) {
        let w = rule.weights_power_basis(grid, t)?;
        let history: f64 = w[..n].iter().zip(&f).map(|(a, b)| a * b).sum();
        let scale = (t - lower).powf(1.0 - lam);
        let mut yn = y[n - 1];
        let mut fn_ = weighted_rhs(system, interval, lower, h1, t, yn)?;
        let mut converged = false;
        let mut change = f64::INFINITY;
        for _ in 0..PICARD_MAX {
            let next = restart + scale * (history + w[n] * fn_);
            change = (next - yn).abs();
            yn = next;
            fn_ = weighted_rhs(system, interval, lower, h1, t, yn)?;
            if change <= PICARD_TOL * yn.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SolverError::Picard {
                interval,
                t,
                iterations: PICARD_MAX,
                change,
            });
        }
        y.push(yn);
        f.push(fn_);
    }
    Ok(y)
}

/// Fixed point of `x = φ(t, x, y)`: damped iteration, then secant steps.
fn solve_window_point(map: &Expr, window: usize, t: f64, y: f64, guess: f64) -> Result<f64, SolverError> {
    let phi = |x: f64| {
        eval_expr(map, Bindings::new().t(t).x(x).y(y), || {
            format!("impulse map {window} at t = {t}")
        })
    };
    let mut x = guess;
    let mut prev: Option<(f64, f64)> = None;
    for it in 0..IMPULSE_MAX {
        let r = phi(x)? - x;
        if r.abs() <= IMPULSE_TOL * x.abs().max(1.0) {
            return Ok(x);
        }
        let next = match prev {
            Some((xp, rp)) if it >= SECANT_AFTER && r != rp => x - r * (x - xp) / (r - rp),
            _ => x + IMPULSE_DAMPING * r,
        };
        prev = Some((x, r));
        if !next.is_finite() {
            break;
        }
        x = next;
    }
    Err(SolverError::Impulse {
        window,
        t,
        iterations: IMPULSE_MAX,
    })
}

/// `∫_a^t s (t - s)^{μ-1} ds = t (t-a)^μ/μ - (t-a)^{μ+1}/(μ+1)`, the kernel
/// integral of the worked example with `g(t, x) = t`.
pub fn example_kernel(t: f64, a: f64, mu: f64) -> f64 {
    let d = t - a;
    t * d.powf(mu) / mu - d.powf(mu + 1.0) / (mu + 1.0)
}

/// Piecewise closed form of the worked example (μ = 0.4, g = t, tᵢ = i,
/// pᵢ = i + 1/2, φᵢ = t - i x + y) on `(0, 2.5]`.
///
/// Window values follow from solving `x = t - i x + x(pᵢ - 0)`, i.e.
/// `x = (t + x(pᵢ - 0))/(1 + i)`.
pub fn closed_form_example(t: f64, order: HilferOrder, x0: f64) -> Result<f64, SolverError> {
    let mu = order.mu();
    if (mu - 0.4).abs() > 1e-12 {
        return Err(SolverError::Domain(format!(
            "the worked example has mu = 0.4, got {mu}"
        )));
    }
    if !(t > 0.0 && t <= 2.5) {
        return Err(SolverError::Domain(format!("t = {t} outside (0, 2.5]")));
    }
    let lam = order.lam();
    let rg = rgamma(mu);
    let big_g = |t: f64, a: f64| example_kernel(t, a, mu) * rg;
    let half = 0.5f64.powf(lam - 1.0);
    let x_05 = x0 * half + big_g(0.5, 0.0);
    let x_15 = (1.0 + x_05) * half + big_g(1.5, 1.0);
    let x_2 = 0.5 * (2.0 + x_15);
    let v = if t <= 0.5 {
        x0 * t.powf(lam - 1.0) + big_g(t, 0.0)
    } else if t <= 1.0 {
        t + x_05
    } else if t <= 1.5 {
        (1.0 + x_05) * (t - 1.0).powf(lam - 1.0) + big_g(t, 1.0)
    } else if t <= 2.0 {
        0.5 * (t + x_15)
    } else {
        x_2 * (t - 2.0).powf(lam - 1.0) + big_g(t, 2.0)
    };
    Ok(v)
}

/// Integral (`B = I^{1-λ}x(t₀)`) or weighted (`C = lim (t-t₀)^{1-λ}x(t)`) initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialForm {
    Integral,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedInitialCondition {
    pub form: InitialForm,
    pub value: f64,
}

/// Switches between the two forms using `B = C Γ(λ)`.
pub fn convert_initial(ic: WeightedInitialCondition, lam: f64) -> Result<WeightedInitialCondition, SolverError> {
    if !(lam > 0.0 && lam <= 1.0) {
        return Err(SolverError::Domain(format!("lambda must lie in (0, 1], got {lam}")));
    }
    let g = gamma(lam)?;
    Ok(match ic.form {
        InitialForm::Weighted => WeightedInitialCondition {
            form: InitialForm::Integral,
            value: ic.value * g,
        },
        InitialForm::Integral => WeightedInitialCondition {
            form: InitialForm::Weighted,
            value: ic.value / g,
        },
    })
}

/// Contraction constant and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub k: f64,
    pub p_used: f64,
    /// `[max Iᵢ, first-interval term, worst later-interval term]`.
    pub terms: [f64; 3],
    pub contraction: bool,
}

const P_EPS: f64 = 1e-6;

/// `((1-p)/(λ-p))^{1-p} (p/(p+μ-1))^p`.
fn holder_factor(order: HilferOrder, p: f64) -> f64 {
    let (mu, lam) = (order.mu(), order.lam());
    ((1.0 - p) / (lam - p)).powf(1.0 - p) * (p / (p + mu - 1.0)).powf(p)
}

fn contraction_terms(l: f64, impulse: &[f64], order: HilferOrder, lengths: &[f64], p: f64) -> [f64; 3] {
    let mu = order.mu();
    let lam = order.lam();
    let c = holder_factor(order, p) * rgamma(mu) * l;
    let max_i = impulse.iter().copied().fold(0.0, f64::max);
    let first = lengths.first().map_or(0.0, |d| c * d.powf(mu));
    let later = (1..lengths.len())
        .filter(|&i| i <= impulse.len())
        .map(|i| {
            let ii = impulse[i - 1];
            ii + ii / lengths[i - 1].powf(1.0 - lam) + c * lengths[i].powf(mu)
        })
        .fold(0.0, f64::max);
    [max_i, first, later]
}

/// `K = max(max Iᵢ, L Δ₀^μ/Γ(μ) C(p), Iᵢ₋₁ + Iᵢ₋₁/Δᵢ₋₁^{1-λ} + L Δᵢ^μ/Γ(μ) C(p))`
/// with `C(p)` the Hölder factor and Δ the active-interval lengths. Without
/// `p`, K is minimised over `(1-μ, λ)` by a scan followed by golden-section
/// refinement.
pub fn contraction_constant(
    l: f64,
    impulse: &[f64],
    order: HilferOrder,
    schedule: &ImpulsiveSchedule,
    mode: Mode,
    p: Option<f64>,
) -> Result<ContractionReport, SolverError> {
    if !(l >= 0.0) || impulse.iter().any(|v| !(*v >= 0.0)) {
        return Err(SolverError::Domain("Lipschitz constants must be non-negative".into()));
    }
    let (lo, hi) = (1.0 - order.mu() + P_EPS, order.lam() - P_EPS);
    if lo >= hi {
        return Err(SolverError::Domain(format!(
            "the Hölder range (1 - mu, lambda) = ({}, {}) is empty",
            1.0 - order.mu(),
            order.lam()
        )));
    }
    let lengths = schedule.active_lengths(mode);
    let k_of = |p: f64| {
        let t = contraction_terms(l, impulse, order, &lengths, p);
        t[0].max(t[1]).max(t[2])
    };
    let p_used = match p {
        Some(p) => {
            if !(p > 1.0 - order.mu() && p < order.lam()) {
                return Err(SolverError::Domain(format!(
                    "p = {p} outside ({}, {})",
                    1.0 - order.mu(),
                    order.lam()
                )));
            }
            p
        }
        None => minimise(k_of, lo, hi),
    };
    let terms = contraction_terms(l, impulse, order, &lengths, p_used);
    let k = terms[0].max(terms[1]).max(terms[2]);
    Ok(ContractionReport {
        k,
        p_used,
        terms,
        contraction: k < 1.0,
    })
}

fn minimise(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const SCAN: usize = 200;
    let step = (hi - lo) / SCAN as f64;
    let best = (0..=SCAN)
        .map(|j| lo + j as f64 * step)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .expect("non-empty scan");
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while b - a > 1e-12 {
        if f(c) <= f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    let mid = 0.5 * (a + b);
    if f(mid) <= f(best) {
        mid
    } else {
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const X_05: f64 = 1.305_054_333_617_300_2;
    const X_15: f64 = 3.464_260_801_363_041;

    fn example(nu: f64, n: usize) -> PiecewiseTrajectory {
        let order = HilferOrder::new(0.4, nu).unwrap();
        let schedule =
            ImpulsiveSchedule::new(Mode::NonInstantaneous, vec![0.0, 1.0, 2.0], vec![0.5, 1.5, 2.5], 2.5).unwrap();
        let maps = ["t - 0*x + y", "t - 1*x + y", "t - 2*x + y"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let sys =
            ImpulsiveSystem::new(Mode::NonInstantaneous, order, schedule, "t".parse().unwrap(), maps, 1.0).unwrap();
        solve(&sys, &MeshSpec::new(n, None).unwrap()).unwrap()
    }

    #[test]
    fn schedule_validation() {
        use Mode::*;
        assert!(ImpulsiveSchedule::new(NonInstantaneous, vec![0.0, 1.0], vec![0.5], 2.0).is_ok());
        assert!(ImpulsiveSchedule::new(NonInstantaneous, vec![0.0, 1.0], vec![1.5], 2.0).is_err());
        assert!(ImpulsiveSchedule::new(NonInstantaneous, vec![0.0], vec![0.5, 0.7], 2.0).is_err());
        assert!(ImpulsiveSchedule::new(NonInstantaneous, vec![0.0, 1.0], vec![0.5], 0.8).is_err());
        assert!(ImpulsiveSchedule::new(Instantaneous, vec![0.0, 1.0], vec![0.5], 2.0).is_err());
        assert!(ImpulsiveSchedule::new(Instantaneous, vec![0.0, 0.0], vec![], 2.0).is_err());
        let s = ImpulsiveSchedule::new(NonInstantaneous, vec![0.0, 1.0, 2.0], vec![0.5, 1.5, 2.5], 2.5).unwrap();
        assert_eq!(s.impulses_needed(NonInstantaneous), 2);
        assert_eq!(s.active_lengths(NonInstantaneous), vec![0.5, 0.5, 0.5]);
        let s = ImpulsiveSchedule::new(Instantaneous, vec![0.0, 1.0], vec![], 3.0).unwrap();
        assert_eq!(s.impulses_needed(Instantaneous), 1);
        assert_eq!(s.active_lengths(Instantaneous), vec![1.0, 2.0]);
    }

    #[test]
    fn example_kernel_matches_coefficients() {
        for &(t, a) in &[(0.5f64, 0.0), (1.5, 1.0), (2.2, 0.3)] {
            let want = (t - a).powf(0.4) * (t / 0.56 + a / 1.4);
            assert!((example_kernel(t, a, 0.4) - want).abs() < 1e-13 * want);
        }
        assert!((example_kernel(0.5, 0.0, 0.4) - 0.676_659_181_477_856_3).abs() < 1e-14);
        assert!((example_kernel(1.5, 1.0, 0.4) - 2.571_304_889_615_854).abs() < 1e-13);
    }

    #[test]
    fn closed_form_values() {
        let o = HilferOrder::new(0.4, 1.0).unwrap();
        assert!((closed_form_example(0.5, o, 1.0).unwrap() - X_05).abs() < 1e-13);
        assert!((closed_form_example(1.0, o, 1.0).unwrap() - (1.0 + X_05)).abs() < 1e-13);
        assert!((closed_form_example(1.5, o, 1.0).unwrap() - X_15).abs() < 1e-13);
        assert!((closed_form_example(2.0, o, 1.0).unwrap() - 2.732_130_400_681_520_5).abs() < 1e-13);
        assert!((closed_form_example(2.5, o, 1.0).unwrap() - 4.745_489_002_555_702).abs() < 1e-12);
        assert!(closed_form_example(0.0, o, 1.0).is_err());
        assert!(closed_form_example(2.6, o, 1.0).is_err());
        let o = HilferOrder::new(0.4, 0.5).unwrap();
        let t = 1e-8f64;
        let weighted = t.powf(1.0 - o.lam()) * closed_form_example(t, o, 1.0).unwrap();
        assert!((weighted - 1.0).abs() < 1e-3);
    }

    #[test]
    fn example_trajectory_matches_closed_form() {
        let traj = example(1.0, 64);
        let o = traj.order;
        let mut worst: f64 = 0.0;
        for s in traj.samples() {
            if s.t > 0.0 {
                worst = worst.max((s.x - closed_form_example(s.t, o, 1.0).unwrap()).abs());
            }
        }
        assert!(worst < 1e-3, "{worst}");
        assert!((traj.eval(0.5).unwrap() - X_05).abs() < 1e-3);
        assert!((traj.eval(1.0).unwrap() - (1.0 + X_05)).abs() < 1e-3);
    }

    fn weighted_error(traj: &PiecewiseTrajectory) -> f64 {
        let mut worst: f64 = 0.0;
        for seg in &traj.segments {
            for (j, &t) in seg.grid.iter().enumerate() {
                let d = t - seg.lower;
                if d > 0.0 {
                    let exact = d.powf(1.0 - seg.weight) * closed_form_example(t, traj.order, 1.0).unwrap();
                    worst = worst.max((seg.weighted_values[j] - exact).abs());
                }
            }
        }
        worst
    }

    #[test]
    fn hilfer_example_converges() {
        for nu in [0.0, 0.5] {
            let (e1, e2) = (weighted_error(&example(nu, 32)), weighted_error(&example(nu, 64)));
            assert!(e1 < 1e-3 && e2 < 0.3 * e1, "nu = {nu}: {e1:e} -> {e2:e}");
        }
    }

    #[test]
    fn weighted_restart_and_caputo_continuity() {
        let traj = example(1.0, 32);
        for seg in traj.active_segments() {
            assert_eq!(seg.weighted_values[0], seg.restart_value);
        }
        // ν = 1: x is continuous where a window hands over to an active interval
        let segs = &traj.segments;
        for w in segs.windows(2) {
            if w[0].kind == SegmentKind::ImpulseWindow && w[1].kind == SegmentKind::Active {
                assert!((w[0].end_value() - w[1].weighted_values[0]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_system_stays_zero() {
        let order = HilferOrder::new(0.3, 0.2).unwrap();
        let schedule = ImpulsiveSchedule::new(Mode::NonInstantaneous, vec![0.0, 1.0], vec![0.4, 1.7], 2.0).unwrap();
        let sys = ImpulsiveSystem::new(
            Mode::NonInstantaneous,
            order,
            schedule,
            "0".parse().unwrap(),
            vec!["y".parse().unwrap(), "y".parse().unwrap()],
            0.0,
        )
        .unwrap();
        let traj = solve(&sys, &MeshSpec::default()).unwrap();
        assert_eq!(traj.max_abs(), 0.0);
    }

    #[test]
    fn instantaneous_jump() {
        let order = HilferOrder::new(0.5, 1.0).unwrap();
        let schedule = ImpulsiveSchedule::new(Mode::Instantaneous, vec![0.0, 1.0], vec![], 2.0).unwrap();
        let sys = ImpulsiveSystem::new(
            Mode::Instantaneous,
            order,
            schedule,
            "0".parse().unwrap(),
            vec!["0.5*y".parse().unwrap()],
            1.0,
        )
        .unwrap();
        let traj = solve(&sys, &MeshSpec::default()).unwrap();
        assert_eq!(traj.eval(0.7), Some(1.0));
        assert_eq!(traj.eval(1.0), Some(0.5));
        assert_eq!(traj.eval(1.6), Some(0.5));
        assert_eq!(traj.eval(2.1), None);
        let kinds: Vec<_> = traj.segments.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            [SegmentKind::Active, SegmentKind::PointImpulse, SegmentKind::Active]
        );
    }

    #[test]
    fn missing_maps_and_bad_mesh() {
        let order = HilferOrder::new(0.5, 1.0).unwrap();
        let schedule = ImpulsiveSchedule::new(Mode::Instantaneous, vec![0.0, 1.0], vec![], 2.0).unwrap();
        let r = ImpulsiveSystem::new(Mode::Instantaneous, order, schedule, "0".parse().unwrap(), vec![], 1.0);
        assert_eq!(r, Err(SolverError::ImpulseMaps { needed: 1, found: 0 }));
        assert!(MeshSpec::new(4, None).is_err());
        assert!(MeshSpec::new(16, Some(0.0)).is_err());
    }

    #[test]
    fn expression_failures_carry_location() {
        let order = HilferOrder::new(0.5, 1.0).unwrap();
        let schedule = ImpulsiveSchedule::new(Mode::Instantaneous, vec![0.0], vec![], 1.0).unwrap();
        let sys = ImpulsiveSystem::new(
            Mode::Instantaneous,
            order,
            schedule,
            "ln(x - 2)".parse().unwrap(),
            vec![],
            1.0,
        )
        .unwrap();
        match solve(&sys, &MeshSpec::default()) {
            Err(SolverError::Expr { location, .. }) => assert!(location.contains("active interval 0")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn windows_use_secant_when_damping_stalls() {
        // x = 3 - 2x has the fixed point 1, but damping with ω = 0.5 oscillates
        let map: Expr = "3 - 2*x + 0*y".parse().unwrap();
        let x = solve_window_point(&map, 0, 0.0, 0.0, 5.0).unwrap();
        assert!((x - 1.0).abs() < 1e-11);
    }

    #[test]
    fn initial_condition_conversion() {
        let ic = WeightedInitialCondition {
            form: InitialForm::Weighted,
            value: 1.0,
        };
        let b = convert_initial(ic, 0.4).unwrap();
        assert_eq!(b.form, InitialForm::Integral);
        assert!((b.value - 2.218_159_543_757_688).abs() < 1e-12);
        let ic = WeightedInitialCondition {
            form: InitialForm::Integral,
            value: 3.7,
        };
        let back = convert_initial(convert_initial(ic, 0.8).unwrap(), 0.8).unwrap();
        assert!((back.value - 3.7).abs() < 1e-12);
        assert!(convert_initial(ic, 0.0).is_err());
    }

    #[test]
    fn contraction_examples() {
        let o = HilferOrder::new(0.4, 1.0).unwrap();
        let single = ImpulsiveSchedule::new(Mode::NonInstantaneous, vec![0.0], vec![0.5], 1.0).unwrap();
        let r = contraction_constant(1.0, &[], o, &single, Mode::NonInstantaneous, Some(0.8)).unwrap();
        assert!((r.k - 1.035_722_032_014_951_2).abs() < 1e-12, "{}", r.k);
        assert!(!r.contraction);

        let r = contraction_constant(0.0, &[], o, &single, Mode::NonInstantaneous, None).unwrap();
        assert_eq!(r.k, 0.0);
        assert!(r.contraction);

        let multi =
            ImpulsiveSchedule::new(Mode::NonInstantaneous, vec![0.0, 1.0, 2.0], vec![0.5, 1.2, 2.9], 3.0).unwrap();
        let r = contraction_constant(0.0, &[0.3, 0.3], o, &multi, Mode::NonInstantaneous, None).unwrap();
        assert!((r.k - 0.6).abs() < 1e-15);
        assert_eq!(r.terms, [0.3, 0.0, 0.6]);

        // μ = 0.3, ν = 0 leaves no admissible Hölder exponent
        let o = HilferOrder::new(0.3, 0.0).unwrap();
        assert!(contraction_constant(1.0, &[], o, &single, Mode::NonInstantaneous, None).is_err());
    }

    #[test]
    fn optimised_contraction_is_minimal() {
        let o = HilferOrder::new(0.4, 0.8).unwrap();
        let s = ImpulsiveSchedule::new(Mode::NonInstantaneous, vec![0.0, 1.0], vec![0.5, 1.6], 2.0).unwrap();
        let best = contraction_constant(0.7, &[0.2], o, &s, Mode::NonInstantaneous, None).unwrap();
        let (lo, hi) = (0.6, o.lam());
        for j in 1..100 {
            let p = lo + (hi - lo) * j as f64 / 100.0;
            let r = contraction_constant(0.7, &[0.2], o, &s, Mode::NonInstantaneous, Some(p)).unwrap();
            assert!(best.k <= r.k + 1e-12);
        }
    }
}
