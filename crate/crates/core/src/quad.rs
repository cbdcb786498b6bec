//! Quadrature rules: Gauss–Jacobi (Golub–Welsch) and adaptive Gauss–Kronrod.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::special::lgamma;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error(
        "adaptive quadrature did not reach tolerance {tol:e} (estimate {estimate:e}) after {evaluations} evaluations"
    )]
    NoConvergence {
        tol: f64,
        estimate: f64,
        evaluations: usize,
    },
    #[error("integrand failed at {at}: {message}")]
    Integrand { at: f64, message: String },
}

/// Nodes and weights on [-1, 1] for the weight (1 - x)^a (1 + x)^b.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl GaussRule {
    pub fn legendre(n: usize) -> Self {
        Self::jacobi(n, 0.0, 0.0)
    }

    /// Golub–Welsch on the monic Jacobi recurrence. Requires a, b > -1.
    pub fn jacobi(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 1 && a > -1.0 && b > -1.0);
        let ab = a + b;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let k = i as f64;
            let s = 2.0 * k + ab;
            m[(i, i)] = if i == 0 {
                (b - a) / (ab + 2.0)
            } else {
                (b * b - a * a) / (s * (s + 2.0))
            };
            if i + 1 < n {
                let k1 = k + 1.0;
                let s1 = 2.0 * k1 + ab;
                let off2 = if i == 0 {
                    // (k1 + ab) / (s1 - 1) cancels; the general form is 0/0 at a + b = -1
                    4.0 * (1.0 + a) * (1.0 + b) / (s1 * s1 * (s1 + 1.0))
                } else {
                    4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + ab) / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0))
                };
                let off = off2.sqrt();
                m[(i, i + 1)] = off;
                m[(i + 1, i)] = off;
            }
        }
        let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + lgamma(a + 1.0) + lgamma(b + 1.0) - lgamma(ab + 2.0)).exp();
        let eig = SymmetricEigen::new(m);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|j| {
                let v0 = eig.eigenvectors[(0, j)];
                (eig.eigenvalues[j], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        GaussRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            a,
            b,
        }
    }

    /// Shared copy of `jacobi(n, a, b)`; rules are memoised per parameter triple.
    pub fn jacobi_shared(n: usize, a: f64, b: f64) -> Arc<GaussRule> {
        type Cache = Mutex<HashMap<(usize, u64, u64), Arc<GaussRule>>>;
        const CAPACITY: usize = 512;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let key = (n, a.to_bits(), b.to_bits());
        if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&key) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(Self::jacobi(n, a, b));
        let mut map = cache.lock().expect("rule cache poisoned");
        if map.len() >= CAPACITY {
            map.clear();
        }
        map.insert(key, Arc::clone(&rule));
        rule
    }

    /// `∫_lo^hi (hi - s)^a (s - lo)^b f(s) ds`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let scale = half.powf(1.0 + self.a + self.b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * scale
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadError>
where
    F: FnMut(f64) -> Result<f64, String>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut call = |x: f64| f(x).map_err(|message| QuadError::Integrand { at: x, message });
    let fc = call(c)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = call(c - dx)? + call(c + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kronrod * h, ((kronrod - gauss) * h).abs()))
}

/// Globally adaptive Gauss–Kronrod (7, 15) on a bounded interval.
pub fn adaptive_gk<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadError>
where
    F: FnMut(f64) -> Result<f64, String>,
{
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = gk15(&mut f, a, b)?;
    let mut parts = vec![(a, b, v, e)];
    let mut evaluations = 15;
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= tol {
            return Ok(total);
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(QuadError::NoConvergence {
                tol,
                estimate: err,
                evaluations,
            });
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .3.total_cmp(&q.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid)?;
        let (v2, e2) = gk15(&mut f, mid, hi)?;
        evaluations += 30;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}
