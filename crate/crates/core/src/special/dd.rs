//! Double-double arithmetic (about 32 significant digits), just enough for
//! the cancellation-prone Mittag-Leffler series.

use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};
const HALF_LN_2PI: Dd = Dd {
    hi: 0.918_938_533_204_672_8,
    lo: -3.878_294_158_067_241_4e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn new(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn ldexp(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * k).ldexp(-10);
        // expm1(r) by Horner; |r| < 4e-4 so 10 terms reach dd precision
        let mut p = Dd::ZERO;
        for n in (1..=10).rev() {
            p = (p + Dd::ONE) * r / n as f64;
        }
        for _ in 0..10 {
            p = p * 2.0 + p * p;
        }
        (p + Dd::ONE).ldexp(k as i32)
    }

    /// Natural log of a positive value (one Newton step on `exp`).
    pub fn ln(self) -> Self {
        let y = Dd::new(self.hi.ln());
        y + self * (-y).exp() - Dd::ONE
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, b: f64) -> Dd {
        self + Dd::new(b)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + q3
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        self / Dd::new(b)
    }
}

/// `B_{2k} / (2k (2k - 1))` for k = 1..=13.
fn stirling_coefficients() -> &'static [Dd; 13] {
    static COEF: OnceLock<[Dd; 13]> = OnceLock::new();
    COEF.get_or_init(|| {
        const BERNOULLI: [(f64, f64); 13] = [
            (1.0, 6.0),
            (-1.0, 30.0),
            (1.0, 42.0),
            (-1.0, 30.0),
            (5.0, 66.0),
            (-691.0, 2730.0),
            (7.0, 6.0),
            (-3617.0, 510.0),
            (43867.0, 798.0),
            (-174611.0, 330.0),
            (854513.0, 138.0),
            (-236364091.0, 2730.0),
            (8553103.0, 6.0),
        ];
        let mut out = [Dd::ZERO; 13];
        for (k, (num, den)) in BERNOULLI.iter().enumerate() {
            let two_k = 2.0 * (k + 1) as f64;
            out[k] = Dd::new(*num) / Dd::new(den * two_k * (two_k - 1.0));
        }
        out
    })
}

/// ln Γ(x) for x > 0: upward shift to x >= 30, then Stirling with 13 terms.
pub(crate) fn ln_gamma(x: Dd) -> Dd {
    debug_assert!(x.hi > 0.0);
    let mut z = x;
    let mut prod = Dd::ONE;
    while z.hi < 30.0 {
        prod = prod * z;
        z = z + 1.0;
    }
    let inv = Dd::ONE / z;
    let inv2 = inv * inv;
    let mut series = Dd::ZERO;
    let mut pow = inv;
    for c in stirling_coefficients() {
        series = series + *c * pow;
        pow = pow * inv2;
    }
    let main = (z - Dd::new(0.5)) * z.ln() - z + HALF_LN_2PI + series;
    if prod.hi == 1.0 && prod.lo == 0.0 {
        main
    } else {
        main - prod.ln()
    }
}
