//! Double-double arithmetic, roughly 32 significant digits.
//!
//! Used where the cost matrix and the KKT solve need more headroom than
//! `f64` gives (the optimality systems have condition numbers near 1e10).

use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, e)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: 3.141592653589793,
        lo: 1.2246467991473532e-16,
    };

    #[inline]
    pub const fn new(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn is_zero(self) -> bool {
        self.hi == 0.0
    }

    /// Exact quotient of two small integers (or any pair of f64s).
    pub fn ratio(n: f64, d: f64) -> Dd {
        Dd::new(n) / Dd::new(d)
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn sqr(self) -> Dd {
        self * self
    }

    pub fn powi(self, n: u32) -> Dd {
        let mut r = Dd::ONE;
        let mut base = self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                r *= base;
            }
            base = base.sqr();
            k >>= 1;
        }
        r
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = Dd::new(libm::sqrt(self.hi));
        x + (self - x.sqr()).mul_f64(0.5 / x.hi)
    }

    pub const LN2: Dd = Dd {
        hi: 0.6931471805599453,
        lo: 2.3190468138462996e-17,
    };

    /// `exp` via reduction by multiples of ln 2 and a Taylor series.
    pub fn exp(self) -> Dd {
        if self.hi == 0.0 {
            return Dd::ONE;
        }
        let k = libm::round(self.hi / Dd::LN2.hi);
        let r = self - Dd::LN2.mul_f64(k);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for n in 1..40 {
            term = term * r / Dd::new(n as f64);
            sum += term;
            if libm::fabs(term.hi) < 1e-35 * libm::fabs(sum.hi) {
                break;
            }
        }
        let scale = libm::ldexp(1.0, k as i32);
        Dd {
            hi: sum.hi * scale,
            lo: sum.lo * scale,
        }
    }

    /// `(cos x, sin x)` for moderate `|x|` (a few units).
    pub fn cos_sin(self) -> (Dd, Dd) {
        let mut k = 0u32;
        let mut r = self;
        while libm::fabs(r.hi) > 0.25 {
            r = r.mul_f64(0.5);
            k += 1;
        }
        let r2 = r.sqr();
        let mut c = Dd::ONE;
        let mut s = r;
        let mut tc = Dd::ONE;
        let mut ts = r;
        let mut n = 1.0;
        loop {
            tc = -(tc * r2) / Dd::new(n * (n + 1.0));
            ts = -(ts * r2) / Dd::new((n + 1.0) * (n + 2.0));
            c += tc;
            s += ts;
            n += 2.0;
            if libm::fabs(tc.hi) < 1e-35 && libm::fabs(ts.hi) < 1e-35 {
                break;
            }
        }
        for _ in 0..k {
            let s2 = (s * c).mul_f64(2.0);
            let c2 = (c - s) * (c + s);
            s = s2;
            c = c2;
        }
        (c, s)
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Dd {
        Dd::new(x)
    }
}

impl From<i64> for Dd {
    fn from(x: i64) -> Dd {
        let hi = x as f64;
        let lo = (x - hi as i64) as f64;
        let (hi, lo) = quick_two_sum(hi, lo);
        Dd { hi, lo }
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl AddAssign for Dd {
    #[inline]
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl SubAssign for Dd {
    #[inline]
    fn sub_assign(&mut self, b: Dd) {
        *self = *self - b;
    }
}

impl MulAssign for Dd {
    #[inline]
    fn mul_assign(&mut self, b: Dd) {
        *self = *self * b;
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Dd, b: Dd, tol: f64) -> bool {
        (a - b).abs().hi <= tol * b.abs().hi.max(1e-300)
    }

    #[test]
    fn third_times_three() {
        let t = Dd::ONE / Dd::new(3.0);
        let r = t * Dd::new(3.0) - Dd::ONE;
        assert!(r.abs().hi < 1e-31);
    }

    #[test]
    fn sqrt_two_squared() {
        let s = Dd::new(2.0).sqrt();
        assert!((s.sqr() - Dd::new(2.0)).abs().hi < 1e-31);
    }

    #[test]
    fn cos_sin_identities() {
        for &x in &[0.1, 0.7, 1.3, 2.9, 3.0, 3.141592653589793] {
            let (c, s) = Dd::new(x).cos_sin();
            let one = c.sqr() + s.sqr();
            assert!((one - Dd::ONE).abs().hi < 1e-30, "x={x}");
            assert!((c.to_f64() - libm::cos(x)).abs() < 1e-15);
            assert!((s.to_f64() - libm::sin(x)).abs() < 1e-15);
        }
        // cos(pi/3) = 1/2 to full double-double accuracy
        let (c, _) = (Dd::PI / Dd::new(3.0)).cos_sin();
        assert!(close(c, Dd::new(0.5), 1e-30));
    }

    #[test]
    fn exp_log_consistency() {
        let e = Dd::ONE.exp();
        // e = 2.718281828459045 + 1.4456468917292502e-16
        assert!(close(
            e,
            Dd {
                hi: 2.718281828459045,
                lo: 1.4456468917292502e-16
            },
            1e-30
        ));
        let p = Dd::new(6.0).exp() * Dd::new(-6.0).exp();
        assert!(close(p, Dd::ONE, 1e-30));
    }

    #[test]
    fn powi_matches_repeated_product() {
        let x = Dd::ratio(7.0, 3.0);
        let mut r = Dd::ONE;
        for _ in 0..11 {
            r *= x;
        }
        assert!(close(x.powi(11), r, 1e-30));
    }
}
