//! Composite Gauss–Legendre quadrature against a weight function.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::weight::WeightFunction;

/// Nodes per panel.
pub const GL_NODES: usize = 32;
const MAX_LEVEL: u32 = 16;
const MAX_LEVEL_DD: u32 = 10;

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn legendre_dd(n: usize, x: Dd) -> (Dd, Dd) {
    let mut p0 = Dd::ONE;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = (x * p1).mul_f64(2.0 * kf - 1.0) - p0.mul_f64(kf - 1.0);
        p0 = p1;
        p1 = p2 / Dd::new(kf);
    }
    let dp = (x * p1 - p0).mul_f64(n as f64) / (x * x - Dd::ONE);
    (p1, dp)
}

/// Gauss–Legendre rule in double-double precision.
pub(crate) fn gauss_legendre_dd(n: usize) -> (Vec<Dd>, Vec<Dd>) {
    let (x64, _) = gauss_legendre(n);
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for &x0 in &x64 {
        let mut x = Dd::new(x0);
        for _ in 0..3 {
            let (p, dp) = legendre_dd(n, x);
            x -= p / dp;
        }
        let (_, dp) = legendre_dd(n, x);
        xs.push(x);
        ws.push(Dd::new(2.0) / ((Dd::ONE - x * x) * dp * dp));
    }
    (xs, ws)
}

/// ∫ γ(η) f(η) dη with panel bisection until successive estimates agree to
/// `1e-12` relative (relative to ∫ γ |f|, so vanishing integrals converge).
///
/// When the differences stop shrinking below `1e-8` relative the integrand's
/// own roundoff has been reached and the latest estimate is returned.
pub fn integrate<F: Fn(f64) -> f64>(f: F, w: &WeightFunction) -> Result<f64> {
    let segs = w.segments();
    if segs.is_empty() {
        return Ok(0.0);
    }
    let (xs, ws) = gauss_legendre(GL_NODES);
    let mut prev = f64::NAN;
    let mut prev_diff = f64::INFINITY;
    for level in 0..=MAX_LEVEL {
        let panels = 1usize << level;
        let mut total = 0.0;
        let mut abs_total = 0.0;
        for s in &segs {
            let width = (s.hi - s.lo) / panels as f64;
            for k in 0..panels {
                let a = s.lo + k as f64 * width;
                let half = 0.5 * width;
                let mid = a + half;
                let mut acc = 0.0;
                let mut acc_abs = 0.0;
                for (x, wt) in xs.iter().zip(&ws) {
                    let eta = mid + half * x;
                    let v = s.eval(eta) * f(eta);
                    acc += wt * v;
                    acc_abs += wt * v.abs();
                }
                total += half * acc;
                abs_total += half * acc_abs;
            }
        }
        let diff = (total - prev).abs();
        let scale = abs_total.max(f64::MIN_POSITIVE);
        if level > 0 && diff <= 1e-12 * scale {
            return Ok(total);
        }
        if level > 2 && diff <= 1e-8 * scale && diff >= 0.25 * prev_diff {
            return Ok(total);
        }
        if level == MAX_LEVEL {
            return Err(Error::NonConvergence {
                last: total,
                previous: prev,
            });
        }
        if level > 0 {
            prev_diff = diff;
        }
        prev = total;
    }
    unreachable!()
}

/// ⟨f·g⟩ = ∫ γ f g dη.
pub fn inner_product<F, G>(f: F, g: G, w: &WeightFunction) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    integrate(|eta| f(eta) * g(eta), w)
}

/// Weighted trigonometric moments ∫ γ η^k cos(nη) dη and ∫ γ η^k sin(nη) dη
/// for a set of powers `k` and all `0 <= n <= nmax`, in double-double.
pub(crate) struct TrigMoments {
    powers: Vec<usize>,
    nmax: usize,
    cos: Vec<Dd>,
    sin: Vec<Dd>,
}

impl TrigMoments {
    fn idx(&self, k: usize, n: usize) -> usize {
        let pi = self
            .powers
            .iter()
            .position(|&p| p == k)
            .expect("moment power was not requested");
        pi * (self.nmax + 1) + n
    }

    /// ∫ γ η^k cos(nη), any integer n with |n| <= nmax.
    pub fn cos(&self, k: usize, n: i64) -> Dd {
        self.cos[self.idx(k, n.unsigned_abs() as usize)]
    }

    /// ∫ γ η^k sin(nη), any integer n with |n| <= nmax.
    pub fn sin(&self, k: usize, n: i64) -> Dd {
        let v = self.sin[self.idx(k, n.unsigned_abs() as usize)];
        if n < 0 {
            -v
        } else {
            v
        }
    }
}

pub(crate) fn trig_moments(w: &WeightFunction, powers: &[usize], nmax: usize) -> Result<TrigMoments> {
    let segs = w.segments();
    let np = powers.len();
    let len = np * (nmax + 1);
    let (xs, ws) = gauss_legendre_dd(GL_NODES);
    let mut prev_c = vec![Dd::ZERO; len];
    let mut prev_s = vec![Dd::ZERO; len];
    let mut cs = vec![Dd::ZERO; nmax + 1];
    let mut sn = vec![Dd::ZERO; nmax + 1];
    let mut pw = vec![Dd::ZERO; np];
    for level in 0..=MAX_LEVEL_DD {
        let panels = 1usize << level;
        let mut tc = vec![Dd::ZERO; len];
        let mut ts = vec![Dd::ZERO; len];
        for s in &segs {
            let lo = Dd::new(s.lo);
            let width = (Dd::new(s.hi) - lo) / Dd::new(panels as f64);
            let half = width.mul_f64(0.5);
            for k in 0..panels {
                let mid = lo + width.mul_f64(k as f64) + half;
                for (x, wt) in xs.iter().zip(&ws) {
                    let eta = mid + half * *x;
                    let g = s.eval_dd(eta) * *wt * half;
                    let (c1, s1) = eta.cos_sin();
                    cs[0] = Dd::ONE;
                    sn[0] = Dd::ZERO;
                    if nmax >= 1 {
                        cs[1] = c1;
                        sn[1] = s1;
                    }
                    let two_c = c1.mul_f64(2.0);
                    for n in 2..=nmax {
                        cs[n] = two_c * cs[n - 1] - cs[n - 2];
                        sn[n] = two_c * sn[n - 1] - sn[n - 2];
                    }
                    for (i, &p) in powers.iter().enumerate() {
                        pw[i] = g * eta.powi(p as u32);
                    }
                    for i in 0..np {
                        let base = i * (nmax + 1);
                        for n in 0..=nmax {
                            tc[base + n] += pw[i] * cs[n];
                            ts[base + n] += pw[i] * sn[n];
                        }
                    }
                }
            }
        }
        if level > 0 {
            let mut done = true;
            for i in 0..np {
                let scale = tc[i * (nmax + 1)].abs().to_f64().max(f64::MIN_POSITIVE);
                for n in 0..=nmax {
                    let j = i * (nmax + 1) + n;
                    let dc = (tc[j] - prev_c[j]).abs().to_f64();
                    let ds = (ts[j] - prev_s[j]).abs().to_f64();
                    if dc.max(ds) > 1e-27 * scale {
                        done = false;
                    }
                }
            }
            if done {
                return Ok(TrigMoments {
                    powers: powers.to_vec(),
                    nmax,
                    cos: tc,
                    sin: ts,
                });
            }
            if level == MAX_LEVEL_DD {
                let diff = |j: usize| (tc[j] - prev_c[j]).abs().to_f64();
                let j = (0..len)
                    .max_by(|&a, &b| diff(a).total_cmp(&diff(b)))
                    .unwrap_or(0);
                return Err(Error::NonConvergence {
                    last: tc[j].to_f64(),
                    previous: prev_c[j].to_f64(),
                });
            }
        }
        prev_c = tc;
        prev_s = ts;
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::{Form, Piece};

    #[test]
    fn gl_weights_sum_to_two() {
        let (xs, ws) = gauss_legendre(32);
        let s: f64 = ws.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m2: f64 = xs.iter().zip(&ws).map(|(x, w)| x * x * w).sum();
        assert!((m2 - 2.0 / 3.0).abs() < 1e-14);
        let (xd, wd) = gauss_legendre_dd(32);
        let sd = wd.iter().fold(Dd::ZERO, |a, w| a + *w);
        assert!((sd - Dd::new(2.0)).abs().hi < 1e-29);
        let m4 = xd.iter().zip(&wd).fold(Dd::ZERO, |a, (x, w)| a + x.powi(4) * *w);
        assert!((m4 - Dd::ratio(2.0, 5.0)).abs().hi < 1e-29);
    }

    #[test]
    fn spec_examples() {
        let w = WeightFunction::unit(0.0, 3.0).unwrap();
        assert!((inner_product(|_| 1.0, |_| 1.0, &w).unwrap() - 3.0).abs() < 1e-13);
        assert!((inner_product(|e| e * e, |_| 1.0, &w).unwrap() - 9.0).abs() < 1e-12);
        let w = WeightFunction::unit(0.0, PI).unwrap();
        let v = inner_product(libm::cos, libm::cos, &w).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn empty_weight_integrates_to_zero() {
        assert_eq!(integrate(|_| 1.0, &WeightFunction::empty()).unwrap(), 0.0);
    }

    #[test]
    fn table_weight_exact_on_knots() {
        let w = WeightFunction::new(alloc::vec![Piece {
            lo: 0.0,
            hi: 2.0,
            form: Form::Table {
                eta: alloc::vec![0.0, 1.0, 2.0],
                gamma: alloc::vec![0.0, 1.0, 0.0],
            },
        }])
        .unwrap();
        assert!((integrate(|_| 1.0, &w).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dd_moments() {
        let w = WeightFunction::unit(0.0, 3.0).unwrap();
        let m = trig_moments(&w, &[0, 2], 4).unwrap();
        // ∫0^3 cos(2η) = sin(6)/2
        let expect = libm::sin(6.0) / 2.0;
        assert!((m.cos(0, 2).to_f64() - expect).abs() < 1e-15);
        assert!((m.cos(2, 0).to_f64() - 9.0).abs() < 1e-14);
        assert_eq!(m.sin(0, -3), -m.sin(0, 3));
        // ∫0^3 η^2 sin(η) = 2·3 sin3 − (9 − 2) cos 3 − 2
        let e = 6.0 * libm::sin(3.0) - 7.0 * libm::cos(3.0) - 2.0;
        assert!((m.sin(2, 1).to_f64() - e).abs() < 1e-14);
    }
}
