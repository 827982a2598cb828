//! Quadratic cost matrices Q_d for the relaxed spectral-error objective.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::quadrature::trig_moments;
use crate::weight::WeightFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Q_d over the stacked vector `[a; b]` of length 2N̂.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub q: DMatrix<f64>,
    pub parity: Parity,
    pub d: usize,
    pub m_hat: usize,
    exact: Vec<Dd>,
}

impl CostMatrix {
    pub fn dim(&self) -> usize {
        2 * (2 * self.m_hat + 1)
    }

    /// Entry in double-double precision.
    pub(crate) fn exact(&self, i: usize, j: usize) -> Dd {
        self.exact[i * self.dim() + j]
    }

    /// `[a; b]ᵀ Q [a; b]`, accumulated in double-double.
    pub fn quadratic_form(&self, a: &[f64], b: &[f64]) -> f64 {
        let x: Vec<f64> = a.iter().chain(b).copied().collect();
        self.form(&x).to_f64()
    }

    pub(crate) fn form(&self, x: &[f64]) -> Dd {
        let n = self.dim();
        let mut acc = Dd::ZERO;
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            let mut row = Dd::ZERO;
            for j in 0..n {
                row += self.exact(i, j).mul_f64(x[j]);
            }
            acc += row.mul_f64(x[i]);
        }
        acc
    }
}

fn offsets(m_hat: usize) -> Vec<i64> {
    let m = m_hat as i64;
    (-m..=m).collect()
}

/// Q_d for even `d`.
pub fn build_cost_even(d: usize, m_hat: usize, w: &WeightFunction) -> Result<CostMatrix> {
    if d == 0 || d % 2 != 0 {
        return Err(Error::InvalidArgument(format!("build_cost_even needs even d > 0, got {d}")));
    }
    build(d, m_hat, w)
}

/// Q_d for odd `d`.
pub fn build_cost_odd(d: usize, m_hat: usize, w: &WeightFunction) -> Result<CostMatrix> {
    if d % 2 != 1 {
        return Err(Error::InvalidArgument(format!("build_cost_odd needs odd d, got {d}")));
    }
    build(d, m_hat, w)
}

/// Q_d for any `d >= 1`.
pub fn build_cost(d: usize, m_hat: usize, w: &WeightFunction) -> Result<CostMatrix> {
    if d == 0 {
        return Err(Error::InvalidArgument("derivative order must be positive".into()));
    }
    build(d, m_hat, w)
}

// With C_i = cos(m_i η), S_i = sin(m_i η):
//   C_i C_j + S_i S_j = cos((m_i − m_j) η),  C_i S_j − S_i C_j = sin((m_j − m_i) η).
fn build(d: usize, m_hat: usize, w: &WeightFunction) -> Result<CostMatrix> {
    let ms = offsets(m_hat);
    let n = ms.len();
    let mom = trig_moments(w, &[0, d, 2 * d], 2 * m_hat)?;
    let dim = 2 * n;
    let mut exact = vec![Dd::ZERO; dim * dim];
    let q = d / 2;
    let parity = if d % 2 == 0 { Parity::Even } else { Parity::Odd };
    for (i, &mi) in ms.iter().enumerate() {
        for (j, &mj) in ms.iter().enumerate() {
            let aa = mom.cos(0, mi - mj);
            let bb = mom.cos(2 * d, mi - mj);
            let ab = match parity {
                // u = [C; −(−1)^q η^d C], v = [S; −(−1)^q η^d S]
                Parity::Even => {
                    let s = if q % 2 == 0 { -1.0 } else { 1.0 };
                    mom.cos(d, mi - mj).mul_f64(s)
                }
                // u = [C; (−1)^q η^d S], v = [S; −(−1)^q η^d C]
                Parity::Odd => {
                    let s = if q % 2 == 0 { 1.0 } else { -1.0 };
                    mom.sin(d, mj - mi).mul_f64(s)
                }
            };
            exact[i * dim + j] = aa;
            exact[(n + i) * dim + n + j] = bb;
            exact[i * dim + n + j] = ab;
            exact[(n + j) * dim + i] = ab;
        }
    }
    let qm = DMatrix::from_fn(dim, dim, |i, j| exact[i * dim + j].to_f64());
    Ok(CostMatrix {
        q: qm,
        parity,
        d,
        m_hat,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use libm::{cos, sin};

    /// Brute-force trapezoid oracle straight from the u, v definition.
    fn trapezoid(d: usize, m_hat: usize, lo: f64, hi: f64, gamma: impl Fn(f64) -> f64, nodes: usize) -> DMatrix<f64> {
        let ms = offsets(m_hat);
        let n = ms.len();
        let q = d / 2;
        let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
        let mut acc = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let h = (hi - lo) / nodes as f64;
        let mut u = vec![0.0; 2 * n];
        let mut v = vec![0.0; 2 * n];
        for k in 0..=nodes {
            let eta = lo + k as f64 * h;
            let wt = if k == 0 || k == nodes { 0.5 * h } else { h } * gamma(eta);
            let ed = libm::pow(eta, d as f64);
            for (i, &m) in ms.iter().enumerate() {
                let (c, s) = (cos(m as f64 * eta), sin(m as f64 * eta));
                u[i] = c;
                v[i] = s;
                if d % 2 == 0 {
                    u[n + i] = -sign * ed * c;
                    v[n + i] = -sign * ed * s;
                } else {
                    u[n + i] = sign * ed * s;
                    v[n + i] = -sign * ed * c;
                }
            }
            for i in 0..2 * n {
                for j in 0..2 * n {
                    acc[(i, j)] += wt * (u[i] * u[j] + v[i] * v[j]);
                }
            }
        }
        acc
    }

    fn rel_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol * scale)
    }

    #[test]
    fn even_d2_m1_entries() {
        let w = WeightFunction::unit(0.0, 3.0).unwrap();
        let c = build_cost_even(2, 1, &w).unwrap();
        assert!((c.q[(1, 1)] - 3.0).abs() < 1e-13);
        assert!((c.q[(1, 4)] - 9.0).abs() < 1e-12);
        assert!(build_cost_even(1, 1, &w).is_err());
    }

    #[test]
    fn odd_d1_m1_entries() {
        let w = WeightFunction::unit(0.0, 3.0).unwrap();
        let c = build_cost_odd(1, 1, &w).unwrap();
        assert!((c.q[(1, 1)] - 3.0).abs() < 1e-13);
        // Both u and v pair the centre a-entry with a vanishing b-entry.
        let t = trapezoid(1, 1, 0.0, 3.0, |_| 1.0, 200_000);
        assert!(c.q[(1, 4)].abs() < 1e-14);
        assert!(t[(1, 4)].abs() < 1e-9);
        assert!(build_cost_odd(2, 1, &w).is_err());
    }

    #[test]
    fn matches_trapezoid_oracle() {
        let w = WeightFunction::unit(0.0, 3.0).unwrap();
        let c = build_cost_even(2, 3, &w).unwrap();
        let t = trapezoid(2, 3, 0.0, 3.0, |_| 1.0, 1_000_000);
        assert!(rel_close(&c.q, &t, 1e-9));

        let w = WeightFunction::exponential(0.0, 3.0, -6.0).unwrap();
        let c = build_cost_odd(1, 2, &w).unwrap();
        let t = trapezoid(1, 2, 0.0, 3.0, |e| libm::exp(-6.0 * e), 1_000_000);
        assert!(rel_close(&c.q, &t, 1e-9));
    }

    #[test]
    fn symmetric_and_psd() {
        let w = WeightFunction::unit(0.0, 3.0).unwrap();
        for d in 1..=4 {
            let c = build_cost(d, 3, &w).unwrap();
            let q = &c.q;
            let scale = q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!((q - q.transpose()).amax() <= 1e-13 * scale);
            let ev = q.clone().symmetric_eigenvalues();
            let tr = q.trace();
            assert!(ev.iter().all(|&l| l >= -1e-10 * tr));
        }
    }
}
