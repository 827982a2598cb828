//! Optimized and standard derivation of compact-scheme coefficients.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::cost::{build_cost, CostMatrix};
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::stencil::{build_constraints, ConstraintSystem, SchemeKind, StencilSpec, MAX_DEGREE};
use crate::weight::WeightFunction;

/// Scaled KKT condition numbers above this are reported as rank deficient.
pub const CONDITION_LIMIT: f64 = 1e14;

/// Coefficients at augmented length N̂, index `i` ↔ offset `m = i − M̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub spec: StencilSpec,
    pub constraint_residual: f64,
    pub kkt_rank: usize,
}

impl SchemeCoefficients {
    pub fn m_hat(&self) -> usize {
        (self.a.len() - 1) / 2
    }

    pub fn offsets(&self) -> impl Iterator<Item = i64> {
        let m = self.m_hat() as i64;
        -m..=m
    }

    pub fn a_at(&self, m: i64) -> f64 {
        let i = m + self.m_hat() as i64;
        if i < 0 || i as usize >= self.a.len() {
            0.0
        } else {
            self.a[i as usize]
        }
    }

    pub fn b_at(&self, m: i64) -> f64 {
        let i = m + self.m_hat() as i64;
        if i < 0 || i as usize >= self.b.len() {
            0.0
        } else {
            self.b[i as usize]
        }
    }

    /// Short name such as `OFD(3,3,2,2)^4` or `SFD(1,1,1,1)^4`.
    pub fn id(&self) -> String {
        scheme_id(&self.spec)
    }
}

pub fn scheme_id(s: &StencilSpec) -> String {
    let tag = match s.kind {
        SchemeKind::Optimized => "OFD",
        SchemeKind::Standard => "SFD",
    };
    format!(
        "{tag}({},{},{},{})^{}_d{}",
        s.m_al,
        s.m_ar,
        s.m_bl,
        s.m_br,
        s.order(),
        s.d
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub coeffs: SchemeCoefficients,
    /// One multiplier per row of the stacked constraint matrix.
    pub multipliers: Vec<f64>,
    pub residual: f64,
    pub rank_deficient: bool,
    pub condition_estimate: f64,
}

/// Indices of a maximal independent subset of `rows`, in order.
///
/// Returns `None` when a dependent row has a right-hand side that the kept
/// rows cannot reproduce.
fn independent_rows(rows: &[Vec<Dd>], rhs: &[Dd]) -> Option<Vec<usize>> {
    let mut basis: Vec<(usize, Vec<Dd>, Dd)> = Vec::new();
    let mut keep = Vec::new();
    for (idx, (row, h)) in rows.iter().zip(rhs).enumerate() {
        let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs().to_f64()));
        let mut r = row.clone();
        let mut hr = *h;
        for (c, b, hb) in &basis {
            let f = r[*c];
            if f.is_zero() {
                continue;
            }
            for (x, y) in r.iter_mut().zip(b) {
                *x -= f * *y;
            }
            hr -= f * *hb;
        }
        let (piv, big) = r
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.abs().to_f64()))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if big <= 1e-22 * scale.max(f64::MIN_POSITIVE) {
            let hscale = h.abs().to_f64().max(1.0);
            if hr.abs().to_f64() > 1e-20 * hscale {
                return None;
            }
            continue;
        }
        let p = r[piv];
        for x in r.iter_mut() {
            *x = *x / p;
        }
        hr = hr / p;
        basis.push((piv, r, hr));
        keep.push(idx);
    }
    Some(keep)
}

/// Gaussian elimination with partial pivoting, in place; `None` if singular.
fn solve_dd(mut a: Vec<Dd>, mut b: Vec<Dd>, n: usize) -> Option<Vec<Dd>> {
    for k in 0..n {
        let mut piv = k;
        let mut big = a[k * n + k].abs().to_f64();
        for i in k + 1..n {
            let v = a[i * n + k].abs().to_f64();
            if v > big {
                big = v;
                piv = i;
            }
        }
        if big == 0.0 || !big.is_finite() {
            return None;
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let inv = Dd::ONE / a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] * inv;
            if f.is_zero() {
                continue;
            }
            for j in k + 1..n {
                let t = f * a[k * n + j];
                a[i * n + j] -= t;
            }
            let t = f * b[k];
            b[i] -= t;
        }
    }
    let mut x = vec![Dd::ZERO; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k * n + j] * x[j];
        }
        x[k] = s / a[k * n + k];
    }
    Some(x)
}

/// Symmetric power-of-two scaling that brings every row of `|K|` to a unit
/// maximum (Ruiz iteration).
fn equilibrate(k: &DMatrix<f64>) -> Vec<f64> {
    let n = k.nrows();
    let mut s = vec![1.0; n];
    for _ in 0..20 {
        let mut next = s.clone();
        for i in 0..n {
            let mut m = 0.0f64;
            for j in 0..n {
                m = m.max((k[(i, j)] * s[i] * s[j]).abs());
            }
            if m > 0.0 {
                next[i] = s[i] / libm::sqrt(libm::sqrt(m));
            }
        }
        s = next;
    }
    s.iter()
        .map(|v| libm::exp2(libm::round(libm::log2(*v))))
        .collect()
}

fn symmetric_condition(k: &DMatrix<f64>) -> f64 {
    let ev = k.clone().symmetric_eigenvalues();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for l in ev.iter() {
        lo = lo.min(l.abs());
        hi = hi.max(l.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

struct Kkt {
    x: Vec<Dd>,
    lambda: Vec<Dd>,
    condition: f64,
    singular: bool,
}

/// Solve `np` decoupled copies of the KKT system for the kept rows.
fn solve_blocks(cost: &CostMatrix, rows: &[&Vec<Dd>], rhs: &[Dd], np: usize) -> Kkt {
    let n = cost.dim();
    let k = rows.len();
    let nb = n + k;
    let mut block = vec![Dd::ZERO; nb * nb];
    for i in 0..n {
        for j in 0..n {
            block[i * nb + j] = cost.exact(i, j);
        }
    }
    for (r, row) in rows.iter().enumerate() {
        for j in 0..n {
            block[(n + r) * nb + j] = row[j];
            block[j * nb + n + r] = row[j];
        }
    }
    let kf = DMatrix::from_fn(nb, nb, |i, j| block[i * nb + j].to_f64());
    let s = equilibrate(&kf);
    let scaled = DMatrix::from_fn(nb, nb, |i, j| kf[(i, j)] * s[i] * s[j]);
    let condition = symmetric_condition(&scaled);

    let total = nb * np;
    let mut big = vec![Dd::ZERO; total * total];
    let mut rhs_big = vec![Dd::ZERO; total];
    for p in 0..np {
        let off = p * nb;
        for i in 0..nb {
            for j in 0..nb {
                big[(off + i) * total + off + j] = block[i * nb + j].mul_f64(s[i] * s[j]);
            }
        }
        for (r, h) in rhs.iter().enumerate() {
            rhs_big[off + n + r] = h.mul_f64(s[n + r]);
        }
    }
    match solve_dd(big, rhs_big, total) {
        Some(y) => {
            let mut x = Vec::with_capacity(n * np);
            let mut lambda = Vec::with_capacity(k * np);
            for p in 0..np {
                let off = p * nb;
                x.extend((0..n).map(|i| y[off + i].mul_f64(s[i])));
                lambda.extend((0..k).map(|r| y[off + n + r].mul_f64(s[n + r])));
            }
            Kkt {
                x,
                lambda,
                condition,
                singular: false,
            }
        }
        None => {
            // Minimum-norm least squares on the scaled system.
            let rhs_s = DVector::from_fn(nb, |i, _| if i >= n { rhs[i - n].to_f64() * s[i] } else { 0.0 });
            let svd = scaled.svd(true, true);
            let y = svd
                .solve(&rhs_s, 1e-13 * svd.singular_values.max())
                .unwrap_or_else(|_| DVector::zeros(nb));
            let mut x = Vec::new();
            let mut lambda = Vec::new();
            for _ in 0..np {
                x.extend((0..n).map(|i| Dd::new(y[i] * s[i])));
                lambda.extend((0..k).map(|r| Dd::new(y[n + r] * s[n + r])));
            }
            Kkt {
                x,
                lambda,
                condition: f64::INFINITY,
                singular: true,
            }
        }
    }
}

fn largest_feasible_order(spec: &StencilSpec, need_unique: bool) -> Option<usize> {
    let top = MAX_DEGREE.saturating_sub(spec.d);
    for p in (0..=top).rev() {
        let s = spec.with_order(p + 1);
        let Ok(cs) = build_constraints(&s) else { continue };
        let (rows, rhs) = restrict(&cs, need_unique);
        if let Some(keep) = independent_rows(&rows, &rhs) {
            if !need_unique || keep.len() == active_columns(&s).len() {
                return Some(p + 1);
            }
        }
    }
    None
}

fn active_columns(spec: &StencilSpec) -> Vec<usize> {
    let n = spec.n_hat();
    let mut cols = Vec::new();
    for (i, m) in spec.offsets().enumerate() {
        if spec.a_active(m) {
            cols.push(i);
        }
    }
    for (i, m) in spec.offsets().enumerate() {
        if spec.b_active(m) {
            cols.push(n + i);
        }
    }
    cols
}

/// Constraint rows, optionally restricted to the active columns.
fn restrict(cs: &ConstraintSystem, active_only: bool) -> (Vec<Vec<Dd>>, Vec<Dd>) {
    let (rows, rhs) = cs.rows_dd();
    if !active_only {
        return (rows, rhs);
    }
    let cols = active_columns(&cs.spec);
    let rows = rows
        .iter()
        .map(|r| cols.iter().map(|&c| r[c]).collect())
        .collect();
    (rows, rhs)
}

fn to_coeffs(spec: &StencilSpec, x: &[Dd], cs: &ConstraintSystem, kkt_rank: usize) -> SchemeCoefficients {
    let n = spec.n_hat();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for (i, m) in spec.offsets().enumerate() {
        if spec.a_active(m) {
            a[i] = x[i].to_f64();
        }
        if spec.b_active(m) {
            b[i] = x[n + i].to_f64();
        }
    }
    b[spec.m_hat()] = 1.0;
    let constraint_residual = cs.residual(&a, &b);
    SchemeCoefficients {
        a,
        b,
        spec: *spec,
        constraint_residual,
        kkt_rank,
    }
}

/// Minimize `[a; b]ᵀ Q_d [a; b]` subject to the order, normalization and
/// structural-zero constraints of `spec`.
pub fn derive_optimized(spec: &StencilSpec, w: &WeightFunction) -> Result<KktSolution> {
    if spec.kind != SchemeKind::Optimized {
        return Err(Error::InvalidArgument(
            "derive_optimized needs an optimized stencil".into(),
        ));
    }
    let cs = build_constraints(spec)?;
    let cost = build_cost(spec.d, spec.m_hat(), w)?;
    let (rows, rhs) = cs.rows_dd();
    let keep = independent_rows(&rows, &rhs).ok_or(Error::Inconsistent {
        max_order: largest_feasible_order(spec, false),
    })?;
    let kept: Vec<&Vec<Dd>> = keep.iter().map(|&i| &rows[i]).collect();
    let kept_rhs: Vec<Dd> = keep.iter().map(|&i| rhs[i]).collect();
    let sol = solve_blocks(&cost, &kept, &kept_rhs, 1);
    if sol.condition > CONDITION_LIMIT {
        let (lo, hi) = w.support().unwrap_or((0.0, 0.0));
        return Err(Error::RankDeficient {
            m_hat: spec.m_hat(),
            lo,
            hi,
            condition: sol.condition,
        });
    }
    let n = cost.dim();

    // Residuals of the extended-precision solution.
    let mut stat = 0.0f64;
    for i in 0..n {
        let mut acc = Dd::ZERO;
        for j in 0..n {
            acc += cost.exact(i, j) * sol.x[j];
        }
        for (r, row) in kept.iter().enumerate() {
            acc += row[i] * sol.lambda[r];
        }
        stat = stat.max(acc.abs().to_f64());
    }
    let mut primal = 0.0f64;
    for (row, h) in kept.iter().zip(&kept_rhs) {
        let mut acc = -*h;
        for j in 0..n {
            acc += row[j] * sol.x[j];
        }
        primal = primal.max(acc.abs().to_f64());
    }

    let dropped = keep.len() < rows.len();
    let multipliers = if dropped {
        min_norm_multipliers(&cost, &rows, &sol.x)
    } else {
        sol.lambda.iter().map(|v| v.to_f64()).collect()
    };
    let kkt_rank = n + keep.len();
    let coeffs = to_coeffs(spec, &sol.x, &cs, kkt_rank);
    Ok(KktSolution {
        coeffs,
        multipliers,
        residual: stat.max(primal),
        rank_deficient: dropped || sol.singular,
        condition_estimate: sol.condition,
    })
}

/// Least-squares multipliers of minimum norm for `Gᵀλ = −Qx` over all rows.
fn min_norm_multipliers(cost: &CostMatrix, rows: &[Vec<Dd>], x: &[Dd]) -> Vec<f64> {
    let n = cost.dim();
    let gt = DMatrix::from_fn(n, rows.len(), |i, r| rows[r][i].to_f64());
    let rhs = DVector::from_fn(n, |i, _| {
        let mut acc = Dd::ZERO;
        for j in 0..n {
            acc += cost.exact(i, j) * x[j];
        }
        -acc.to_f64()
    });
    let svd = gt.svd(true, true);
    let tol = 1e-12 * svd.singular_values.max();
    svd.solve(&rhs, tol)
        .map(|v| v.iter().copied().collect())
        .unwrap_or_else(|_| vec![0.0; rows.len()])
}

/// Solve the matching conditions directly on the active coefficients.
pub fn derive_standard(spec: &StencilSpec) -> Result<SchemeCoefficients> {
    if spec.kind != SchemeKind::Standard {
        return Err(Error::InvalidArgument(
            "derive_standard needs a standard stencil".into(),
        ));
    }
    let cs = build_constraints(spec)?;
    let (rows, rhs) = restrict(&cs, true);
    let cols = active_columns(spec);
    let keep = independent_rows(&rows, &rhs).ok_or(Error::Inconsistent {
        max_order: largest_feasible_order(spec, true),
    })?;
    if keep.len() < cols.len() {
        return Err(Error::Underdetermined {
            max_order: largest_feasible_order(spec, true),
        });
    }
    let m = cols.len();
    let mut a = vec![Dd::ZERO; m * m];
    let mut h = vec![Dd::ZERO; m];
    for (r, &i) in keep.iter().enumerate() {
        for j in 0..m {
            a[r * m + j] = rows[i][j];
        }
        h[r] = rhs[i];
    }
    let y = solve_dd(a, h, m).ok_or(Error::Underdetermined {
        max_order: largest_feasible_order(spec, true),
    })?;
    let mut x = vec![Dd::ZERO; 2 * spec.n_hat()];
    for (k, &c) in cols.iter().enumerate() {
        x[c] = y[k];
    }
    Ok(to_coeffs(spec, &x, &cs, m))
}

/// Either derivation path, chosen by `spec.kind`.
pub fn derive(spec: &StencilSpec, w: &WeightFunction) -> Result<SchemeCoefficients> {
    match spec.kind {
        SchemeKind::Optimized => derive_optimized(spec, w).map(|s| s.coeffs),
        SchemeKind::Standard => derive_standard(spec),
    }
}

/// The complementary scheme with left and right swapped.
pub fn mirror(c: &SchemeCoefficients) -> SchemeCoefficients {
    let sign = if c.spec.d % 2 == 0 { 1.0 } else { -1.0 };
    let a = c.a.iter().rev().map(|v| sign * v + 0.0).collect();
    let b = c.b.iter().rev().copied().collect();
    SchemeCoefficients {
        a,
        b,
        spec: c.spec.reflected(),
        constraint_residual: c.constraint_residual,
        kkt_rank: c.kkt_rank,
    }
}

/// `[a; b]ᵀ Q [a; b]`.
pub fn objective(cost: &CostMatrix, c: &SchemeCoefficients) -> f64 {
    cost.quadratic_form(&c.a, &c.b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// ‖Qx + Gᵀλ‖∞
    pub stationarity: f64,
    /// ‖Gx − h‖∞
    pub primal: f64,
    pub samples: usize,
    /// Feasible perturbations that lowered the cost by more than 1e−12.
    pub violations: usize,
    pub stationary: bool,
    pub feasible: bool,
    pub optimal: bool,
}

/// Recheck a KKT solution and probe optimality with random feasible
/// perturbations drawn from the null space of `g`.
pub fn verify_kkt(sol: &KktSolution, cost: &CostMatrix, g: &DMatrix<f64>, h: &[f64], seed: u64) -> KktReport {
    let n = cost.dim();
    let x: Vec<f64> = sol.coeffs.a.iter().chain(&sol.coeffs.b).copied().collect();
    let mut stat = 0.0f64;
    let mut qx = vec![Dd::ZERO; n];
    for i in 0..n {
        let mut acc = Dd::ZERO;
        for j in 0..n {
            acc += cost.exact(i, j).mul_f64(x[j]);
        }
        qx[i] = acc;
        for (r, l) in sol.multipliers.iter().enumerate() {
            acc += Dd::new(g[(r, i)]).mul_f64(*l);
        }
        stat = stat.max(acc.abs().to_f64());
    }
    let mut primal = 0.0f64;
    for r in 0..g.nrows() {
        let mut acc = Dd::new(-h[r]);
        for j in 0..n {
            acc += Dd::new(g[(r, j)]).mul_f64(x[j]);
        }
        primal = primal.max(acc.abs().to_f64());
    }

    // Pad G to square so the SVD returns a full right basis.
    let padded = DMatrix::from_fn(n.max(g.nrows()), n, |i, j| if i < g.nrows() { g[(i, j)] } else { 0.0 });
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let null: Vec<Vec<f64>> = (0..vt.nrows())
        .filter(|&i| svd.singular_values[i] <= 1e-12 * smax)
        .map(|i| vt.row(i).iter().copied().collect())
        .collect();

    let base = cost.form(&x).to_f64();
    let tol = 1e-12 * base.abs().max(1.0);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let samples = 100;
    let mut violations = 0;
    if !null.is_empty() {
        for s in 0..samples {
            let mag = libm::pow(10.0, -3.0 * (s as f64) / (samples as f64));
            let mut z = vec![0.0; n];
            for v in &null {
                let c: f64 = rng.gen_range(-1.0..1.0);
                for (zi, vi) in z.iter_mut().zip(v) {
                    *zi += c * vi;
                }
            }
            let norm = libm::sqrt(z.iter().map(|v| v * v).sum::<f64>());
            for zi in z.iter_mut() {
                *zi *= mag / norm;
            }
            let mut lin = Dd::ZERO;
            for i in 0..n {
                lin += qx[i].mul_f64(z[i]);
            }
            let delta = lin.mul_f64(2.0) + cost.form(&z);
            if delta.to_f64() < -tol {
                violations += 1;
            }
        }
    }
    let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    KktReport {
        stationarity: stat,
        primal,
        samples: if null.is_empty() { 0 } else { samples },
        violations,
        stationary: stat <= 1e-9 * scale,
        feasible: primal <= 1e-10 * scale,
        optimal: violations == 0,
    }
}

/// Solve the domain-stacked problem over `np` grid points at once: a block
/// diagonal KKT system with one copy of the single-point problem per point.
pub fn derive_stacked(spec: &StencilSpec, w: &WeightFunction, np: usize) -> Result<Vec<SchemeCoefficients>> {
    if np == 0 {
        return Err(Error::InvalidArgument("need at least one grid point".into()));
    }
    let cs = build_constraints(spec)?;
    let cost = build_cost(spec.d, spec.m_hat(), w)?;
    let (rows, rhs) = cs.rows_dd();
    let keep = independent_rows(&rows, &rhs).ok_or(Error::Inconsistent {
        max_order: largest_feasible_order(spec, false),
    })?;
    let kept: Vec<&Vec<Dd>> = keep.iter().map(|&i| &rows[i]).collect();
    let kept_rhs: Vec<Dd> = keep.iter().map(|&i| rhs[i]).collect();
    let sol = solve_blocks(&cost, &kept, &kept_rhs, np);
    let n = cost.dim();
    Ok((0..np)
        .map(|p| to_coeffs(spec, &sol.x[p * n..(p + 1) * n], &cs, n + keep.len()))
        .collect())
}
