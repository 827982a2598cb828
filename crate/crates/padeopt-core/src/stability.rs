//! Discrete operators on a grid, their spectra, and Runge–Kutta time-step limits.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optimize::SchemeCoefficients;
use crate::spectral::modified_wavenumber_pow;

/// Operators whose B has a condition estimate above this are rejected.
pub const B_CONDITION_LIMIT: f64 = 1e12;
/// Dense eigenvalue path is limited to this many grid points.
pub const MAX_DENSE_NP: usize = 4096;
/// `|r| <= 1 + STABILITY_SLACK` counts as stable.
pub const STABILITY_SLACK: f64 = 1e-12;
pub const DT_SCAN_MIN: f64 = 1e-12;
pub const DT_SCAN_MAX: f64 = 1e6;
/// Ray probe ceiling in `|z|` for declaring a bound absent.
pub const RAY_PROBE: f64 = 1e8;
const SCAN_PER_DECADE: usize = 40;
const BISECT_RTOL: f64 = 1e-10;

/// Cyclic shift `Φ_k` on `np` points, `(Φ_k)_{ij} = δ((i − j − k) mod np)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftOperator {
    pub np: usize,
    pub k: i64,
}

impl ShiftOperator {
    pub fn new(np: usize, k: i64) -> ShiftOperator {
        ShiftOperator { np, k }
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.np as i64;
        DMatrix::from_fn(self.np, self.np, |i, j| {
            if (i as i64 - j as i64 - self.k).rem_euclid(n) == 0 {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.np as i64;
        (0..self.np)
            .map(|i| v[(i as i64 - self.k).rem_euclid(n) as usize])
            .collect()
    }
}

/// `A^Φ` and `B^Φ` for one derivative order.
#[derive(Debug, Clone)]
pub struct DomainOperators {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub periodic: bool,
    /// Scheme id used on each row.
    pub row_schemes: Vec<String>,
    pub d: usize,
    /// Periodic central stencil, when present; enables the circulant path.
    pub circulant: Option<SchemeCoefficients>,
}

fn place_row(a: &mut DMatrix<f64>, b: &mut DMatrix<f64>, row: usize, c: &SchemeCoefficients, np: usize, periodic: bool) -> Result<()> {
    for (idx, m) in c.offsets().enumerate() {
        let col = row as i64 + m;
        let (av, bv) = (c.a[idx], c.b[idx]);
        let col = if periodic {
            col.rem_euclid(np as i64) as usize
        } else if col < 0 || col >= np as i64 {
            if av != 0.0 || bv != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{} at row {row} reaches column {col} outside the domain",
                    c.id()
                )));
            }
            continue;
        } else {
            col as usize
        };
        a[(row, col)] += av;
        b[(row, col)] += bv;
    }
    Ok(())
}

/// 1-norm condition estimate of `b` through its LU factors.
pub fn condition_estimate(b: &DMatrix<f64>) -> f64 {
    let n = b.nrows();
    let norm1 = |m: &DMatrix<f64>| {
        (0..m.ncols())
            .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let lu = b.clone().lu();
    match lu.solve(&DMatrix::identity(n, n)) {
        Some(inv) if inv.iter().all(|x| x.is_finite()) => norm1(b) * norm1(&inv),
        _ => f64::INFINITY,
    }
}

fn check_b(b: &DMatrix<f64>) -> Result<()> {
    let c = condition_estimate(b);
    if c > B_CONDITION_LIMIT {
        return Err(Error::SingularOperator { condition: c });
    }
    Ok(())
}

/// Periodic placement of one scheme on every row.
pub fn assemble_periodic(c: &SchemeCoefficients, np: usize) -> Result<DomainOperators> {
    let m_hat = c.m_hat();
    if np <= 2 * m_hat {
        return Err(Error::GridTooSmall(format!("Np = {np} needs to exceed 2M\u{302} = {}", 2 * m_hat)));
    }
    let mut a = DMatrix::zeros(np, np);
    let mut b = DMatrix::zeros(np, np);
    for i in 0..np {
        place_row(&mut a, &mut b, i, c, np, true)?;
    }
    check_b(&b)?;
    Ok(DomainOperators {
        a,
        b,
        periodic: true,
        row_schemes: vec![c.id(); np],
        d: c.spec.d,
        circulant: Some(c.clone()),
    })
}

/// Non-periodic placement: `left[i]` serves row `i`, `right[k]` serves row
/// `np − 1 − k`, and `central` fills the interior.
pub fn assemble_bounded(
    central: &SchemeCoefficients,
    left: &[SchemeCoefficients],
    right: &[SchemeCoefficients],
    np: usize,
) -> Result<DomainOperators> {
    let m_hat = central.m_hat();
    if left.len() < m_hat || right.len() < m_hat {
        return Err(Error::InvalidArgument(format!(
            "need {m_hat} boundary schemes per side, got {} and {}",
            left.len(),
            right.len()
        )));
    }
    if np < left.len() + right.len() + 1 {
        return Err(Error::GridTooSmall(format!("Np = {np} leaves no interior points")));
    }
    let d = central.spec.d;
    if left.iter().chain(right).any(|s| s.spec.d != d) {
        return Err(Error::InvalidArgument("boundary schemes approximate a different derivative".into()));
    }
    let mut a = DMatrix::zeros(np, np);
    let mut b = DMatrix::zeros(np, np);
    let mut ids = Vec::with_capacity(np);
    for i in 0..np {
        let s = if i < left.len() {
            &left[i]
        } else if np - 1 - i < right.len() {
            &right[np - 1 - i]
        } else {
            central
        };
        place_row(&mut a, &mut b, i, s, np, false)?;
        ids.push(s.id());
    }
    check_b(&b)?;
    Ok(DomainOperators {
        a,
        b,
        periodic: false,
        row_schemes: ids,
        d,
        circulant: None,
    })
}

impl DomainOperators {
    pub fn np(&self) -> usize {
        self.a.nrows()
    }

    /// `B⁻¹ A` via LU solve.
    pub fn derivative_matrix(&self) -> Result<DMatrix<f64>> {
        self.b
            .clone()
            .lu()
            .solve(&self.a)
            .ok_or(Error::SingularOperator { condition: f64::INFINITY })
    }
}

/// `Λ = Σ_d β_d/Δx^d · B_d⁻¹ A_d`. `ops[i]` pairs with `betas[i]`.
pub fn assemble_lambda(ops: &[DomainOperators], betas: &[f64], dx: f64) -> Result<DMatrix<f64>> {
    if ops.len() != betas.len() || ops.is_empty() {
        return Err(Error::InvalidArgument("one beta per operator required".into()));
    }
    let np = ops[0].np();
    let mut lam = DMatrix::zeros(np, np);
    for (op, &beta) in ops.iter().zip(betas) {
        if op.np() != np {
            return Err(Error::InvalidArgument("operators live on different grids".into()));
        }
        if beta == 0.0 {
            continue;
        }
        let scale = beta / libm::pow(dx, op.d as f64);
        lam += op.derivative_matrix()? * scale;
    }
    Ok(lam)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumClass {
    RealOnly,
    ImaginaryOnly,
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub max_real_part: f64,
    pub spectral_radius: f64,
    pub classification: SpectrumClass,
}

impl SpectrumReport {
    /// Builds the report, zeroing components below `1e-12·ρ` so that
    /// roundoff does not leave modes straddling the imaginary axis.
    pub fn new(mut eigenvalues: Vec<Complex64>) -> SpectrumReport {
        let rho = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let floor = 1e-12 * rho;
        for z in eigenvalues.iter_mut() {
            if z.re.abs() < floor {
                z.re = 0.0;
            }
            if z.im.abs() < floor {
                z.im = 0.0;
            }
        }
        let max_re = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let max_im_abs = eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let max_re_abs = eigenvalues.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let tol = 1e-9 * rho;
        let classification = if max_im_abs <= tol {
            SpectrumClass::RealOnly
        } else if max_re_abs <= tol {
            SpectrumClass::ImaginaryOnly
        } else {
            SpectrumClass::Mixed
        };
        SpectrumReport {
            eigenvalues,
            max_real_part: max_re,
            spectral_radius: rho,
            classification,
        }
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_real(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re.abs()).fold(0.0, f64::max)
    }
}

/// Dense eigenvalues by Hessenberg reduction and shifted QR.
pub fn dense_spectrum(lam: &DMatrix<f64>) -> Result<SpectrumReport> {
    let n = lam.nrows();
    if n > MAX_DENSE_NP {
        return Err(Error::GridTooSmall(format!("dense eigen path capped at {MAX_DENSE_NP} points, got {n}")));
    }
    if lam.iter().all(|x| *x == 0.0) {
        return Ok(SpectrumReport::new(vec![Complex64::new(0.0, 0.0); n]));
    }
    let schur = nalgebra::Schur::try_new(lam.clone(), f64::EPSILON, 100 * n.max(10)).ok_or(Error::EigenFailure)?;
    let ev = schur.complex_eigenvalues();
    Ok(SpectrumReport::new(ev.iter().copied().collect()))
}

/// Eigenvalues of a periodic central Λ from the stencil symbols,
/// `λ_k = Σ_d β_d/Δx^d · (Σ a_m e^{jmθ_k}) / (Σ b_m e^{jmθ_k})`, `θ_k = 2πk/Np`.
pub fn circulant_spectrum(schemes: &[SchemeCoefficients], betas: &[f64], dx: f64, np: usize) -> Result<SpectrumReport> {
    if schemes.len() != betas.len() {
        return Err(Error::InvalidArgument("one beta per scheme required".into()));
    }
    let mut ev = Vec::with_capacity(np);
    for k in 0..np {
        let theta = 2.0 * PI * k as f64 / np as f64;
        let mut z = Complex64::new(0.0, 0.0);
        for (s, &beta) in schemes.iter().zip(betas) {
            if beta == 0.0 {
                continue;
            }
            if np <= 2 * s.m_hat() {
                return Err(Error::GridTooSmall(format!("Np = {np} too small for {}", s.id())));
            }
            z += modified_wavenumber_pow(s, theta)? * (beta / libm::pow(dx, s.spec.d as f64));
        }
        ev.push(z);
    }
    Ok(SpectrumReport::new(ev))
}

/// Spectrum of Λ, through the symbols when every operator is a periodic
/// circulant and densely otherwise.
pub fn lambda_spectrum(ops: &[DomainOperators], betas: &[f64], dx: f64) -> Result<SpectrumReport> {
    if ops.iter().all(|o| o.periodic && o.circulant.is_some()) && !ops.is_empty() {
        let schemes: Vec<SchemeCoefficients> = ops.iter().filter_map(|o| o.circulant.clone()).collect();
        return circulant_spectrum(&schemes, betas, dx, ops[0].np());
    }
    dense_spectrum(&assemble_lambda(ops, betas, dx)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiDiscreteReport {
    /// `max_η Re Σ β_d (jη̃_d)^d`; non-positive means no Fourier mode grows.
    pub worst_margin: f64,
    pub worst_eta: f64,
    pub stable: bool,
}

/// Samples `η ∈ [0, π]` and checks that the real part of the semi-discrete
/// symbol never turns positive.
pub fn semi_discrete_check(schemes: &[SchemeCoefficients], betas: &[f64], samples: usize) -> SemiDiscreteReport {
    let n = samples.max(2);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_eta = 0.0;
    for i in 0..n {
        let eta = PI * i as f64 / (n - 1) as f64;
        let mut re = 0.0;
        for (s, &beta) in schemes.iter().zip(betas) {
            re += match modified_wavenumber_pow(s, eta) {
                Ok(z) => beta * z.re,
                Err(_) => f64::INFINITY,
            };
        }
        if re > worst {
            worst = re;
            worst_eta = eta;
        }
    }
    let scale = betas.iter().fold(0.0f64, |m, b| m.max(b.abs())).max(f64::MIN_POSITIVE);
    SemiDiscreteReport {
        worst_margin: worst,
        worst_eta,
        stable: worst <= 1e-12 * scale,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTableau {
    pub fn new(name: &str, a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Result<ButcherTableau> {
        let t = ButcherTableau {
            name: name.into(),
            a,
            b,
            c,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.b.len();
        if s == 0 {
            return Err(Error::InvalidTableau("no stages".into()));
        }
        if self.c.len() != s || self.a.len() != s || self.a.iter().any(|r| r.len() != s) {
            return Err(Error::InvalidTableau(format!("{}: A, b and c disagree on the stage count", self.name)));
        }
        for (i, row) in self.a.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - self.c[i]).abs() > 1e-12 {
                return Err(Error::InvalidTableau(format!(
                    "{}: row {i} of A sums to {sum}, c = {}",
                    self.name, self.c[i]
                )));
            }
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn is_explicit(&self) -> bool {
        self.a
            .iter()
            .enumerate()
            .all(|(i, r)| r[i..].iter().all(|v| *v == 0.0))
    }

    pub fn forward_euler() -> ButcherTableau {
        ButcherTableau::new("FE", vec![vec![0.0]], vec![1.0], vec![0.0]).unwrap()
    }

    /// Heun's second-order method.
    pub fn erk2() -> ButcherTableau {
        ButcherTableau::new("ERK2", vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5], vec![0.0, 1.0]).unwrap()
    }

    pub fn erk4() -> ButcherTableau {
        ButcherTableau::new(
            "ERK4",
            vec![
                vec![0.0, 0.0, 0.0, 0.0],
                vec![0.5, 0.0, 0.0, 0.0],
                vec![0.0, 0.5, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            vec![0.0, 0.5, 0.5, 1.0],
        )
        .unwrap()
    }

    /// Dormand–Prince fifth-order weights on the first six stages.
    pub fn erk5() -> ButcherTableau {
        let a = vec![
            vec![0.0; 6],
            vec![1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            vec![44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            vec![19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
            vec![9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        ];
        let b = vec![35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
        let c = vec![0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0];
        ButcherTableau::new("ERK5", a, b, c).unwrap()
    }

    pub fn irk2() -> ButcherTableau {
        ButcherTableau::new(
            "IRK2",
            vec![vec![0.0, 0.0], vec![1.0 / 3.0, 1.0 / 3.0]],
            vec![0.25, 0.75],
            vec![0.0, 2.0 / 3.0],
        )
        .unwrap()
    }

    /// Six-digit coefficients, kept exactly as tabulated (the last row of A
    /// and b differ in the sixth digit).
    pub fn irk3() -> ButcherTableau {
        ButcherTableau::new(
            "IRK3",
            vec![
                vec![0.158984, 0.0, 0.0],
                vec![0.420508, 0.158984, 0.0],
                vec![0.348023, 0.492993, 0.158984],
            ],
            vec![0.348022, 0.492994, 0.158984],
            vec![0.158984, 0.579492, 1.0],
        )
        .unwrap()
    }

    pub fn by_name(name: &str) -> Result<ButcherTableau> {
        match name.to_ascii_uppercase().as_str() {
            "FE" => Ok(Self::forward_euler()),
            "ERK2" => Ok(Self::erk2()),
            "ERK4" => Ok(Self::erk4()),
            "ERK5" => Ok(Self::erk5()),
            "IRK2" => Ok(Self::irk2()),
            "IRK3" => Ok(Self::irk3()),
            _ => Err(Error::InvalidArgument(format!("unknown tableau {name:?}"))),
        }
    }

    pub const NAMES: &'static [&'static str] = &["FE", "ERK2", "ERK4", "ERK5", "IRK2", "IRK3"];
}

/// Solves a small dense complex system in place; `None` when singular.
pub(crate) fn solve_complex(mut m: Vec<Vec<Complex64>>, mut rhs: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = rhs.len();
    let scale = m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].norm().total_cmp(&m[j][k].norm()))?;
        if m[p][k].norm() <= 1e-14 * scale {
            return None;
        }
        m.swap(k, p);
        rhs.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let t = m[k][j];
                m[i][j] -= f * t;
            }
            let t = rhs[k];
            rhs[i] -= f * t;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= m[k][j] * x[j];
        }
        x[k] = s / m[k][k];
    }
    Some(x)
}

/// `r(z) = 1 + z bᵀ (I − zA)⁻¹ 1`; `None` at a pole.
pub fn stability_function(tab: &ButcherTableau, z: Complex64) -> Option<Complex64> {
    let s = tab.stages();
    let one = Complex64::new(1.0, 0.0);
    if tab.is_explicit() {
        // forward substitution, exact for explicit tableaux
        let mut k: Vec<Complex64> = Vec::with_capacity(s);
        for i in 0..s {
            let mut acc = one;
            for j in 0..i {
                acc += z * tab.a[i][j] * k[j];
            }
            k.push(acc);
        }
        let mut r = one;
        for i in 0..s {
            r += z * tab.b[i] * k[i];
        }
        return Some(r);
    }
    let m: Vec<Vec<Complex64>> = (0..s)
        .map(|i| {
            (0..s)
                .map(|j| if i == j { one } else { Complex64::new(0.0, 0.0) } - z * tab.a[i][j])
                .collect()
        })
        .collect();
    let y = solve_complex(m, vec![one; s])?;
    let mut r = one;
    for i in 0..s {
        r += z * tab.b[i] * y[i];
    }
    Some(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtBound {
    Bounded(f64),
    /// Stable up to the scan ceiling and along every eigen-ray up to `|z| = probe`.
    Unbounded { probe: f64 },
}

impl DtBound {
    /// Finite value, or infinity when unbounded.
    pub fn value(&self) -> f64 {
        match self {
            DtBound::Bounded(v) => *v,
            DtBound::Unbounded { .. } => f64::INFINITY,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, DtBound::Unbounded { .. })
    }
}

fn stable_at(eigs: &[Complex64], tab: &ButcherTableau, dt: f64) -> bool {
    eigs.iter().all(|&l| match stability_function(tab, l * dt) {
        Some(r) => r.norm() <= 1.0 + STABILITY_SLACK,
        None => false,
    })
}

fn bisect<F: Fn(f64) -> bool>(mut lo: f64, mut hi: f64, ok: F) -> f64 {
    while hi - lo > BISECT_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest Δt with `|r(λ_i Δt)| <= 1 + 1e-12` for every eigenvalue.
///
/// Log scan over `[1e-12, 1e6]`, then bisection on the first crossing.
pub fn max_stable_dt(eigs: &[Complex64], tab: &ButcherTableau) -> DtBound {
    let decades = libm::log10(DT_SCAN_MAX / DT_SCAN_MIN);
    let n = (decades * SCAN_PER_DECADE as f64) as usize;
    let grid = |i: usize| DT_SCAN_MIN * libm::pow(10.0, i as f64 / SCAN_PER_DECADE as f64);
    let ok = |dt: f64| stable_at(eigs, tab, dt);
    if !ok(DT_SCAN_MIN) {
        return DtBound::Bounded(bisect(0.0, DT_SCAN_MIN, ok));
    }
    for i in 1..=n {
        let dt = grid(i);
        if !ok(dt) {
            return DtBound::Bounded(bisect(grid(i - 1), dt, ok));
        }
    }
    // Feasible at the ceiling; walk each eigen-ray out to |z| = RAY_PROBE.
    let mut prev = DT_SCAN_MAX;
    let mut crossing: Option<(f64, f64)> = None;
    for &l in eigs {
        let r = l.norm();
        if r == 0.0 {
            continue;
        }
        let top = RAY_PROBE / r;
        let mut dt = DT_SCAN_MAX;
        let mut last = dt;
        while dt < top {
            dt = (dt * libm::pow(10.0, 1.0 / SCAN_PER_DECADE as f64)).min(top);
            if !ok(dt) {
                if crossing.map_or(true, |(_, h)| dt < h) {
                    crossing = Some((last, dt));
                }
                break;
            }
            last = dt;
        }
        prev = prev.max(last);
    }
    match crossing {
        Some((lo, hi)) => DtBound::Bounded(bisect(lo, hi, ok)),
        None => DtBound::Unbounded { probe: RAY_PROBE },
    }
}

/// Largest Δt with `‖I + ΔtΛ‖₂ <= 1`.
///
/// Uses `‖I + ΔtΛ‖₂ <= 1 ⇔ λ_max(Λ + Λᵀ + Δt ΛᵀΛ) <= 0`, whose left side grows
/// with Δt, and bisects on it with a symmetric eigensolver.
pub fn max_dt_forward_euler_2norm(lam: &DMatrix<f64>) -> DtBound {
    let rho = lam.amax();
    if rho == 0.0 {
        return DtBound::Unbounded { probe: RAY_PROBE };
    }
    let sym = lam + lam.transpose();
    let gram = lam.transpose() * lam;
    let gnorm = gram.amax() * lam.nrows() as f64;
    let ok = |dt: f64| {
        let m = &sym + &gram * dt;
        let top = m.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        top <= 1e-12 * (sym.amax() + dt * gnorm)
    };
    let mut lo = 0.0;
    let mut hi = 1e-12 / rho;
    while ok(hi) {
        lo = hi;
        hi *= 2.0;
        if hi * rho > RAY_PROBE {
            return DtBound::Unbounded { probe: RAY_PROBE };
        }
    }
    DtBound::Bounded(bisect(lo, hi, ok))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CflRow {
    pub dx: f64,
    pub dt: DtBound,
    /// `r_d = |β_d| Δt / Δx^d`, one per scheme; infinite when unbounded.
    pub r: Vec<f64>,
}

/// Maximum stable Δt and the resulting CFL numbers for each Δx, on a
/// periodic grid of `np` points with spacing Δx.
pub fn cfl_sweep(
    schemes: &[SchemeCoefficients],
    tab: &ButcherTableau,
    betas: &[f64],
    dx_list: &[f64],
    np: usize,
) -> Result<Vec<CflRow>> {
    let mut rows = Vec::with_capacity(dx_list.len());
    for &dx in dx_list {
        let spec = circulant_spectrum(schemes, betas, dx, np)?;
        let dt = max_stable_dt(&spec.eigenvalues, tab);
        let r = schemes
            .iter()
            .zip(betas)
            .map(|(s, b)| {
                if *b == 0.0 {
                    0.0
                } else {
                    b.abs() * dt.value() / libm::pow(dx, s.spec.d as f64)
                }
            })
            .collect();
        rows.push(CflRow { dx, dt, r });
    }
    Ok(rows)
}

/// Dense `Λ v`, handy for checks.
pub fn apply(lam: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (lam * DVector::from_column_slice(v)).iter().copied().collect()
}
