//! Periodic PDE runs on [0, 2π): initial data, Runge–Kutta stepping through
//! the compact operators, exact solutions and spectral diagnostics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::optimize::SchemeCoefficients;
use crate::stability::{assemble_periodic, ButcherTableau};

/// Runs abort once `max |f|` exceeds this.
pub const BLOWUP_LIMIT: f64 = 1e12;
/// Cole–Hopf window half-width in kernel standard deviations.
pub const COLE_HOPF_WINDOW: f64 = 8.0;
pub const COLE_HOPF_MIN_NODES: usize = 4096;
pub const COLE_HOPF_TOL: f64 = 1e-8;
const COLE_HOPF_MAX_NODES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub enum Amplitude {
    /// `A(k) = a` for every `k <= kmax`.
    Constant(f64),
    /// `A(k) = scale · k^exponent`.
    Power { scale: f64, exponent: f64 },
    /// Only mode `k` is present.
    Single { k: usize, a: f64 },
}

impl Amplitude {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            Amplitude::Constant(a) => a,
            Amplitude::Power { scale, exponent } => scale * libm::pow(k as f64, exponent),
            Amplitude::Single { k: k0, a } => {
                if k == k0 {
                    a
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Time(f64),
    Steps(usize),
    /// `t*_d = |β_d| t kmax^d`.
    Normalized { d: usize, value: f64 },
    /// `t* = t / t0` with `t0 = K0/ε0` of the initial field.
    Eddy(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeCase {
    /// `betas[i]` multiplies the derivative of order `i + 1`.
    pub betas: Vec<f64>,
    /// Adds `−f ∂f/∂x`.
    pub nonlinear: bool,
    pub np: usize,
    pub amplitude: Amplitude,
    pub kmax: usize,
    /// Phase generator seed; `None` gives zero phases.
    pub seed: Option<u64>,
    pub tableau: ButcherTableau,
    pub dt: f64,
    pub horizon: Horizon,
    /// Keep a diagnostics frame every this many steps (0: start and end only).
    pub snapshot_every: usize,
}

impl PdeCase {
    pub fn dx(&self) -> f64 {
        2.0 * PI / self.np as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.np).map(|i| i as f64 * self.dx()).collect()
    }

    pub fn beta(&self, d: usize) -> f64 {
        self.betas.get(d.wrapping_sub(1)).copied().unwrap_or(0.0)
    }

    /// Δt giving CFL number `r` for derivative `d`.
    pub fn dt_for_cfl(&self, r: f64, d: usize) -> Result<f64> {
        let b = self.beta(d).abs();
        if b == 0.0 {
            return Err(Error::InvalidArgument(format!("beta_{d} is zero; CFL undefined")));
        }
        Ok(r * libm::pow(self.dx(), d as f64) / b)
    }

    /// `r_d = |β_d| Δt / Δx^d` for each derivative.
    pub fn cfl(&self) -> Vec<f64> {
        self.betas
            .iter()
            .enumerate()
            .map(|(i, b)| b.abs() * self.dt / libm::pow(self.dx(), (i + 1) as f64))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.np < 2 * self.kmax + 1 {
            return Err(Error::GridTooSmall(format!(
                "Np = {} cannot resolve kmax = {}",
                self.np, self.kmax
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.nonlinear && !self.tableau.is_explicit() {
            return Err(Error::Unsupported(format!(
                "implicit tableau {} with the nonlinear term",
                self.tableau.name
            )));
        }
        self.tableau.validate()
    }

    /// `φ_k`, `k = 1..=kmax`, uniform on [0, 2π) from ChaCha20.
    pub fn phases(&self) -> Vec<f64> {
        match self.seed {
            Some(s) => {
                let mut rng = ChaCha20Rng::seed_from_u64(s);
                (0..self.kmax).map(|_| 2.0 * PI * rng.gen::<f64>()).collect()
            }
            None => vec![0.0; self.kmax],
        }
    }

    /// Complex mode weights `c_k = A(k) e^{jφ_k}` so that `f0 = Im Σ c_k e^{jkx}`.
    pub fn modes(&self) -> Vec<Complex64> {
        self.phases()
            .iter()
            .enumerate()
            .map(|(i, &p)| Complex64::from_polar(self.amplitude.at(i + 1), p))
            .collect()
    }

    /// `K0 = Σ A²/2` and `ε0 = Σ k²A²/2` of the continuous initial field.
    pub fn initial_energy(&self) -> (f64, f64) {
        let mut k0 = 0.0;
        let mut e0 = 0.0;
        for k in 1..=self.kmax {
            let a2 = self.amplitude.at(k).powi(2);
            k0 += 0.5 * a2;
            e0 += 0.5 * (k * k) as f64 * a2;
        }
        (k0, e0)
    }

    pub fn end_time(&self) -> Result<f64> {
        let t = match self.horizon {
            Horizon::Time(t) => t,
            Horizon::Steps(n) => n as f64 * self.dt,
            Horizon::Normalized { d, value } => {
                let b = self.beta(d).abs();
                if b == 0.0 {
                    return Err(Error::InvalidArgument(format!("t*_{d} needs beta_{d} != 0")));
                }
                value / (b * libm::pow(self.kmax as f64, d as f64))
            }
            Horizon::Eddy(v) => {
                let (k0, e0) = self.initial_energy();
                if e0 == 0.0 {
                    return Err(Error::InvalidArgument("zero initial dissipation; t0 undefined".into()));
                }
                v * k0 / e0
            }
        };
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative horizon {t}")));
        }
        Ok(t)
    }

    pub fn steps(&self) -> Result<usize> {
        Ok(libm::round(self.end_time()? / self.dt) as usize)
    }
}

/// `f0(x) = Σ A(k) sin(kx + φ_k)` on the grid.
pub fn init_field(case: &PdeCase) -> Vec<f64> {
    let modes = case.modes();
    case.grid().iter().map(|&x| eval_modes(&modes, x)).collect()
}

/// `Im Σ c_k z^k`, `z = e^{jx}`, by Horner.
pub fn eval_modes(modes: &[Complex64], x: f64) -> f64 {
    let z = Complex64::from_polar(1.0, x);
    let mut acc = Complex64::new(0.0, 0.0);
    for c in modes.iter().rev() {
        acc = (acc + c) * z;
    }
    acc.im
}

/// Unnormalized forward DFT, `f̂(k) = Σ_i f_i e^{−jk x_i}`, for `k = 0..np`.
pub fn dft(f: &[f64]) -> Vec<Complex64> {
    let n = f.len();
    let tw: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64)).collect();
    (0..n)
        .map(|k| {
            let mut s = Complex64::new(0.0, 0.0);
            for (i, &v) in f.iter().enumerate() {
                s += tw[(k * i) % n] * v;
            }
            s
        })
        .collect()
}

/// Inverse of [`dft`] (scaled by `1/np`), real part.
pub fn idft(fh: &[Complex64]) -> Vec<f64> {
    let n = fh.len();
    let tw: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64)).collect();
    (0..n)
        .map(|i| {
            let mut s = Complex64::new(0.0, 0.0);
            for (k, v) in fh.iter().enumerate() {
                s += tw[(k * i) % n] * v;
            }
            s.re / n as f64
        })
        .collect()
}

/// One-sided spectrum `f̂(k)`, `k = 1..=kmax`.
pub fn spectrum(f: &[f64], kmax: usize) -> Vec<Complex64> {
    let n = f.len();
    (1..=kmax)
        .map(|k| {
            let mut s = Complex64::new(0.0, 0.0);
            for (i, &v) in f.iter().enumerate() {
                s += Complex64::from_polar(v, -2.0 * PI * ((k * i) % n) as f64 / n as f64);
            }
            s
        })
        .collect()
}

/// `∂^d/∂x^d` on a periodic grid through `B u = A f / Δx^d`.
pub struct PeriodicDerivative {
    pub d: usize,
    pub scheme: SchemeCoefficients,
    np: usize,
    scale: f64,
    a: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
}

impl PeriodicDerivative {
    pub fn new(scheme: &SchemeCoefficients, np: usize) -> Result<PeriodicDerivative> {
        let ops = assemble_periodic(scheme, np)?;
        let dx = 2.0 * PI / np as f64;
        Ok(PeriodicDerivative {
            d: scheme.spec.d,
            scheme: scheme.clone(),
            np,
            scale: 1.0 / libm::pow(dx, scheme.spec.d as f64),
            a: ops.a,
            lu: ops.b.lu(),
        })
    }

    /// Factorization path.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let rhs = &self.a * DVector::from_column_slice(f) * self.scale;
        match self.lu.solve(&rhs) {
            Some(u) => u.iter().copied().collect(),
            None => vec![f64::NAN; self.np],
        }
    }

    /// Circulant path through the stencil symbols.
    pub fn apply_dft(&self, f: &[f64]) -> Vec<f64> {
        let mut fh = dft(f);
        for (k, v) in fh.iter_mut().enumerate() {
            *v *= self.symbol(k);
        }
        idft(&fh)
    }

    /// Eigenvalue of `B⁻¹A/Δx^d` on mode `k`.
    pub fn symbol(&self, k: usize) -> Complex64 {
        let theta = 2.0 * PI * k as f64 / self.np as f64;
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for (i, m) in self.scheme.offsets().enumerate() {
            let e = Complex64::from_polar(1.0, m as f64 * theta);
            num += e * self.scheme.a[i];
            den += e * self.scheme.b[i];
        }
        num / den * self.scale
    }

    /// Dense `B⁻¹A/Δx^d`.
    pub fn matrix(&self) -> DMatrix<f64> {
        self.lu
            .solve(&self.a)
            .map(|m| m * self.scale)
            .unwrap_or_else(|| DMatrix::from_element(self.np, self.np, f64::NAN))
    }
}

/// Right-hand side `Σ β_d ∂^d f − [nonlinear] f ∂f/∂x`.
pub struct SemiDiscrete {
    terms: Vec<(f64, PeriodicDerivative)>,
    first: Option<PeriodicDerivative>,
    nonlinear: bool,
    np: usize,
}

impl SemiDiscrete {
    /// `schemes` holds one scheme per derivative order in use.
    pub fn new(case: &PdeCase, schemes: &[SchemeCoefficients]) -> Result<SemiDiscrete> {
        let find = |d: usize| schemes.iter().find(|s| s.spec.d == d);
        let mut terms = Vec::new();
        for (i, &b) in case.betas.iter().enumerate() {
            let d = i + 1;
            if b == 0.0 {
                continue;
            }
            let s = find(d).ok_or_else(|| Error::InvalidArgument(format!("no scheme supplied for derivative {d}")))?;
            terms.push((b, PeriodicDerivative::new(s, case.np)?));
        }
        let first = match find(1) {
            Some(s) => Some(PeriodicDerivative::new(s, case.np)?),
            None if case.nonlinear => {
                return Err(Error::InvalidArgument("nonlinear term needs a first-derivative scheme".into()))
            }
            None => None,
        };
        Ok(SemiDiscrete {
            terms,
            first,
            nonlinear: case.nonlinear,
            np: case.np,
        })
    }

    pub fn eval(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.np];
        for (b, op) in &self.terms {
            for (o, v) in out.iter_mut().zip(op.apply(f)) {
                *o += b * v;
            }
        }
        if self.nonlinear {
            if let Some(op) = &self.first {
                for ((o, v), fi) in out.iter_mut().zip(op.apply(f)).zip(f) {
                    *o -= fi * v;
                }
            }
        }
        out
    }

    pub fn first_derivative(&self) -> Option<&PeriodicDerivative> {
        self.first.as_ref()
    }

    /// Dense Λ of the linear part.
    pub fn lambda(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.np, self.np);
        for (b, op) in &self.terms {
            m += op.matrix() * *b;
        }
        m
    }

    /// Eigenvalue of the linear part on mode `k`.
    pub fn symbol(&self, k: usize) -> Complex64 {
        self.terms.iter().map(|(b, op)| op.symbol(k) * *b).sum()
    }
}

enum Stepper {
    Explicit,
    /// LU of `I − Δt (A ⊗ Λ)` and Λ itself.
    Implicit { lu: LU<f64, Dyn, Dyn>, lam: DMatrix<f64> },
}

pub struct Integrator {
    pub rhs: SemiDiscrete,
    pub tableau: ButcherTableau,
    pub dt: f64,
    stepper: Stepper,
}

impl Integrator {
    pub fn new(case: &PdeCase, schemes: &[SchemeCoefficients]) -> Result<Integrator> {
        case.validate()?;
        let rhs = SemiDiscrete::new(case, schemes)?;
        let tab = case.tableau.clone();
        let stepper = if tab.is_explicit() {
            Stepper::Explicit
        } else {
            let lam = rhs.lambda();
            let n = case.np;
            let s = tab.stages();
            let mut m = DMatrix::identity(s * n, s * n);
            for i in 0..s {
                for j in 0..s {
                    let aij = tab.a[i][j];
                    if aij == 0.0 {
                        continue;
                    }
                    let mut blk = m.view_mut((i * n, j * n), (n, n));
                    blk -= &lam * (case.dt * aij);
                }
            }
            Stepper::Implicit { lu: m.lu(), lam }
        };
        Ok(Integrator {
            rhs,
            tableau: tab,
            dt: case.dt,
            stepper,
        })
    }

    pub fn step(&self, f: &[f64]) -> Result<Vec<f64>> {
        let s = self.tableau.stages();
        let n = f.len();
        let dt = self.dt;
        let ks: Vec<Vec<f64>> = match &self.stepper {
            Stepper::Explicit => {
                let mut ks: Vec<Vec<f64>> = Vec::with_capacity(s);
                for i in 0..s {
                    let mut y = f.to_vec();
                    for (j, k) in ks.iter().enumerate() {
                        let aij = self.tableau.a[i][j];
                        if aij != 0.0 {
                            for (yv, kv) in y.iter_mut().zip(k) {
                                *yv += dt * aij * kv;
                            }
                        }
                    }
                    ks.push(self.rhs.eval(&y));
                }
                ks
            }
            Stepper::Implicit { lu, lam } => {
                let lf = lam * DVector::from_column_slice(f);
                let rhs = DVector::from_fn(s * n, |r, _| lf[r % n]);
                let k = lu.solve(&rhs).ok_or(Error::SingularOperator { condition: f64::INFINITY })?;
                (0..s).map(|i| k.rows(i * n, n).iter().copied().collect()).collect()
            }
        };
        let mut out = f.to_vec();
        for (i, k) in ks.iter().enumerate() {
            let bi = self.tableau.b[i];
            for (o, kv) in out.iter_mut().zip(k) {
                *o += dt * bi * kv;
            }
        }
        Ok(out)
    }
}

/// `Σ_k e^{−β2 k² t} A(k) sin(k(x + β1 t) + φ_k)` on the grid.
pub fn analytic_advdiff(case: &PdeCase, t: f64) -> Result<Vec<f64>> {
    if case.nonlinear {
        return Err(Error::Unsupported("closed form only covers the linear case".into()));
    }
    if case.betas.iter().skip(2).any(|b| *b != 0.0) {
        return Err(Error::Unsupported("closed form only covers first and second derivatives".into()));
    }
    let (b1, b2) = (case.beta(1), case.beta(2));
    let modes: Vec<Complex64> = case
        .modes()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k = (i + 1) as f64;
            c * libm::exp(-b2 * k * k * t) * Complex64::from_polar(1.0, k * b1 * t)
        })
        .collect();
    Ok(case.grid().iter().map(|&x| eval_modes(&modes, x)).collect())
}

const GL3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

fn gl3<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * GL3_X.iter().zip(&GL3_W).map(|(x, w)| w * f(m + h * x)).sum::<f64>()
}

fn cole_hopf_nodes<F: Fn(f64) -> f64>(f0: &F, beta2: f64, t: f64, x: f64, n: usize) -> f64 {
    let half = COLE_HOPF_WINDOW * libm::sqrt(4.0 * beta2 * t);
    let h = 2.0 * half / n as f64;
    let y = |j: usize| x - half + j as f64 * h;
    let c = n / 2;
    // F(y) − F(x) by cumulative quadrature outward from x.
    let mut big_f = vec![0.0; n + 1];
    for j in c + 1..=n {
        big_f[j] = big_f[j - 1] + gl3(f0, y(j - 1), y(j));
    }
    for j in (0..c).rev() {
        big_f[j] = big_f[j + 1] - gl3(f0, y(j), y(j + 1));
    }
    let logw: Vec<f64> = (0..=n)
        .map(|j| {
            let r = x - y(j);
            -big_f[j] / (2.0 * beta2) - r * r / (4.0 * beta2 * t)
        })
        .collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..=n {
        let sw = if j == 0 || j == n {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let wv = sw * libm::exp(logw[j] - top);
        num += wv * (x - y(j)) / t;
        den += wv;
    }
    num / den
}

/// Burgers solution `f = −2β2 φ_x/φ` at one point for the initial field `f0`,
/// with Simpson node doubling until successive values agree to 1e−8.
pub fn cole_hopf<F: Fn(f64) -> f64>(f0: &F, beta2: f64, t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("Cole-Hopf evaluation needs t > 0, got {t}")));
    }
    if !(beta2 > 0.0) {
        return Err(Error::InvalidArgument(format!("Cole-Hopf evaluation needs beta2 > 0, got {beta2}")));
    }
    let mut n = COLE_HOPF_MIN_NODES;
    let mut prev = cole_hopf_nodes(f0, beta2, t, x, n);
    loop {
        n *= 2;
        let v = cole_hopf_nodes(f0, beta2, t, x, n);
        if (v - prev).abs() <= COLE_HOPF_TOL {
            return Ok(v);
        }
        if n >= COLE_HOPF_MAX_NODES {
            return Err(Error::NonConvergence { last: v, previous: prev });
        }
        prev = v;
    }
}

/// Cole–Hopf solution for the case's initial field at points `xs`.
pub fn analytic_burgers_colehopf(case: &PdeCase, t: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let modes = case.modes();
    let beta2 = case.beta(2);
    let f0 = |y: f64| eval_modes(&modes, y);
    xs.iter().map(|&x| cole_hopf(&f0, beta2, t, x)).collect()
}

/// Exact solution on the grid at time `t`.
pub fn analytic_field(case: &PdeCase, t: f64) -> Result<Vec<f64>> {
    if !case.nonlinear {
        return analytic_advdiff(case, t);
    }
    if t == 0.0 {
        return Ok(init_field(case));
    }
    analytic_burgers_colehopf(case, t, &case.grid())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsFrame {
    pub step: usize,
    pub t: f64,
    /// `t*_d = |β_d| t kmax^d` per derivative.
    pub t_star_d: Vec<f64>,
    /// `t / t0`, `t0 = K0/ε0` of the exact initial field.
    pub t_star: Option<f64>,
    /// Mean of `f²`.
    pub energy: f64,
    /// Mean of `(∂f/∂x)²` with the scheme's first-derivative operator.
    pub dissipation: Option<f64>,
    pub spectrum: Vec<Complex64>,
    pub field: Vec<f64>,
}

fn frame(case: &PdeCase, sd: &SemiDiscrete, step: usize, t: f64, f: &[f64]) -> DiagnosticsFrame {
    let n = f.len() as f64;
    let energy = f.iter().map(|v| v * v).sum::<f64>() / n;
    let dissipation = sd
        .first_derivative()
        .map(|op| op.apply(f).iter().map(|v| v * v).sum::<f64>() / n);
    let (k0, e0) = case.initial_energy();
    DiagnosticsFrame {
        step,
        t,
        t_star_d: case
            .betas
            .iter()
            .enumerate()
            .map(|(i, b)| b.abs() * t * libm::pow(case.kmax as f64, (i + 1) as f64))
            .collect(),
        t_star: if e0 > 0.0 { Some(t * e0 / k0) } else { None },
        energy,
        dissipation,
        spectrum: spectrum(f, case.kmax),
        field: f.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub frames: Vec<DiagnosticsFrame>,
    pub initial: Vec<f64>,
    pub field: Vec<f64>,
    pub steps: usize,
    pub t: f64,
}

/// Integrates the case up to its horizon.
pub fn simulate(case: &PdeCase, schemes: &[SchemeCoefficients]) -> Result<Simulation> {
    let integ = Integrator::new(case, schemes)?;
    let steps = case.steps()?;
    let initial = init_field(case);
    let mut f = initial.clone();
    let mut frames = vec![frame(case, &integ.rhs, 0, 0.0, &f)];
    for n in 1..=steps {
        f = integ.step(&f)?;
        let max_abs = f.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) });
        if max_abs > BLOWUP_LIMIT {
            return Err(Error::RunAborted { step: n, max_abs });
        }
        if n == steps || (case.snapshot_every > 0 && n % case.snapshot_every == 0) {
            frames.push(frame(case, &integ.rhs, n, n as f64 * case.dt, &f));
        }
    }
    Ok(Simulation {
        frames,
        initial,
        field: f,
        steps,
        t: steps as f64 * case.dt,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDiagnostics {
    pub k: usize,
    /// `η = kΔx`.
    pub eta: f64,
    pub fhat: Complex64,
    pub fhat_exact: Complex64,
    /// `|f̂_t / f̂_0|²`.
    pub energy_content: f64,
    /// `| |f̂_t/f̂_t,a|² − 1 |`.
    pub energy_error: f64,
    /// `|f̂_t/f̂_t,a − 1|²`.
    pub combined_error: f64,
    /// `c_n/β1`, linear runs with `β1 ≠ 0` only.
    pub speed: Option<f64>,
    /// `|θ̂_k/θ̂_k,a − 1|` with `θ̂ = arg f̂_t`.
    pub phase_error: f64,
}

fn ratio(a: Complex64, b: Complex64) -> Option<Complex64> {
    if b.norm() == 0.0 || a.norm() == 0.0 && b.norm() == 0.0 {
        None
    } else {
        Some(a / b)
    }
}

/// Per-mode comparison of a numerical field with the exact one at time `t`.
pub fn mode_diagnostics(case: &PdeCase, initial: &[f64], field: &[f64], exact: &[f64], t: f64) -> Vec<ModeDiagnostics> {
    let f0 = spectrum(initial, case.kmax);
    let ft = spectrum(field, case.kmax);
    let fa = spectrum(exact, case.kmax);
    let dx = case.dx();
    let b1 = case.beta(1);
    (0..case.kmax)
        .map(|i| {
            let k = i + 1;
            let r = ratio(ft[i], fa[i]);
            let energy_error = r.map_or(0.0, |r| (r.norm_sqr() - 1.0).abs());
            let combined_error = r.map_or(0.0, |r| (r - 1.0).norm_sqr());
            let speed = if !case.nonlinear && b1 != 0.0 && t > 0.0 {
                // unwrap against the exact advance k β1 t
                r.map(|r| {
                    let adv = k as f64 * b1 * t;
                    (adv + r.arg()) / adv
                })
            } else {
                None
            };
            let phase_error = {
                let ta = fa[i].arg();
                if fa[i].norm() == 0.0 || ta == 0.0 {
                    0.0
                } else {
                    (ft[i].arg() / ta - 1.0).abs()
                }
            };
            ModeDiagnostics {
                k,
                eta: k as f64 * dx,
                fhat: ft[i],
                fhat_exact: fa[i],
                energy_content: ratio(ft[i], f0[i]).map_or(0.0, |r| r.norm_sqr()),
                energy_error,
                combined_error,
                speed,
                phase_error,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub simulation: Simulation,
    pub exact: Vec<f64>,
    pub modes: Vec<ModeDiagnostics>,
}

/// Integrates, evaluates the exact solution at the final time and compares.
pub fn run_case(case: &PdeCase, schemes: &[SchemeCoefficients]) -> Result<RunResult> {
    let sim = simulate(case, schemes)?;
    let exact = analytic_field(case, sim.t)?;
    let modes = mode_diagnostics(case, &sim.initial, &sim.field, &exact, sim.t);
    Ok(RunResult {
        simulation: sim,
        exact,
        modes,
    })
}

/// Explicit tableau whose order matches half the spatial order
/// (4 → ERK2, 10 → ERK5).
pub fn matching_tableau(spatial_order: usize) -> ButcherTableau {
    match spatial_order / 2 {
        0 | 1 => ButcherTableau::forward_euler(),
        2 => ButcherTableau::erk2(),
        3 | 4 => ButcherTableau::erk4(),
        _ => ButcherTableau::erk5(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::derive;
    use crate::stability::stability_function;
    use crate::stencil::{SchemeKind, StencilSpec};
    use crate::weight::WeightFunction;

    fn schemes(m: usize) -> Vec<SchemeCoefficients> {
        let w = WeightFunction::default_unit();
        [1, 2]
            .iter()
            .map(|&d| derive(&StencilSpec::new(d, 4, [m, m, m, m], SchemeKind::Optimized).unwrap(), &w).unwrap())
            .collect()
    }

    fn case(np: usize, kmax: usize, amp: Amplitude) -> PdeCase {
        PdeCase {
            betas: vec![-0.1, 0.2],
            nonlinear: false,
            np,
            amplitude: amp,
            kmax,
            seed: Some(11),
            tableau: ButcherTableau::forward_euler(),
            dt: 1e-3,
            horizon: Horizon::Steps(1),
            snapshot_every: 0,
        }
    }

    #[test]
    fn init_examples() {
        let c = case(16, 3, Amplitude::Constant(0.0));
        assert!(init_field(&c).iter().all(|v| *v == 0.0));
        let mut c = case(16, 1, Amplitude::Constant(1.0));
        c.seed = None;
        for (v, x) in init_field(&c).iter().zip(c.grid()) {
            assert!((v - libm::sin(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn init_spectrum_matches_amplitudes() {
        let c = case(64, 20, Amplitude::Power { scale: 1.0, exponent: -0.5 });
        let f = init_field(&c);
        let s = spectrum(&f, c.kmax);
        for (k, v) in s.iter().enumerate() {
            let expect = c.amplitude.at(k + 1) * 32.0;
            assert!((v.norm() - expect).abs() < 1e-12 * 64.0, "k={}", k + 1);
        }
        let back = idft(&dft(&f));
        assert!(f.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(case(16, 8, Amplitude::Constant(1.0)).validate().is_err());
    }

    #[test]
    fn derivative_paths_agree() {
        let s = schemes(3);
        let c = case(40, 12, Amplitude::Constant(1.0));
        let f = init_field(&c);
        for sc in &s {
            let op = PeriodicDerivative::new(sc, 40).unwrap();
            let a = op.apply(&f);
            let b = op.apply_dft(&f);
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-11 * scale));
        }
    }

    #[test]
    fn fe_step_matches_dense_product() {
        let s = schemes(2);
        let c = case(24, 8, Amplitude::Constant(1.0));
        let integ = Integrator::new(&c, &s).unwrap();
        let f = init_field(&c);
        let lam = integ.rhs.lambda();
        let expect = DVector::from_column_slice(&f) + &lam * DVector::from_column_slice(&f) * c.dt;
        let got = integ.step(&f).unwrap();
        assert!(got.iter().zip(expect.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn zero_operator_leaves_state() {
        let mut c = case(16, 3, Amplitude::Constant(1.0));
        c.betas = vec![0.0, 0.0];
        let integ = Integrator::new(&c, &schemes(1)).unwrap();
        let f = init_field(&c);
        assert_eq!(integ.step(&f).unwrap(), f);
    }

    #[test]
    fn single_mode_amplification() {
        let s = schemes(3);
        for tab in [ButcherTableau::erk2(), ButcherTableau::irk2()] {
            let mut c = case(32, 5, Amplitude::Single { k: 5, a: 1.0 });
            c.tableau = tab.clone();
            c.dt = 2e-3;
            let integ = Integrator::new(&c, &s).unwrap();
            let f = init_field(&c);
            let g = integ.step(&f).unwrap();
            let amp = spectrum(&g, 5)[4] / spectrum(&f, 5)[4];
            let lam = integ.rhs.symbol(5);
            let r = stability_function(&tab, lam * c.dt).unwrap();
            assert!((amp - r).norm() < 1e-10, "{}", tab.name);
        }
    }

    #[test]
    fn nonlinear_implicit_is_rejected() {
        let mut c = case(16, 3, Amplitude::Constant(1.0));
        c.nonlinear = true;
        c.tableau = ButcherTableau::irk2();
        assert!(matches!(Integrator::new(&c, &schemes(1)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn advdiff_closed_form() {
        let c = case(32, 6, Amplitude::Constant(1.0));
        assert_eq!(analytic_advdiff(&c, 0.0).unwrap(), init_field(&c));
        let mut c = case(32, 3, Amplitude::Single { k: 3, a: 1.0 });
        c.betas = vec![0.0, 0.2];
        let s0 = spectrum(&init_field(&c), 3)[2];
        let s1 = spectrum(&analytic_advdiff(&c, 0.5).unwrap(), 3)[2];
        assert!((s1.norm() / s0.norm() - libm::exp(-0.2 * 9.0 * 0.5)).abs() < 1e-13);
        c.betas = vec![0.4, 0.0];
        let s1 = spectrum(&analytic_advdiff(&c, 0.5).unwrap(), 3)[2];
        assert!((s1.norm() - s0.norm()).abs() < 1e-12);
        let adv = (s1 / s0).arg();
        assert!((adv - 3.0 * 0.4 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn cole_hopf_constant_field() {
        let v = cole_hopf(&|_| 0.7, 0.04, 0.3, 1.1).unwrap();
        assert!((v - 0.7).abs() < 1e-10);
        assert!(cole_hopf(&|_| 0.7, 0.04, 0.0, 1.1).is_err());
    }

    #[test]
    fn zero_field_diagnostics_are_zero() {
        let mut c = case(16, 4, Amplitude::Constant(0.0));
        c.horizon = Horizon::Steps(3);
        let r = run_case(&c, &schemes(1)).unwrap();
        for m in &r.modes {
            assert_eq!(m.energy_error, 0.0);
            assert_eq!(m.combined_error, 0.0);
            assert!(m.speed.map_or(true, |s| !s.is_nan()));
        }
    }

    #[test]
    fn blowup_is_reported() {
        let mut c = case(32, 8, Amplitude::Constant(1.0));
        c.dt = 1.0;
        c.horizon = Horizon::Steps(200);
        assert!(matches!(run_case(&c, &schemes(2)), Err(Error::RunAborted { .. })));
    }
}
