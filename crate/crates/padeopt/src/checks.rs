//! Invariant suite run by `verify`.

use std::f64::consts::PI;

use num_complex::Complex64;
use padeopt_core::optimize::{derive, mirror, SchemeCoefficients};
use padeopt_core::pde::{run_case, Amplitude, Horizon, PdeCase};
use padeopt_core::spectral::{spectral_error, uniform_etas};
use padeopt_core::stability::{circulant_spectrum, stability_function, ButcherTableau};
use padeopt_core::stencil::{SchemeKind, StencilSpec};
use padeopt_core::weight::WeightFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn below(name: &str, value: f64, tolerance: f64, detail: String) -> Check {
        Check {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail,
        }
    }

    pub fn failed(name: &str, detail: String) -> Check {
        Check {
            name: name.into(),
            passed: false,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail,
        }
    }
}

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const PARITY_ERROR_TOL: f64 = 1e-11;
pub const PARITY_SPECTRUM_TOL: f64 = 1e-9;
pub const ORDER_TOL: f64 = 0.3;
pub const POLY_TOL: f64 = 1e-12;

/// Worst violation of `a_{-m} = ±a_m`, `b_{-m} = b_m`.
pub fn symmetry_defect(c: &SchemeCoefficients) -> f64 {
    let sign = if c.spec.d % 2 == 0 { 1.0 } else { -1.0 };
    let m = c.m_hat() as i64;
    (0..=m).fold(0.0f64, |acc, k| {
        acc.max((c.a_at(-k) - sign * c.a_at(k)).abs())
            .max((c.b_at(-k) - c.b_at(k)).abs())
    })
}

/// `max |Im e|` for even `d`, `max |Re e|` for odd `d`, over `samples` points of [0, π].
pub fn parity_defect(c: &SchemeCoefficients, samples: usize) -> f64 {
    uniform_etas(samples, 0.0, PI).iter().fold(0.0f64, |acc, &eta| {
        match spectral_error(c, eta) {
            Ok(e) => acc.max(if c.spec.d % 2 == 0 { e.im.abs() } else { e.re.abs() }),
            Err(_) => f64::INFINITY,
        }
    })
}

/// Central optimized schemes of order 4 that can be derived for `d <= dmax`, `M <= mmax`.
pub fn central_family(dmax: usize, mmax: usize) -> Vec<SchemeCoefficients> {
    let w = WeightFunction::default_unit();
    let combos: Vec<(usize, usize)> = (1..=dmax).flat_map(|d| (1..=mmax).map(move |m| (d, m))).collect();
    combos
        .par_iter()
        .filter_map(|&(d, m)| {
            let spec = StencilSpec::new(d, 4, [m; 4], SchemeKind::Optimized).ok()?;
            derive(&spec, &w).ok()
        })
        .collect()
}

pub fn invariant_checks(schemes: &[SchemeCoefficients], samples: usize) -> Vec<Check> {
    let ids: Vec<String> = schemes.iter().map(|c| c.id()).collect();
    let sym = schemes.iter().map(symmetry_defect).fold(0.0, f64::max);
    let par = schemes.iter().map(|c| parity_defect(c, samples)).fold(0.0, f64::max);
    let mir = schemes
        .iter()
        .map(|c| {
            let back = mirror(&mirror(c));
            c.a.iter().chain(&c.b).zip(back.a.iter().chain(&back.b)).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        })
        .fold(0.0, f64::max);
    let detail = ids.join(" ");
    vec![
        Check::below("coefficient_symmetry", sym, SYMMETRY_TOL, detail.clone()),
        Check::below("spectral_error_parity", par, PARITY_ERROR_TOL, format!("{samples} samples: {detail}")),
        Check::below("mirror_involution", mir, 0.0, detail),
    ]
}

pub fn parity_spectrum_checks() -> Vec<Check> {
    let np = 64;
    let dx = 2.0 * PI / np as f64;
    let family = central_family(2, 3);
    let pair: Vec<SchemeCoefficients> = family.into_iter().filter(|c| c.m_hat() == 3).collect();
    let mut out = Vec::new();
    for (name, betas, imag) in [
        ("parity_spectrum_even", [0.0, 0.2], true),
        ("parity_spectrum_odd", [0.3, 0.0], false),
    ] {
        match circulant_spectrum(&pair, &betas, dx, np) {
            Ok(s) => {
                let v = if imag { s.max_abs_imag() } else { s.max_abs_real() };
                out.push(Check::below(
                    name,
                    v / s.spectral_radius,
                    PARITY_SPECTRUM_TOL,
                    format!("betas {betas:?}, Np {np}, relative to spectral radius"),
                ));
            }
            Err(e) => out.push(Check::failed(name, e.to_string())),
        }
    }
    out
}

pub fn stability_function_check(seed: u64) -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let tab = ButcherTableau::erk4();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let r = 10.0 * rng.gen::<f64>().sqrt();
        let z = Complex64::from_polar(r, 2.0 * PI * rng.gen::<f64>());
        let poly = 1.0 + z + z * z / 2.0 + z.powu(3) / 6.0 + z.powu(4) / 24.0;
        let v = stability_function(&tab, z).map_or(f64::INFINITY, |v| (v - poly).norm());
        worst = worst.max(v / poly.norm().max(1.0));
    }
    Check::below("erk4_stability_polynomial", worst, POLY_TOL, "1000 points in |z| <= 10".into())
}

/// Least-squares slope of `log err` against `log Δx`.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Single-mode advection-diffusion refinement with OFD(3,3,3,3)^4.
pub fn convergence_check() -> Check {
    let w = WeightFunction::default_unit();
    let schemes: Vec<SchemeCoefficients> = match [1, 2]
        .iter()
        .map(|&d| derive(&StencilSpec::new(d, 4, [3; 4], SchemeKind::Optimized)?, &w))
        .collect()
    {
        Ok(s) => s,
        Err(e) => return Check::failed("convergence_order", e.to_string()),
    };
    let t_end = 0.2;
    let res: Result<Vec<(f64, f64)>, _> = [32usize, 64, 128, 256]
        .par_iter()
        .map(|&np| {
            let dx = 2.0 * PI / np as f64;
            let dt0 = 0.01 * dx * dx / 0.2;
            let steps = (t_end / dt0).ceil();
            let case = PdeCase {
                betas: vec![-0.5, 0.2],
                nonlinear: false,
                np,
                amplitude: Amplitude::Single { k: 2, a: 1.0 },
                kmax: 2,
                seed: None,
                tableau: ButcherTableau::erk2(),
                dt: t_end / steps,
                horizon: Horizon::Time(t_end),
                snapshot_every: 0,
            };
            let r = run_case(&case, &schemes)?;
            let err = r
                .simulation
                .field
                .iter()
                .zip(&r.exact)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            Ok::<_, padeopt_core::Error>((dx.ln(), err.ln()))
        })
        .collect();
    match res {
        Ok(pts) => {
            let slope = fit_slope(&pts);
            Check::below(
                "convergence_order",
                (slope - 4.0).abs(),
                ORDER_TOL,
                format!("fitted order {slope:.3} for Np 32..256"),
            )
        }
        Err(e) => Check::failed("convergence_order", e.to_string()),
    }
}

/// The built-in suite.
pub fn default_suite(seed: u64) -> Vec<Check> {
    let mut checks = invariant_checks(&central_family(4, 5), 2048);
    checks.extend(parity_spectrum_checks());
    checks.push(stability_function_check(seed));
    checks.push(convergence_check());
    checks
}
