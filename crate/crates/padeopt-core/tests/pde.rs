use core::f64::consts::PI;

use padeopt_core::optimize::{derive, SchemeCoefficients};
use padeopt_core::pde::*;
use padeopt_core::stability::ButcherTableau;
use padeopt_core::stencil::{SchemeKind, StencilSpec};
use padeopt_core::weight::WeightFunction;

fn pair(kind: SchemeKind, order: usize, w: [usize; 4]) -> Vec<SchemeCoefficients> {
    let g = WeightFunction::default_unit();
    [1, 2]
        .iter()
        .map(|&d| derive(&StencilSpec::new(d, order, w, kind).unwrap(), &g).unwrap())
        .collect()
}

fn linear_case(np: usize, kmax: usize, amplitude: Amplitude, tab: ButcherTableau) -> PdeCase {
    let dx = 2.0 * PI / np as f64;
    let beta2 = 0.2;
    PdeCase {
        betas: vec![-beta2 / dx, beta2],
        nonlinear: false,
        np,
        amplitude,
        kmax,
        seed: Some(7),
        tableau: tab,
        dt: 0.01 * dx * dx / beta2,
        horizon: Horizon::Time(0.05),
        snapshot_every: 0,
    }
}

#[test]
fn single_mode_convergence_is_fourth_order() {
    let s = pair(SchemeKind::Optimized, 4, [3, 3, 3, 3]);
    let mut pts = Vec::new();
    for np in [32usize, 64, 128, 256] {
        let mut c = linear_case(np, 2, Amplitude::Single { k: 2, a: 1.0 }, ButcherTableau::erk2());
        c.betas = vec![-0.5, 0.2];
        c.horizon = Horizon::Time(0.2);
        let t_end = 0.2;
        let steps = libm::ceil(t_end / c.dt) as usize;
        c.dt = t_end / steps as f64;
        let r = run_case(&c, &s).unwrap();
        let err = r
            .simulation
            .field
            .iter()
            .zip(&r.exact)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        pts.push((libm::log(2.0 * PI / np as f64), libm::log(err)));
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 4.0).abs() <= 0.3, "slope {slope}, {pts:?}");
}

#[test]
fn cole_hopf_mean_is_conserved() {
    let c = PdeCase {
        betas: vec![0.0, 0.04],
        nonlinear: true,
        np: 256,
        amplitude: Amplitude::Power { scale: 1.0, exponent: -0.5 },
        kmax: 20,
        seed: Some(3),
        tableau: ButcherTableau::erk2(),
        dt: 1e-3,
        horizon: Horizon::Time(0.05),
        snapshot_every: 0,
    };
    let f = analytic_field(&c, 0.05).unwrap();
    let mean = f.iter().sum::<f64>() / f.len() as f64;
    assert!(mean.abs() < 1e-8, "{mean}");
}

#[test]
fn cole_hopf_matches_linear_limit_for_small_amplitude() {
    // For tiny amplitudes Burgers reduces to the heat equation.
    let c = PdeCase {
        betas: vec![0.0, 0.04],
        nonlinear: true,
        np: 32,
        amplitude: Amplitude::Single { k: 3, a: 1e-6 },
        kmax: 3,
        seed: None,
        tableau: ButcherTableau::erk2(),
        dt: 1e-3,
        horizon: Horizon::Time(0.5),
        snapshot_every: 0,
    };
    let f = analytic_field(&c, 0.5).unwrap();
    let decay = libm::exp(-0.04 * 9.0 * 0.5);
    for (v, x) in f.iter().zip(c.grid()) {
        assert!((v - 1e-6 * decay * libm::sin(3.0 * x)).abs() < 1e-11);
    }
}

#[test]
fn burgers_solution_converges_to_cole_hopf() {
    let mut errs = Vec::new();
    for np in [128usize, 256] {
        let c = PdeCase {
            betas: vec![0.0, 0.04],
            nonlinear: true,
            np,
            amplitude: Amplitude::Power { scale: 1.0, exponent: -0.5 },
            kmax: 20,
            seed: Some(3),
            tableau: ButcherTableau::erk4(),
            dt: 5e-5,
            horizon: Horizon::Time(0.05),
            snapshot_every: 0,
        };
        let s = pair(SchemeKind::Optimized, 4, [3, 3, 3, 3]);
        let r = run_case(&c, &s).unwrap();
        errs.push(r.simulation.field.iter().zip(&r.exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
    }
    assert!(errs[1] < errs[0] / 10.0 && errs[1] < 1e-4, "{errs:?}");
}
