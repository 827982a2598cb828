//! Modified wavenumber and spectral error of a compact scheme.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optimize::{derive, SchemeCoefficients};
use crate::quadrature::integrate;
use crate::stencil::{SchemeKind, StencilSpec};
use crate::weight::WeightFunction;

/// Denominators below this magnitude are flagged.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

/// `C_m = cos(mη)`, `S_m = sin(mη)` for `m = −M̂..=M̂`.
pub fn trig_vectors(eta: f64, m_hat: usize) -> (Vec<f64>, Vec<f64>) {
    let m = m_hat as i64;
    (-m..=m)
        .map(|k| {
            let x = k as f64 * eta;
            (libm::cos(x), libm::sin(x))
        })
        .unzip()
}

/// `(C + jS)ᵀa` and `(C + jS)ᵀb`, summed over `±m` pairs so that symmetric
/// and skew-symmetric parts cancel before rounding.
fn symbol_parts(c: &SchemeCoefficients, eta: f64) -> (Complex64, Complex64) {
    let mut num = Complex64::new(c.a_at(0), 0.0);
    let mut den = Complex64::new(c.b_at(0), 0.0);
    for m in 1..=c.m_hat() as i64 {
        let (s, co) = (libm::sin(m as f64 * eta), libm::cos(m as f64 * eta));
        let (ap, am) = (c.a_at(m), c.a_at(-m));
        let (bp, bm) = (c.b_at(m), c.b_at(-m));
        num += Complex64::new((ap + am) * co, (ap - am) * s);
        den += Complex64::new((bp + bm) * co, (bp - bm) * s);
    }
    (num, den)
}

/// `(jη̃)^d = ((C + jS)ᵀa) / ((C + jS)ᵀb)`.
pub fn modified_wavenumber_pow(c: &SchemeCoefficients, eta: f64) -> Result<Complex64> {
    let (num, den) = symbol_parts(c, eta);
    if den.norm() < DENOMINATOR_FLOOR {
        return Err(Error::VanishingDenominator { eta });
    }
    Ok(num / den)
}

/// `(jη)^d`.
pub fn exact_symbol(d: usize, eta: f64) -> Complex64 {
    Complex64::new(0.0, eta).powu(d as u32)
}

/// `e(η) = (jη̃)^d − (jη)^d`.
pub fn spectral_error(c: &SchemeCoefficients, eta: f64) -> Result<Complex64> {
    Ok(modified_wavenumber_pow(c, eta)? - exact_symbol(c.spec.d, eta))
}

/// `|(jη̃)^d / (jη)^d − 1|`, taken as 0 at η = 0.
pub fn relative_error(c: &SchemeCoefficients, eta: f64) -> Result<f64> {
    if eta == 0.0 {
        return Ok(0.0);
    }
    let r = modified_wavenumber_pow(c, eta)? / exact_symbol(c.spec.d, eta);
    Ok((r - 1.0).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    MkdxPowD,
    RealErr,
    ImagErr,
    AbsRelErr,
}

impl CurveKind {
    pub fn name(&self) -> &'static str {
        match self {
            CurveKind::MkdxPowD => "mkdx_pow_d",
            CurveKind::RealErr => "real_err",
            CurveKind::ImagErr => "imag_err",
            CurveKind::AbsRelErr => "abs_rel_err",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCurve {
    pub etas: Vec<f64>,
    /// Real-valued kinds keep a zero imaginary part. Flagged samples are NaN.
    pub values: Vec<Complex64>,
    pub kind: CurveKind,
    /// Indices where the denominator fell below [`DENOMINATOR_FLOOR`].
    pub flagged: Vec<usize>,
}

impl SpectralCurve {
    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }
}

/// `n` uniform samples on `[lo, hi]`, endpoints included.
pub fn uniform_etas(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn sample<F>(c: &SchemeCoefficients, etas: &[f64], kind: CurveKind, f: F) -> SpectralCurve
where
    F: Fn(&SchemeCoefficients, f64) -> Result<Complex64>,
{
    let mut flagged = Vec::new();
    let values = etas
        .iter()
        .enumerate()
        .map(|(i, &e)| match f(c, e) {
            Ok(v) => v,
            Err(_) => {
                flagged.push(i);
                Complex64::new(f64::NAN, f64::NAN)
            }
        })
        .collect();
    SpectralCurve {
        etas: etas.to_vec(),
        values,
        kind,
        flagged,
    }
}

pub fn mkdx_curve(c: &SchemeCoefficients, etas: &[f64]) -> SpectralCurve {
    sample(c, etas, CurveKind::MkdxPowD, modified_wavenumber_pow)
}

pub fn relative_error_curve(c: &SchemeCoefficients, etas: &[f64]) -> SpectralCurve {
    sample(c, etas, CurveKind::AbsRelErr, |c, e| {
        relative_error(c, e).map(|v| Complex64::new(v, 0.0))
    })
}

/// `(Re e(η), Im e(η))` sampled on `etas`.
pub fn error_components(c: &SchemeCoefficients, etas: &[f64]) -> (SpectralCurve, SpectralCurve) {
    let re = sample(c, etas, CurveKind::RealErr, |c, e| {
        spectral_error(c, e).map(|v| Complex64::new(v.re, 0.0))
    });
    let im = sample(c, etas, CurveKind::ImagErr, |c, e| {
        spectral_error(c, e).map(|v| Complex64::new(v.im, 0.0))
    });
    (re, im)
}

/// Weighted L2 norm of the true spectral error, `(∫ γ |e|² dη)^{1/2}`.
pub fn spectral_norm(c: &SchemeCoefficients, w: &WeightFunction) -> Result<f64> {
    let bad = Cell::new(None);
    let v = integrate(
        |eta| match spectral_error(c, eta) {
            Ok(e) => e.norm_sqr(),
            Err(_) => {
                if bad.get().is_none() {
                    bad.set(Some(eta));
                }
                0.0
            }
        },
        w,
    )?;
    if let Some(eta) = bad.get() {
        return Err(Error::VanishingDenominator { eta });
    }
    Ok(libm::sqrt(v))
}

/// One named column of a figure table.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Tabulated data behind one figure: a shared first column plus curves.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub id: String,
    pub columns: Vec<Column>,
    pub meta: Vec<(String, String)>,
}

pub const FIGURE_IDS: &[&str] = &[
    "fig:implicitspectralError2",
    "fig:implicitSecondDerivativeL2error",
    "fig:implicitspectralError1",
    "fig:implicitFirstDerivativeL2error",
    "fig:gammaEffect",
    "fig:M3Compare",
    "fig:implicitspectralErrorNonPeriodD2",
    "fig:implicitspectralErrorNonPeriodD1",
];

fn col(name: String, values: Vec<f64>) -> Column {
    Column { name, values }
}

fn eta_col(etas: &[f64]) -> Column {
    col("eta".into(), etas.to_vec())
}

fn opt(d: usize, widths: [usize; 4]) -> Result<StencilSpec> {
    StencilSpec::new(d, 4, widths, SchemeKind::Optimized)
}

/// Data for one of the reproducible figures, sampled at `samples` points
/// of η on [0, 3].
pub fn figure_data(id: &str, samples: usize) -> Result<FigureData> {
    let w = WeightFunction::default_unit();
    let etas = uniform_etas(samples.max(2), 0.0, 3.0);
    let mut meta = vec![
        ("weight".into(), String::from("gamma=1 on [0,3]")),
        ("samples".into(), format!("{}", etas.len())),
    ];
    let columns = match id {
        "fig:implicitspectralError2" | "fig:implicitspectralError1" => {
            let d = if id.ends_with('2') { 2 } else { 1 };
            let mut cols = vec![eta_col(&etas)];
            cols.push(col(
                format!("exact_eta^{d}"),
                etas.iter().map(|e| libm::pow(*e, d as f64)).collect(),
            ));
            let mut schemes = Vec::new();
            for m in 1..=4 {
                schemes.push(derive(&opt(d, [m, m, m, m])?, &w)?);
            }
            schemes.push(derive(&StencilSpec::standard(d, 4, [1, 1, 1, 1])?, &w)?);
            for c in &schemes {
                let mk = mkdx_curve(c, &etas);
                // η̃^d recovered from (jη̃)^d
                let v = mk
                    .values
                    .iter()
                    .map(|z| (*z / Complex64::new(0.0, 1.0).powu(d as u32)).re)
                    .collect();
                cols.push(col(format!("{}:mkdx^{d}", c.id()), v));
                cols.push(col(format!("{}:abs_rel_err", c.id()), relative_error_curve(c, &etas).real()));
            }
            cols
        }
        "fig:implicitSecondDerivativeL2error" | "fig:implicitFirstDerivativeL2error" => {
            let d = if id.contains("Second") { 2 } else { 1 };
            let mut ms = Vec::new();
            let mut norms = Vec::new();
            for m in 1..=5 {
                let c = derive(&opt(d, [m, m, m, m])?, &w)?;
                ms.push(m as f64);
                norms.push(spectral_norm(&c, &w)?);
            }
            vec![col("M".into(), ms), col("l2_norm".into(), norms)]
        }
        "fig:gammaEffect" => {
            let spec = opt(2, [3, 3, 3, 3])?;
            let mut cols = vec![eta_col(&etas)];
            for alpha in [0.0, 6.0, -6.0] {
                let g = WeightFunction::exponential(0.0, 3.0, alpha)?;
                let c = derive(&spec, &g)?;
                cols.push(col(format!("alpha={alpha}"), relative_error_curve(&c, &etas).real()));
            }
            meta[0] = ("weight".into(), "gamma=exp(alpha*eta) on [0,3]".into());
            cols
        }
        "fig:M3Compare" => {
            let mut cols = vec![eta_col(&etas)];
            let mut specs = Vec::new();
            for wd in [[3, 3, 3, 3], [3, 3, 2, 2], [2, 2, 3, 3], [3, 3, 1, 1], [1, 1, 3, 3], [3, 3, 0, 0]] {
                specs.push(opt(2, wd)?);
            }
            specs.push(StencilSpec::standard(2, 10, [3, 3, 2, 2])?);
            for s in &specs {
                let c = derive(s, &w)?;
                cols.push(col(c.id(), relative_error_curve(&c, &etas).real()));
            }
            cols
        }
        "fig:implicitspectralErrorNonPeriodD2" | "fig:implicitspectralErrorNonPeriodD1" => {
            let d = if id.ends_with("D2") { 2 } else { 1 };
            let mut cols = vec![eta_col(&etas)];
            let mut specs = vec![opt(d, [3, 3, 3, 3])?];
            for ml in 4..=6 {
                specs.push(opt(d, [ml, 6 - ml, ml, 6 - ml])?);
            }
            for s in &specs {
                let c = derive(s, &w)?;
                let (re, im) = error_components(&c, &etas);
                cols.push(col(format!("{}:re", c.id()), re.real()));
                cols.push(col(format!("{}:im", c.id()), im.real()));
            }
            cols
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown figure id {other:?}; known: {}",
                FIGURE_IDS.join(", ")
            )))
        }
    };
    Ok(FigureData {
        id: id.into(),
        columns,
        meta,
    })
}

/// Relative-error curves for arbitrary schemes.
pub fn custom_figure(schemes: &[SchemeCoefficients], etas: &[f64]) -> FigureData {
    let mut columns = vec![eta_col(etas)];
    for c in schemes {
        let (re, im) = error_components(c, etas);
        columns.push(col(format!("{}:re", c.id()), re.real()));
        columns.push(col(format!("{}:im", c.id()), im.real()));
        columns.push(col(format!("{}:abs_rel_err", c.id()), relative_error_curve(c, etas).real()));
    }
    FigureData {
        id: "custom".into(),
        columns,
        meta: vec![("samples".into(), format!("{}", etas.len()))],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::derive_optimized;
    use core::f64::consts::PI;

    fn classical() -> SchemeCoefficients {
        derive_optimized(
            &StencilSpec::optimized(2, 4, [1, 1, 1, 1]).unwrap(),
            &WeightFunction::default_unit(),
        )
        .unwrap()
        .coeffs
    }

    #[test]
    fn trig_vector_examples() {
        let (c, s) = trig_vectors(0.0, 2);
        assert!(c.iter().all(|v| *v == 1.0) && s.iter().all(|v| *v == 0.0));
        let (c, s) = trig_vectors(PI, 1);
        for (v, e) in c.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((v - e).abs() < 1e-15);
        }
        assert!(s.iter().all(|v| v.abs() < 1e-15));
        let (c, _) = trig_vectors(PI / 2.0, 2);
        for (v, e) in c.iter().zip([-1.0, 0.0, 1.0, 0.0, -1.0]) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn reversal_identities() {
        for k in 0..200 {
            let eta = PI * ((k as f64 * 0.618_033_988_7) % 1.0);
            let (c, s) = trig_vectors(eta, 4);
            for i in 0..9 {
                assert_eq!(c[i], c[8 - i]);
                assert_eq!(s[i], -s[8 - i]);
            }
        }
    }

    #[test]
    fn classical_symbol_values() {
        let c = classical();
        assert!(modified_wavenumber_pow(&c, 0.0).unwrap().norm() < 1e-15);
        let v = modified_wavenumber_pow(&c, PI / 2.0).unwrap();
        assert!((v.re + 2.4).abs() < 1e-14 && v.im.abs() < 1e-14);
        assert!(spectral_error(&c, 0.0).unwrap().norm() < 1e-15);
    }

    #[test]
    fn vanishing_denominator_is_reported() {
        let mut c = classical();
        c.b = vec![0.5, 1.0, 0.5];
        assert!(matches!(
            modified_wavenumber_pow(&c, PI),
            Err(Error::VanishingDenominator { .. })
        ));
        let (re, _) = error_components(&c, &[0.0, PI]);
        assert_eq!(re.flagged, vec![1]);
    }

    #[test]
    fn empty_weight_norm_is_zero() {
        assert_eq!(spectral_norm(&classical(), &WeightFunction::empty()).unwrap(), 0.0);
    }

    #[test]
    fn unknown_figure() {
        assert!(figure_data("fig:nope", 8).is_err());
    }
}
