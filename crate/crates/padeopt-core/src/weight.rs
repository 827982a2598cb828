//! Piecewise weighting functions γ(η) on [0, π].

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dd::Dd;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Form {
    /// γ = c
    Const(f64),
    /// γ = c·exp(αη)
    Exp { c: f64, alpha: f64 },
    /// Linear interpolation through `(eta[i], gamma[i])`.
    Table { eta: Vec<f64>, gamma: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub form: Form,
}

impl Piece {
    fn eval(&self, eta: f64) -> f64 {
        match &self.form {
            Form::Const(c) => *c,
            Form::Exp { c, alpha } => c * libm::exp(alpha * eta),
            Form::Table { eta: xs, gamma } => interp(xs, gamma, eta),
        }
    }

    fn eval_dd(&self, eta: Dd) -> Dd {
        match &self.form {
            Form::Const(c) => Dd::new(*c),
            Form::Exp { c, alpha } => (eta.mul_f64(*alpha)).exp().mul_f64(*c),
            Form::Table { eta: xs, gamma } => {
                let e = eta.to_f64();
                let k = segment(xs, e);
                let (x0, x1) = (xs[k], xs[k + 1]);
                let t = (eta - Dd::new(x0)) / (Dd::new(x1) - Dd::new(x0));
                Dd::new(gamma[k]) + t * (Dd::new(gamma[k + 1]) - Dd::new(gamma[k]))
            }
        }
    }
}

fn segment(xs: &[f64], x: f64) -> usize {
    let mut k = 0;
    while k + 2 < xs.len() && x > xs[k + 1] {
        k += 1;
    }
    k
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = segment(xs, x);
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + t * (ys[k + 1] - ys[k])
}

/// γ(η) ≥ 0 made of non-overlapping pieces; zero outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    pieces: Vec<Piece>,
}

impl WeightFunction {
    pub fn new(mut pieces: Vec<Piece>) -> Result<WeightFunction> {
        pieces.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(core::cmp::Ordering::Equal));
        for (i, p) in pieces.iter().enumerate() {
            if !(p.lo.is_finite() && p.hi.is_finite()) || p.lo < 0.0 || p.hi > PI + 1e-12 || p.lo >= p.hi {
                return Err(Error::InvalidWeight(format!(
                    "piece [{}, {}] must satisfy 0 <= lo < hi <= pi",
                    p.lo, p.hi
                )));
            }
            if i > 0 && p.lo < pieces[i - 1].hi {
                return Err(Error::InvalidWeight(format!(
                    "pieces [{}, {}] and [{}, {}] overlap",
                    pieces[i - 1].lo,
                    pieces[i - 1].hi,
                    p.lo,
                    p.hi
                )));
            }
            match &p.form {
                Form::Const(c) if !(*c >= 0.0 && c.is_finite()) => {
                    return Err(Error::InvalidWeight(format!("negative constant {c}")))
                }
                Form::Exp { c, alpha } if !(*c >= 0.0 && c.is_finite() && alpha.is_finite()) => {
                    return Err(Error::InvalidWeight(format!("bad exponential c={c}, alpha={alpha}")))
                }
                Form::Table { eta, gamma } => {
                    if eta.len() < 2 || eta.len() != gamma.len() {
                        return Err(Error::InvalidWeight(
                            "table needs at least two samples and matching lengths".into(),
                        ));
                    }
                    if eta.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(Error::InvalidWeight("table eta must increase".into()));
                    }
                    if let Some(g) = gamma.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
                        return Err(Error::InvalidWeight(format!("negative table sample {g}")));
                    }
                    if eta[0] > p.lo || eta[eta.len() - 1] < p.hi {
                        return Err(Error::InvalidWeight(
                            "table samples must cover the piece interval".into(),
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(WeightFunction { pieces })
    }

    /// γ = c on [lo, hi].
    pub fn constant(lo: f64, hi: f64, c: f64) -> Result<WeightFunction> {
        WeightFunction::new(alloc::vec![Piece {
            lo,
            hi,
            form: Form::Const(c),
        }])
    }

    /// γ = 1 on [lo, hi].
    pub fn unit(lo: f64, hi: f64) -> Result<WeightFunction> {
        WeightFunction::constant(lo, hi, 1.0)
    }

    /// γ = exp(αη) on [lo, hi].
    pub fn exponential(lo: f64, hi: f64, alpha: f64) -> Result<WeightFunction> {
        WeightFunction::new(alloc::vec![Piece {
            lo,
            hi,
            form: Form::Exp { c: 1.0, alpha },
        }])
    }

    /// γ = 1 on [0, 3]; the default everywhere.
    pub fn default_unit() -> WeightFunction {
        WeightFunction::unit(0.0, 3.0).expect("valid interval")
    }

    pub fn empty() -> WeightFunction {
        WeightFunction { pieces: Vec::new() }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Smallest interval containing every piece.
    pub fn support(&self) -> Option<(f64, f64)> {
        Some((self.pieces.first()?.lo, self.pieces.last()?.hi))
    }

    pub fn eval(&self, eta: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| eta >= p.lo && eta <= p.hi)
            .map_or(0.0, |p| p.eval(eta))
    }

    /// Pointwise multiple `s·γ`.
    pub fn scaled(&self, s: f64) -> WeightFunction {
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                lo: p.lo,
                hi: p.hi,
                form: match &p.form {
                    Form::Const(c) => Form::Const(c * s),
                    Form::Exp { c, alpha } => Form::Exp { c: c * s, alpha: *alpha },
                    Form::Table { eta, gamma } => Form::Table {
                        eta: eta.clone(),
                        gamma: gamma.iter().map(|g| g * s).collect(),
                    },
                },
            })
            .collect();
        WeightFunction { pieces }
    }

    /// Intervals on which γ is smooth, each with an `f64` and a
    /// double-double evaluator. Tables are split at their knots.
    pub(crate) fn segments(&self) -> Vec<Segment<'_>> {
        let mut out = Vec::new();
        for p in &self.pieces {
            match &p.form {
                Form::Table { eta, .. } => {
                    let mut lo = p.lo;
                    for &k in eta.iter().filter(|&&k| k > p.lo && k < p.hi) {
                        out.push(Segment { lo, hi: k, piece: p });
                        lo = k;
                    }
                    out.push(Segment { lo, hi: p.hi, piece: p });
                }
                _ => out.push(Segment {
                    lo: p.lo,
                    hi: p.hi,
                    piece: p,
                }),
            }
        }
        out
    }
}

#[derive(Clone, Copy)]
pub(crate) struct Segment<'a> {
    pub lo: f64,
    pub hi: f64,
    piece: &'a Piece,
}

impl Segment<'_> {
    pub fn eval(&self, eta: f64) -> f64 {
        self.piece.eval(eta)
    }

    pub fn eval_dd(&self, eta: Dd) -> Dd {
        self.piece.eval_dd(eta)
    }
}
