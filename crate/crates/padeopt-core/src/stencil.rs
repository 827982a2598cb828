//! Stencil shapes and the linear order-of-accuracy constraints.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::dd::Dd;
use crate::error::{Error, Result};

/// Largest `d + p` accepted; factorials beyond this are not exact in `f64`.
pub const MAX_DEGREE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Optimized,
    Standard,
}

/// Shape and target accuracy of a compact scheme.
///
/// `m_al`/`m_ar` bound the function-value (right-hand) stencil to the left
/// and right of the point, `m_bl`/`m_br` the derivative (left-hand) stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StencilSpec {
    pub d: usize,
    pub p: usize,
    pub m_al: usize,
    pub m_ar: usize,
    pub m_bl: usize,
    pub m_br: usize,
    pub kind: SchemeKind,
}

impl StencilSpec {
    /// `order` is the formal accuracy, `p + 1`.
    pub fn new(
        d: usize,
        order: usize,
        [m_al, m_ar, m_bl, m_br]: [usize; 4],
        kind: SchemeKind,
    ) -> Result<StencilSpec> {
        if order == 0 {
            return Err(Error::InvalidSpec("order must be at least 1".into()));
        }
        let s = StencilSpec {
            d,
            p: order - 1,
            m_al,
            m_ar,
            m_bl,
            m_br,
            kind,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn optimized(d: usize, order: usize, widths: [usize; 4]) -> Result<StencilSpec> {
        StencilSpec::new(d, order, widths, SchemeKind::Optimized)
    }

    pub fn standard(d: usize, order: usize, widths: [usize; 4]) -> Result<StencilSpec> {
        StencilSpec::new(d, order, widths, SchemeKind::Standard)
    }

    /// Equal-size central scheme with half-width `m` on both sides.
    pub fn equal(d: usize, order: usize, m: usize, kind: SchemeKind) -> Result<StencilSpec> {
        StencilSpec::new(d, order, [m, m, m, m], kind)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidSpec("derivative order must be positive".into()));
        }
        if self.m_al == 0 && self.m_ar == 0 {
            return Err(Error::InvalidSpec(
                "right-hand stencil needs at least one off-centre point".into(),
            ));
        }
        if self.d + self.p > MAX_DEGREE {
            return Err(Error::InvalidSpec(format!(
                "d + p = {} exceeds {MAX_DEGREE}",
                self.d + self.p
            )));
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.p + 1
    }

    pub fn widths(&self) -> [usize; 4] {
        [self.m_al, self.m_ar, self.m_bl, self.m_br]
    }

    /// Augmented half-width M̂.
    pub fn m_hat(&self) -> usize {
        self.m_al.max(self.m_ar).max(self.m_bl).max(self.m_br)
    }

    /// Augmented size N̂ = 2M̂ + 1.
    pub fn n_hat(&self) -> usize {
        2 * self.m_hat() + 1
    }

    /// Points in the right-hand stencil.
    pub fn n_bar(&self) -> usize {
        self.m_al + self.m_ar + 1
    }

    pub fn is_central(&self) -> bool {
        self.m_al == self.m_ar && self.m_bl == self.m_br
    }

    pub fn is_equal_size(&self) -> bool {
        self.is_central() && self.m_al == self.m_bl
    }

    pub fn is_explicit(&self) -> bool {
        self.m_bl == 0 && self.m_br == 0
    }

    pub fn a_active(&self, m: i64) -> bool {
        m >= -(self.m_al as i64) && m <= self.m_ar as i64
    }

    pub fn b_active(&self, m: i64) -> bool {
        m >= -(self.m_bl as i64) && m <= self.m_br as i64
    }

    /// Offsets −M̂..=M̂.
    pub fn offsets(&self) -> impl Iterator<Item = i64> {
        let mh = self.m_hat() as i64;
        -mh..=mh
    }

    pub fn with_order(&self, order: usize) -> StencilSpec {
        StencilSpec {
            p: order.saturating_sub(1),
            ..*self
        }
    }

    /// Left/right reflection of the stencil shape.
    pub fn reflected(&self) -> StencilSpec {
        StencilSpec {
            m_al: self.m_ar,
            m_ar: self.m_al,
            m_bl: self.m_br,
            m_br: self.m_bl,
            ..*self
        }
    }

    /// Number of active a and b entries (b0 included).
    pub fn active_count(&self) -> usize {
        self.n_bar() + self.m_bl + self.m_br + 1
    }
}

/// One-hot vector of length `n`, hot at one-based index `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeltaVector {
    pub n: usize,
    pub i: usize,
}

impl DeltaVector {
    pub fn new(n: usize, i: usize) -> Result<DeltaVector> {
        if i == 0 || i > n {
            return Err(Error::InvalidArgument(format!("delta index {i} outside 1..={n}")));
        }
        Ok(DeltaVector { n, i })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        v[self.i - 1] = 1.0;
        v
    }
}

/// A single linear constraint over the stacked vector `[a; b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub spec: StencilSpec,
    /// N̂ × (d+p+1).
    pub x: DMatrix<f64>,
    /// N̂ × (d+p+1).
    pub y: DMatrix<f64>,
    /// Normalization and structural-zero rows, duplicates removed.
    pub extra_rows: Vec<ConstraintRow>,
}

fn factorial_dd(n: usize) -> Dd {
    let mut f = Dd::ONE;
    for k in 2..=n {
        f = f.mul_f64(k as f64);
    }
    f
}

/// `m^k / k!` with 0^0 = 1.
fn scaled_power_dd(m: i64, k: usize, scale: bool) -> Dd {
    let v = Dd::from(m).powi(k as u32);
    if scale {
        v / factorial_dd(k)
    } else {
        v
    }
}

impl ConstraintSystem {
    pub fn n_hat(&self) -> usize {
        self.spec.n_hat()
    }

    /// All rows as `([a; b] coefficients, rhs)` in double-double.
    ///
    /// Order rows come first (`aᵀX − bᵀY = 0` column by column), followed
    /// by the extra rows.
    pub fn rows_dd(&self) -> (Vec<Vec<Dd>>, Vec<Dd>) {
        let s = &self.spec;
        let n = s.n_hat();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for j in 0..s.d + s.p + 1 {
            let mut row = vec![Dd::ZERO; 2 * n];
            for (i, m) in s.offsets().enumerate() {
                if j < s.d {
                    row[i] = scaled_power_dd(m, j, false);
                } else {
                    row[i] = scaled_power_dd(m, j, true);
                    row[n + i] = -scaled_power_dd(m, j - s.d, true);
                }
            }
            rows.push(row);
            rhs.push(Dd::ZERO);
        }
        for r in &self.extra_rows {
            rows.push(r.coeffs.iter().map(|&v| Dd::new(v)).collect());
            rhs.push(Dd::new(r.rhs));
        }
        (rows, rhs)
    }

    /// Rows rounded to `f64`, as a matrix `G` and right-hand side `h`.
    pub fn stacked(&self) -> (DMatrix<f64>, Vec<f64>) {
        let (rows, rhs) = self.rows_dd();
        let cols = 2 * self.n_hat();
        let g = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j].to_f64());
        (g, rhs.iter().map(|v| v.to_f64()).collect())
    }

    /// Max-abs residual of `G[a; b] − h` over every row.
    pub fn residual(&self, a: &[f64], b: &[f64]) -> f64 {
        let (rows, rhs) = self.rows_dd();
        let n = self.n_hat();
        let mut worst = 0.0f64;
        for (row, h) in rows.iter().zip(&rhs) {
            let mut acc = -*h;
            for i in 0..n {
                acc += row[i].mul_f64(a[i]);
                acc += row[n + i].mul_f64(b[i]);
            }
            worst = worst.max(acc.abs().to_f64());
        }
        worst
    }
}

/// Assemble `X`, `Y` and the extra rows for a stencil.
pub fn build_constraints(spec: &StencilSpec) -> Result<ConstraintSystem> {
    spec.validate()?;
    let n_eq = spec.d + spec.p + 1;
    if spec.kind == SchemeKind::Standard && n_eq > spec.active_count() {
        return Err(Error::InvalidSpec(format!(
            "{n_eq} order constraints exceed the {} free coefficients",
            spec.active_count()
        )));
    }
    let n = spec.n_hat();
    let mut x = DMatrix::zeros(n, n_eq);
    let mut y = DMatrix::zeros(n, n_eq);
    for (i, m) in spec.offsets().enumerate() {
        for j in 0..n_eq {
            if j < spec.d {
                x[(i, j)] = scaled_power_dd(m, j, false).to_f64();
            } else {
                x[(i, j)] = scaled_power_dd(m, j, true).to_f64();
                y[(i, j)] = scaled_power_dd(m, j - spec.d, true).to_f64();
            }
        }
    }

    let mut extra: Vec<ConstraintRow> = Vec::new();
    let mh = spec.m_hat();
    let mut push = |row: ConstraintRow| {
        if !extra.contains(&row) {
            extra.push(row);
        }
    };
    let mut norm = vec![0.0; 2 * n];
    norm[n + mh] = 1.0;
    push(ConstraintRow {
        coeffs: norm,
        rhs: 1.0,
    });
    for (i, m) in spec.offsets().enumerate() {
        if !spec.a_active(m) {
            let mut r = vec![0.0; 2 * n];
            r[i] = 1.0;
            push(ConstraintRow { coeffs: r, rhs: 0.0 });
        }
    }
    for (i, m) in spec.offsets().enumerate() {
        if !spec.b_active(m) {
            let mut r = vec![0.0; 2 * n];
            r[n + i] = 1.0;
            push(ConstraintRow { coeffs: r, rhs: 0.0 });
        }
    }
    Ok(ConstraintSystem {
        spec: *spec,
        x,
        y,
        extra_rows: extra,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric,
    Skew,
    Neither,
}

/// Classify `v` against its reversal. A zero vector counts as symmetric.
pub fn symmetrize_check(v: &[f64]) -> Result<Symmetry> {
    if v.len() % 2 == 0 {
        return Err(Error::InvalidArgument("vector length must be odd".into()));
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-12 * scale;
    let n = v.len();
    let sym = (0..n).all(|i| (v[i] - v[n - 1 - i]).abs() <= tol);
    if sym {
        return Ok(Symmetry::Symmetric);
    }
    let skew = (0..n).all(|i| (v[i] + v[n - 1 - i]).abs() <= tol);
    Ok(if skew { Symmetry::Skew } else { Symmetry::Neither })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn x_matrix_d2_m1() {
        let s = StencilSpec::optimized(2, 4, [1, 1, 1, 1]).unwrap();
        let c = build_constraints(&s).unwrap();
        assert_eq!(c.x.shape(), (3, 6));
        for i in 0..3 {
            assert_eq!(c.x[(i, 0)], 1.0);
        }
        assert_eq!(c.x[(0, 5)], -1.0 / 120.0);
        assert_eq!(c.x[(1, 5)], 0.0);
        assert_eq!(c.x[(2, 5)], 1.0 / 120.0);
    }

    #[test]
    fn y_matrix_leading_zero_columns() {
        let s = StencilSpec::optimized(1, 4, [2, 2, 2, 2]).unwrap();
        let c = build_constraints(&s).unwrap();
        for i in 0..5 {
            assert_eq!(c.y[(i, 0)], 0.0);
            assert_eq!(c.y[(i, 1)], 1.0);
        }
    }

    #[test]
    fn biased_extra_rows() {
        let s = StencilSpec::optimized(2, 4, [4, 2, 4, 2]).unwrap();
        let c = build_constraints(&s).unwrap();
        assert_eq!(c.extra_rows.len(), 5);
        let zeros = c.extra_rows.iter().filter(|r| r.rhs == 0.0).count();
        assert_eq!(zeros, 4);
    }

    #[test]
    fn standard_rejects_too_many_constraints() {
        let s = StencilSpec::standard(2, 8, [1, 1, 1, 1]).unwrap();
        assert!(matches!(build_constraints(&s), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(StencilSpec::optimized(0, 4, [1, 1, 1, 1]).is_err());
        assert!(StencilSpec::optimized(2, 4, [0, 0, 1, 1]).is_err());
        assert!(StencilSpec::optimized(2, 30, [3, 3, 3, 3]).is_err());
        let s = StencilSpec::optimized(2, 4, [4, 2, 4, 2]).unwrap();
        assert_eq!((s.m_hat(), s.n_hat(), s.n_bar()), (4, 9, 7));
        assert!(!s.is_central());
        assert!(StencilSpec::optimized(1, 4, [3, 3, 2, 2]).unwrap().is_central());
    }

    #[test]
    fn symmetry_classes() {
        assert_eq!(symmetrize_check(&[1.0, 2.0, 1.0]).unwrap(), Symmetry::Symmetric);
        assert_eq!(symmetrize_check(&[-1.0, 0.0, 1.0]).unwrap(), Symmetry::Skew);
        assert_eq!(symmetrize_check(&[1.0, 2.0, 3.0]).unwrap(), Symmetry::Neither);
        assert!(symmetrize_check(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn delta_vector() {
        assert_eq!(DeltaVector::new(3, 2).unwrap().to_vec(), vec![0.0, 1.0, 0.0]);
        assert!(DeltaVector::new(3, 0).is_err());
    }

    #[test]
    fn residual_of_classical_scheme() {
        let s = StencilSpec::optimized(2, 4, [1, 1, 1, 1]).unwrap();
        let c = build_constraints(&s).unwrap();
        let r = c.residual(&[1.2, -2.4, 1.2], &[0.1, 1.0, 0.1]);
        assert!(r < 1e-15, "{r}");
    }
}
