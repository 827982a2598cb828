//! Regeneration of the optimal-coefficient tables and comparison with golden files.

use std::path::Path;

use padeopt_core::optimize::{derive_optimized, SchemeCoefficients};
use padeopt_core::stencil::StencilSpec;
use padeopt_core::weight::WeightFunction;
use serde::{Deserialize, Serialize};

use crate::formats::{read_csv, FormatError, Result};

pub const TABLE_FILES: &[&str] = &[
    "second_derivative_central.csv",
    "first_derivative_central.csv",
    "second_derivative_left_biased.csv",
    "first_derivative_left_biased.csv",
];

pub const TABLE_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub d: usize,
    pub m_al: usize,
    pub m_ar: usize,
    pub m_bl: usize,
    pub m_br: usize,
    pub m: i64,
    pub a: f64,
    pub b: f64,
}

impl TableRow {
    fn widths(&self) -> [usize; 4] {
        [self.m_al, self.m_ar, self.m_bl, self.m_br]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mismatch {
    pub file: String,
    pub scheme: String,
    pub m: i64,
    pub coefficient: char,
    pub expected: f64,
    pub computed: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableReport {
    pub file: String,
    pub schemes: usize,
    pub entries: usize,
    pub max_diff: f64,
    pub mismatches: Vec<Mismatch>,
}

/// Distinct stencil shapes of a table, in order of first appearance.
pub fn shapes(rows: &[TableRow]) -> Vec<(usize, [usize; 4])> {
    let mut out: Vec<(usize, [usize; 4])> = Vec::new();
    for r in rows {
        let key = (r.d, r.widths());
        if !out.contains(&key) {
            out.push(key);
        }
    }
    out
}

pub fn derive_shape(d: usize, widths: [usize; 4], w: &WeightFunction) -> padeopt_core::Result<SchemeCoefficients> {
    Ok(derive_optimized(&StencilSpec::optimized(d, TABLE_ORDER, widths)?, w)?.coeffs)
}

/// Rows of a regenerated table with the same layout as `golden`.
pub fn regenerate(golden: &[TableRow], w: &WeightFunction) -> padeopt_core::Result<Vec<TableRow>> {
    let mut out = Vec::with_capacity(golden.len());
    for (d, widths) in shapes(golden) {
        let c = derive_shape(d, widths, w)?;
        for r in golden.iter().filter(|r| r.d == d && r.widths() == widths) {
            out.push(TableRow {
                a: c.a_at(r.m),
                b: c.b_at(r.m),
                ..r.clone()
            });
        }
    }
    Ok(out)
}

pub fn compare(file: &str, golden: &[TableRow], computed: &[TableRow], tol: f64) -> TableReport {
    let mut max_diff = 0.0f64;
    let mut mismatches = Vec::new();
    for (g, c) in golden.iter().zip(computed) {
        let scheme = padeopt_core::optimize::scheme_id(
            &StencilSpec::optimized(g.d, TABLE_ORDER, g.widths()).expect("shape already derived"),
        );
        for (coefficient, expected, got) in [('a', g.a, c.a), ('b', g.b, c.b)] {
            let diff = (expected - got).abs();
            max_diff = max_diff.max(diff);
            if diff > tol || diff.is_nan() {
                mismatches.push(Mismatch {
                    file: file.into(),
                    scheme: scheme.clone(),
                    m: g.m,
                    coefficient,
                    expected,
                    computed: got,
                    diff,
                });
            }
        }
    }
    TableReport {
        file: file.into(),
        schemes: shapes(golden).len(),
        entries: 2 * golden.len(),
        max_diff,
        mismatches,
    }
}

pub struct Regenerated {
    pub file: &'static str,
    pub rows: Vec<TableRow>,
    pub report: TableReport,
}

/// Regenerates every table found under `golden_dir` and diffs it.
pub fn check_all(golden_dir: &Path, tol: f64) -> Result<Vec<Regenerated>> {
    if !golden_dir.is_dir() {
        return Err(FormatError::Invalid(format!(
            "golden directory {} does not exist",
            golden_dir.display()
        )));
    }
    let w = WeightFunction::default_unit();
    let mut out = Vec::new();
    for &file in TABLE_FILES {
        let golden: Vec<TableRow> = read_csv(&golden_dir.join(file))?;
        let rows = regenerate(&golden, &w)?;
        let report = compare(file, &golden, &rows, tol);
        out.push(Regenerated { file, rows, report });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(m: i64, a: f64, b: f64) -> TableRow {
        TableRow {
            d: 2,
            m_al: 1,
            m_ar: 1,
            m_bl: 1,
            m_br: 1,
            m,
            a,
            b,
        }
    }

    #[test]
    fn classical_table_matches() {
        let golden = vec![row(0, -2.4, 1.0), row(1, 1.2, 0.1)];
        let rows = regenerate(&golden, &WeightFunction::default_unit()).unwrap();
        let rep = compare("t.csv", &golden, &rows, 1e-12);
        assert!(rep.mismatches.is_empty(), "{rep:?}");
        assert_eq!(rep.schemes, 1);
    }

    #[test]
    fn perturbed_entry_is_reported() {
        let golden = vec![row(0, -2.4, 1.0), row(1, 1.2 + 1e-6, 0.1)];
        let rows = regenerate(&golden, &WeightFunction::default_unit()).unwrap();
        let rep = compare("t.csv", &golden, &rows, 1e-8);
        assert_eq!(rep.mismatches.len(), 1);
        assert_eq!(rep.mismatches[0].m, 1);
        assert_eq!(rep.mismatches[0].coefficient, 'a');
    }

    #[test]
    fn missing_directory() {
        assert!(matches!(
            check_all(Path::new("/nonexistent/golden"), 1e-8),
            Err(FormatError::Invalid(_))
        ));
    }
}
