//! JSON and CSV representations of specs, weights, tableaux and results.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use padeopt_core::optimize::SchemeCoefficients;
use padeopt_core::pde::{Amplitude, Horizon, PdeCase};
use padeopt_core::stability::ButcherTableau;
use padeopt_core::stencil::{SchemeKind, StencilSpec};
use padeopt_core::weight::{Form, Piece, WeightFunction};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path} already exists (pass --force to overwrite)")]
    Exists { path: PathBuf },
    #[error(transparent)]
    Core(#[from] padeopt_core::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, FormatError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindJson {
    Optimized,
    Standard,
}

/// `{d, order, mAL, mAR, mBL, mBR, kind}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecJson {
    pub d: usize,
    pub order: usize,
    #[serde(rename = "mAL")]
    pub m_al: usize,
    #[serde(rename = "mAR")]
    pub m_ar: usize,
    #[serde(rename = "mBL")]
    pub m_bl: usize,
    #[serde(rename = "mBR")]
    pub m_br: usize,
    #[serde(default = "default_kind")]
    pub kind: KindJson,
}

fn default_kind() -> KindJson {
    KindJson::Optimized
}

impl SpecJson {
    pub fn to_spec(&self) -> Result<StencilSpec> {
        let kind = match self.kind {
            KindJson::Optimized => SchemeKind::Optimized,
            KindJson::Standard => SchemeKind::Standard,
        };
        Ok(StencilSpec::new(
            self.d,
            self.order,
            [self.m_al, self.m_ar, self.m_bl, self.m_br],
            kind,
        )?)
    }
}

impl From<&StencilSpec> for SpecJson {
    fn from(s: &StencilSpec) -> SpecJson {
        SpecJson {
            d: s.d,
            order: s.order(),
            m_al: s.m_al,
            m_ar: s.m_ar,
            m_bl: s.m_bl,
            m_br: s.m_br,
            kind: match s.kind {
                SchemeKind::Optimized => KindJson::Optimized,
                SchemeKind::Standard => KindJson::Standard,
            },
        }
    }
}

/// One weight piece: `{lo, hi, form, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceJson {
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub form: FormJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "params", rename_all = "lowercase")]
pub enum FormJson {
    Const { c: f64 },
    Exp { c: f64, alpha: f64 },
    Table { eta: Vec<f64>, gamma: Vec<f64> },
}

pub fn weight_from_json(pieces: &[PieceJson]) -> Result<WeightFunction> {
    let pieces = pieces
        .iter()
        .map(|p| Piece {
            lo: p.lo,
            hi: p.hi,
            form: match &p.form {
                FormJson::Const { c } => Form::Const(*c),
                FormJson::Exp { c, alpha } => Form::Exp { c: *c, alpha: *alpha },
                FormJson::Table { eta, gamma } => Form::Table {
                    eta: eta.clone(),
                    gamma: gamma.clone(),
                },
            },
        })
        .collect();
    Ok(WeightFunction::new(pieces)?)
}

pub fn weight_to_json(w: &WeightFunction) -> Vec<PieceJson> {
    w.pieces()
        .iter()
        .map(|p| PieceJson {
            lo: p.lo,
            hi: p.hi,
            form: match &p.form {
                Form::Const(c) => FormJson::Const { c: *c },
                Form::Exp { c, alpha } => FormJson::Exp { c: *c, alpha: *alpha },
                Form::Table { eta, gamma } => FormJson::Table {
                    eta: eta.clone(),
                    gamma: gamma.clone(),
                },
            },
        })
        .collect()
}

/// Optional weight; absent means γ = 1 on [0, 3].
pub fn weight_or_default(w: &Option<Vec<PieceJson>>) -> Result<WeightFunction> {
    match w {
        Some(p) => weight_from_json(p),
        None => Ok(WeightFunction::default_unit()),
    }
}

/// `{name, A, b, c}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableauJson {
    pub name: String,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// A shipped tableau by name, or an inline one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableauRef {
    Named(String),
    Inline(TableauJson),
}

impl TableauRef {
    pub fn resolve(&self) -> Result<ButcherTableau> {
        match self {
            TableauRef::Named(n) => Ok(ButcherTableau::by_name(n)?),
            TableauRef::Inline(t) => Ok(ButcherTableau::new(&t.name, t.a.clone(), t.b.clone(), t.c.clone())?),
        }
    }
}

impl From<&ButcherTableau> for TableauJson {
    fn from(t: &ButcherTableau) -> TableauJson {
        TableauJson {
            name: t.name.clone(),
            a: t.a.clone(),
            b: t.b.clone(),
            c: t.c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AmplitudeJson {
    Constant { a: f64 },
    Power { scale: f64, exponent: f64 },
    Single { k: usize, a: f64 },
}

impl From<&AmplitudeJson> for Amplitude {
    fn from(a: &AmplitudeJson) -> Amplitude {
        match *a {
            AmplitudeJson::Constant { a } => Amplitude::Constant(a),
            AmplitudeJson::Power { scale, exponent } => Amplitude::Power { scale, exponent },
            AmplitudeJson::Single { k, a } => Amplitude::Single { k, a },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonJson {
    Time(f64),
    Steps(usize),
    Normalized { d: usize, value: f64 },
    Eddy(f64),
}

impl From<HorizonJson> for Horizon {
    fn from(h: HorizonJson) -> Horizon {
        match h {
            HorizonJson::Time(t) => Horizon::Time(t),
            HorizonJson::Steps(n) => Horizon::Steps(n),
            HorizonJson::Normalized { d, value } => Horizon::Normalized { d, value },
            HorizonJson::Eddy(v) => Horizon::Eddy(v),
        }
    }
}

/// Time step given directly or through a CFL number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepJson {
    Dt(f64),
    Cfl { d: usize, r: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseJson {
    pub betas: Vec<f64>,
    #[serde(default)]
    pub nonlinear: bool,
    pub np: usize,
    pub amplitude: AmplitudeJson,
    pub kmax: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub step: StepJson,
    pub horizon: HorizonJson,
    #[serde(default)]
    pub snapshot_every: usize,
}

impl CaseJson {
    pub fn to_case(&self, tableau: ButcherTableau) -> Result<PdeCase> {
        let mut case = PdeCase {
            betas: self.betas.clone(),
            nonlinear: self.nonlinear,
            np: self.np,
            amplitude: (&self.amplitude).into(),
            kmax: self.kmax,
            seed: self.seed,
            tableau,
            dt: 1.0,
            horizon: self.horizon.into(),
            snapshot_every: self.snapshot_every,
        };
        case.dt = match self.step {
            StepJson::Dt(dt) => dt,
            StepJson::Cfl { d, r } => case.dt_for_cfl(r, d)?,
        };
        case.validate()?;
        Ok(case)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub m: i64,
    pub a: f64,
    pub b: f64,
}

pub fn coefficient_rows(c: &SchemeCoefficients) -> Vec<CoefficientRow> {
    c.offsets()
        .enumerate()
        .map(|(i, m)| CoefficientRow { m, a: c.a[i], b: c.b[i] })
        .collect()
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json {
        path: path.into(),
        source,
    })
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|source| FormatError::Csv {
        path: path.into(),
        source,
    })?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|source| FormatError::Csv {
            path: path.into(),
            source,
        })
}

/// Output directory that refuses to clobber files unless `force` is set.
#[derive(Debug, Clone)]
pub struct OutDir {
    pub root: PathBuf,
    pub force: bool,
}

impl OutDir {
    pub fn create(root: &Path, force: bool) -> Result<OutDir> {
        fs::create_dir_all(root).map_err(|source| FormatError::Io {
            path: root.into(),
            source,
        })?;
        Ok(OutDir {
            root: root.into(),
            force,
        })
    }

    fn target(&self, name: &str) -> Result<PathBuf> {
        let p = self.root.join(name);
        if p.exists() && !self.force {
            return Err(FormatError::Exists { path: p });
        }
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let p = self.target(name)?;
        let mut text = serde_json::to_string_pretty(value).map_err(|source| FormatError::Json {
            path: p.clone(),
            source,
        })?;
        text.push('\n');
        fs::write(&p, text).map_err(|source| FormatError::Io {
            path: p.clone(),
            source,
        })?;
        Ok(p)
    }

    pub fn write_csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let p = self.target(name)?;
        let csv_err = |source| FormatError::Csv {
            path: p.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
        for r in rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush().map_err(|source| FormatError::Io {
            path: p.clone(),
            source,
        })?;
        Ok(p)
    }

    /// Header plus rows of raw cells, for tables whose columns vary.
    pub fn write_table(&self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
        let p = self.target(name)?;
        let csv_err = |source| FormatError::Csv {
            path: p.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(|source| FormatError::Io {
            path: p.clone(),
            source,
        })?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_round_trip() {
        let j: SpecJson =
            serde_json::from_str(r#"{"d":2,"order":4,"mAL":3,"mAR":3,"mBL":2,"mBR":2,"kind":"standard"}"#).unwrap();
        let s = j.to_spec().unwrap();
        assert_eq!(s.widths(), [3, 3, 2, 2]);
        assert_eq!(s.kind, SchemeKind::Standard);
        assert_eq!(SpecJson::from(&s), j);
    }

    #[test]
    fn weight_json_forms() {
        let text = r#"[
            {"lo":0.0,"hi":1.0,"form":"const","params":{"c":2.0}},
            {"lo":1.0,"hi":2.0,"form":"exp","params":{"c":1.0,"alpha":-6.0}},
            {"lo":2.0,"hi":3.0,"form":"table","params":{"eta":[2.0,3.0],"gamma":[1.0,0.0]}}
        ]"#;
        let p: Vec<PieceJson> = serde_json::from_str(text).unwrap();
        let w = weight_from_json(&p).unwrap();
        assert_eq!(w.eval(0.5), 2.0);
        assert!((w.eval(2.5) - 0.5).abs() < 1e-15);
        assert_eq!(weight_to_json(&w), p);
        let bad: Vec<PieceJson> =
            serde_json::from_str(r#"[{"lo":0.0,"hi":4.0,"form":"const","params":{"c":1.0}}]"#).unwrap();
        assert!(weight_from_json(&bad).is_err());
    }

    #[test]
    fn tableau_refs() {
        let named: TableauRef = serde_json::from_str(r#""ERK4""#).unwrap();
        assert_eq!(named.resolve().unwrap(), ButcherTableau::erk4());
        let inline: TableauRef =
            serde_json::from_str(r#"{"name":"mid","A":[[0,0],[0.5,0]],"b":[0,1],"c":[0,0.5]}"#).unwrap();
        assert_eq!(inline.resolve().unwrap().stages(), 2);
        let bad: TableauRef = serde_json::from_str(r#"{"name":"x","A":[[0,0],[0.4,0]],"b":[0,1],"c":[0,0.5]}"#).unwrap();
        assert!(bad.resolve().is_err());
    }

    #[test]
    fn case_from_cfl() {
        let j: CaseJson = serde_json::from_str(
            r#"{"betas":[0.0,0.2],"np":64,"amplitude":{"kind":"constant","a":1.0},"kmax":20,
                "seed":3,"step":{"cfl":{"d":2,"r":0.01}},"horizon":{"steps":5}}"#,
        )
        .unwrap();
        let c = j.to_case(ButcherTableau::erk2()).unwrap();
        assert!((c.cfl()[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn out_dir_refuses_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path(), false).unwrap();
        out.write_json("x.json", &1).unwrap();
        assert!(matches!(out.write_json("x.json", &2), Err(FormatError::Exists { .. })));
        let out = OutDir::create(dir.path(), true).unwrap();
        out.write_json("x.json", &2).unwrap();
    }
}
