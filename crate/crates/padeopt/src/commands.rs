//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use padeopt_core::cost::build_cost;
use padeopt_core::optimize::{derive, derive_optimized, objective, verify_kkt, SchemeCoefficients};
use padeopt_core::pde::{
    analytic_advdiff, analytic_burgers_colehopf, init_field, matching_tableau, mode_diagnostics, simulate, PdeCase,
};
use padeopt_core::spectral::{custom_figure, figure_data, uniform_etas, FigureData, FIGURE_IDS};
use padeopt_core::stability::{
    assemble_lambda, assemble_periodic, cfl_sweep, circulant_spectrum, max_dt_forward_euler_2norm, max_stable_dt,
    semi_discrete_check, ButcherTableau, DtBound, SpectrumClass,
};
use padeopt_core::stencil::{build_constraints, SchemeKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::{default_suite, Check};
use crate::error::{core_exit_code, CliError};
use crate::formats::{
    coefficient_rows, read_json, weight_or_default, CaseJson, OutDir, PieceJson, SpecJson, TableauRef,
};
use crate::tables::{check_all, TABLE_FILES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "padeopt", version, about = "Optimized compact finite-difference schemes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Configuration file (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive scheme coefficients and a KKT report.
    Derive,
    /// Regenerate the coefficient tables and diff them against golden files.
    Tables {
        #[arg(long, default_value = "testdata/reference_tables")]
        golden: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
    /// Modified-wavenumber and spectral-error curves.
    Spectrum {
        /// Figure id; `all` writes every known figure.
        #[arg(long)]
        figure: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Maximum stable time steps, eigen-spectra and CFL sweeps.
    Stability,
    /// Integrate a PDE case and compare with the exact solution.
    Solve,
    /// Run the invariant suite and write a pass/fail report.
    Verify,
}

/// Files written by a command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
}

fn config<T: for<'de> Deserialize<'de>>(common: &Common) -> Result<T, CliError> {
    match &common.config {
        Some(p) => Ok(read_json(p)?),
        None => Err(CliError::Usage("this command needs --config".into())),
    }
}

fn stem(id: &str) -> String {
    let mut s = String::with_capacity(id.len());
    for ch in id.chars() {
        if ch.is_ascii_alphanumeric() {
            s.push(ch);
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_string()
}

fn write_rows<T: Serialize>(out: &OutDir, format: Format, base: &str, rows: &[T]) -> Result<PathBuf, CliError> {
    Ok(match format {
        Format::Csv => out.write_csv(&format!("{base}.csv"), rows)?,
        Format::Json => out.write_json(&format!("{base}.json"), &rows)?,
    })
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(n) = cli.common.threads {
        // ignore a second initialisation from the same process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Derive => cmd_derive(&cli.common),
        Command::Tables { golden, tolerance } => cmd_tables(&cli.common, golden, *tolerance),
        Command::Spectrum { figure, samples } => cmd_spectrum(&cli.common, figure.as_deref(), *samples),
        Command::Stability => cmd_stability(&cli.common),
        Command::Solve => cmd_solve(&cli.common),
        Command::Verify => cmd_verify(&cli.common),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveConfig {
    pub schemes: Vec<SpecJson>,
    #[serde(default)]
    pub weight: Option<Vec<PieceJson>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KktEntry {
    pub id: String,
    pub spec: SpecJson,
    pub objective: f64,
    pub constraint_residual: f64,
    pub kkt_rank: usize,
    pub condition_estimate: Option<f64>,
    pub rank_deficient: Option<bool>,
    pub stationarity: Option<f64>,
    pub primal: Option<f64>,
    pub perturbation_samples: Option<usize>,
    pub violations: Option<usize>,
    pub optimal: Option<bool>,
}

pub fn cmd_derive(common: &Common) -> Result<Outcome, CliError> {
    let cfg: DeriveConfig = config(common)?;
    let w = weight_or_default(&cfg.weight)?;
    let seed = common.seed.unwrap_or(0);
    let mut derived = Vec::new();
    for s in &cfg.schemes {
        let spec = s.to_spec()?;
        let cost = build_cost(spec.d, spec.m_hat(), &w)?;
        let entry = match spec.kind {
            SchemeKind::Optimized => {
                let sol = derive_optimized(&spec, &w)?;
                let (g, h) = build_constraints(&spec)?.stacked();
                let rep = verify_kkt(&sol, &cost, &g, &h, seed);
                let c = sol.coeffs.clone();
                let entry = KktEntry {
                    id: c.id(),
                    spec: s.clone(),
                    objective: objective(&cost, &c),
                    constraint_residual: c.constraint_residual,
                    kkt_rank: c.kkt_rank,
                    condition_estimate: Some(sol.condition_estimate),
                    rank_deficient: Some(sol.rank_deficient),
                    stationarity: Some(rep.stationarity),
                    primal: Some(rep.primal),
                    perturbation_samples: Some(rep.samples),
                    violations: Some(rep.violations),
                    optimal: Some(rep.optimal),
                };
                (c, entry)
            }
            SchemeKind::Standard => {
                let c = derive(&spec, &w)?;
                let entry = KktEntry {
                    id: c.id(),
                    spec: s.clone(),
                    objective: objective(&cost, &c),
                    constraint_residual: c.constraint_residual,
                    kkt_rank: c.kkt_rank,
                    condition_estimate: None,
                    rank_deficient: None,
                    stationarity: None,
                    primal: None,
                    perturbation_samples: None,
                    violations: None,
                    optimal: None,
                };
                (c, entry)
            }
        };
        derived.push(entry);
    }
    let out = OutDir::create(&common.out, common.force)?;
    let mut outcome = Outcome::default();
    for (c, e) in &derived {
        outcome
            .files
            .push(write_rows(&out, common.format, &stem(&e.id), &coefficient_rows(c))?);
    }
    let report: Vec<&KktEntry> = derived.iter().map(|(_, e)| e).collect();
    outcome.files.push(out.write_json("kkt_report.json", &report)?);
    outcome.messages.push(format!("derived {} scheme(s)", derived.len()));
    Ok(outcome)
}

pub fn cmd_tables(common: &Common, golden: &Path, tol: f64) -> Result<Outcome, CliError> {
    let results = check_all(golden, tol)?;
    let out = OutDir::create(&common.out, common.force)?;
    let mut outcome = Outcome::default();
    for r in &results {
        let base = r.file.trim_end_matches(".csv");
        outcome.files.push(write_rows(&out, common.format, base, &r.rows)?);
    }
    let reports: Vec<_> = results.iter().map(|r| &r.report).collect();
    outcome.files.push(out.write_json("tables_report.json", &reports)?);
    let mut bad = 0;
    for r in &reports {
        outcome.messages.push(format!(
            "{}: {} schemes, max diff {:.3e}, {} mismatch(es)",
            r.file,
            r.schemes,
            r.max_diff,
            r.mismatches.len()
        ));
        for m in &r.mismatches {
            outcome.messages.push(format!(
                "  {} m={} {}: expected {} got {:.15} (diff {:.3e})",
                m.scheme, m.m, m.coefficient, m.expected, m.computed, m.diff
            ));
        }
        bad += r.mismatches.len();
    }
    debug_assert_eq!(reports.len(), TABLE_FILES.len());
    if bad > 0 {
        print_messages(&outcome);
        return Err(CliError::CheckFailed(format!(
            "{bad} table entries differ from the golden files by more than {tol:e}"
        )));
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default)]
    pub figure: Option<String>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub schemes: Vec<SpecJson>,
    #[serde(default)]
    pub weight: Option<Vec<PieceJson>>,
    #[serde(default)]
    pub eta: Option<EtaRange>,
}

pub const DEFAULT_SAMPLES: usize = 301;

fn write_figure(out: &OutDir, format: Format, fig: &FigureData) -> Result<PathBuf, CliError> {
    let base = stem(&fig.id);
    Ok(match format {
        Format::Csv => {
            let header: Vec<String> = fig.columns.iter().map(|c| c.name.clone()).collect();
            let n = fig.columns.first().map_or(0, |c| c.values.len());
            let rows: Vec<Vec<String>> = (0..n)
                .map(|i| fig.columns.iter().map(|c| format!("{:e}", c.values[i])).collect())
                .collect();
            out.write_table(&format!("{base}.csv"), &header, &rows)?
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                id: &'a str,
                meta: BTreeMap<&'a str, &'a str>,
                columns: Vec<(&'a str, &'a [f64])>,
            }
            let doc = Doc {
                id: &fig.id,
                meta: fig.meta.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect(),
                columns: fig.columns.iter().map(|c| (c.name.as_str(), c.values.as_slice())).collect(),
            };
            out.write_json(&format!("{base}.json"), &doc)?
        }
    })
}

pub fn cmd_spectrum(common: &Common, figure: Option<&str>, samples: Option<usize>) -> Result<Outcome, CliError> {
    let mut cfg: SpectrumConfig = match &common.config {
        Some(p) => read_json(p)?,
        None => SpectrumConfig::default(),
    };
    if figure.is_some() {
        cfg.figure = figure.map(String::from);
    }
    if samples.is_some() {
        cfg.samples = samples;
    }
    let n = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    let mut figs = Vec::new();
    match cfg.figure.as_deref() {
        Some("all") => {
            let all: Result<Vec<FigureData>, _> = FIGURE_IDS.par_iter().map(|id| figure_data(id, n)).collect();
            figs.extend(all?);
        }
        Some(id) => figs.push(figure_data(id, n)?),
        None if cfg.schemes.is_empty() => {
            return Err(CliError::Usage(format!(
                "give --figure (one of all, {}) or schemes in --config",
                FIGURE_IDS.join(", ")
            )))
        }
        None => {}
    }
    if !cfg.schemes.is_empty() {
        let w = weight_or_default(&cfg.weight)?;
        let schemes = cfg
            .schemes
            .iter()
            .map(|s| Ok(derive(&s.to_spec()?, &w)?))
            .collect::<Result<Vec<_>, CliError>>()?;
        let etas = match &cfg.eta {
            Some(r) => uniform_etas(r.n, r.lo, r.hi),
            None => uniform_etas(n, 0.0, 3.0),
        };
        figs.push(custom_figure(&schemes, &etas));
    }
    let out = OutDir::create(&common.out, common.force)?;
    let mut outcome = Outcome::default();
    for f in &figs {
        outcome.files.push(write_figure(&out, common.format, f)?);
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSet {
    pub name: String,
    pub schemes: Vec<SpecJson>,
    #[serde(default)]
    pub weight: Option<Vec<PieceJson>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub sets: Vec<SchemeSet>,
    pub tableaux: Vec<TableauRef>,
    pub betas: Vec<f64>,
    pub np: usize,
    /// Defaults to `2π/np`.
    #[serde(default)]
    pub dx: Option<f64>,
    #[serde(default)]
    pub export_spectrum: bool,
    /// Adds the forward-Euler bound from `‖I + ΔtΛ‖₂ ≤ 1`.
    #[serde(default)]
    pub two_norm: bool,
    /// Grid spacings for a CFL sweep.
    #[serde(default)]
    pub sweep_dx: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct DtRow {
    set: String,
    tableau: String,
    dt_max: Option<f64>,
    unbounded: bool,
    r1: Option<f64>,
    r2: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    set: String,
    tableau: String,
    dx: f64,
    dt_max: Option<f64>,
    unbounded: bool,
    r1: Option<f64>,
    r2: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct EigRow {
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SetSummary {
    set: String,
    schemes: Vec<String>,
    max_real_part: Option<f64>,
    spectral_radius: Option<f64>,
    classification: Option<String>,
    semi_discrete_margin: Option<f64>,
    error: Option<String>,
}

fn bound_parts(b: DtBound) -> (Option<f64>, bool) {
    match b {
        DtBound::Bounded(v) => (Some(v), false),
        DtBound::Unbounded { .. } => (None, true),
    }
}

fn cfl_of(betas: &[f64], dt: Option<f64>, dx: f64, d: usize) -> Option<f64> {
    let b = betas.get(d - 1).copied().unwrap_or(0.0).abs();
    dt.map(|dt| b * dt / dx.powi(d as i32))
}

pub fn cmd_stability(common: &Common) -> Result<Outcome, CliError> {
    let cfg: StabilityConfig = config(common)?;
    let dx = cfg.dx.unwrap_or(2.0 * std::f64::consts::PI / cfg.np as f64);
    let tabs = cfg
        .tableaux
        .iter()
        .map(TableauRef::resolve)
        .collect::<Result<Vec<ButcherTableau>, _>>()?;

    struct SetResult {
        summary: SetSummary,
        dt: Vec<DtRow>,
        sweep: Vec<SweepRow>,
        eigs: Vec<EigRow>,
    }

    let results: Vec<Result<SetResult, CliError>> = cfg
        .sets
        .par_iter()
        .map(|set| {
            let w = weight_or_default(&set.weight)?;
            let schemes = set
                .schemes
                .iter()
                .map(|s| Ok(derive(&s.to_spec()?, &w)?))
                .collect::<Result<Vec<_>, CliError>>()?;
            let ids: Vec<String> = schemes.iter().map(|c| c.id()).collect();
            let spec = match circulant_spectrum(&schemes, &cfg.betas, dx, cfg.np) {
                Ok(s) => s,
                Err(e) => {
                    // report per set and keep going
                    let msg = e.to_string();
                    return Ok(SetResult {
                        summary: SetSummary {
                            set: set.name.clone(),
                            schemes: ids,
                            max_real_part: None,
                            spectral_radius: None,
                            classification: None,
                            semi_discrete_margin: None,
                            error: Some(msg.clone()),
                        },
                        dt: tabs
                            .iter()
                            .map(|t| DtRow {
                                set: set.name.clone(),
                                tableau: t.name.clone(),
                                dt_max: None,
                                unbounded: false,
                                r1: None,
                                r2: None,
                                error: Some(msg.clone()),
                            })
                            .collect(),
                        sweep: Vec::new(),
                        eigs: Vec::new(),
                    });
                }
            };
            let mut dt: Vec<DtRow> = tabs
                .iter()
                .map(|t| {
                    let (v, unbounded) = bound_parts(max_stable_dt(&spec.eigenvalues, t));
                    DtRow {
                        set: set.name.clone(),
                        tableau: t.name.clone(),
                        dt_max: v,
                        unbounded,
                        r1: cfl_of(&cfg.betas, v, dx, 1),
                        r2: cfl_of(&cfg.betas, v, dx, 2),
                        error: None,
                    }
                })
                .collect();
            if cfg.two_norm {
                let row = schemes
                    .iter()
                    .map(|s| assemble_periodic(s, cfg.np))
                    .collect::<Result<Vec<_>, _>>()
                    .and_then(|ops| assemble_lambda(&ops, &cfg.betas, dx))
                    .map(|lam| max_dt_forward_euler_2norm(&lam));
                let (v, unbounded, error) = match row {
                    Ok(b) => {
                        let (v, u) = bound_parts(b);
                        (v, u, None)
                    }
                    Err(e) => (None, false, Some(e.to_string())),
                };
                dt.push(DtRow {
                    set: set.name.clone(),
                    tableau: "FE-2norm".into(),
                    dt_max: v,
                    unbounded,
                    r1: cfl_of(&cfg.betas, v, dx, 1),
                    r2: cfl_of(&cfg.betas, v, dx, 2),
                    error,
                });
            }
            let mut sweep = Vec::new();
            if !cfg.sweep_dx.is_empty() {
                for t in &tabs {
                    for row in cfl_sweep(&schemes, t, &cfg.betas, &cfg.sweep_dx, cfg.np)? {
                        let (v, unbounded) = bound_parts(row.dt);
                        sweep.push(SweepRow {
                            set: set.name.clone(),
                            tableau: t.name.clone(),
                            dx: row.dx,
                            dt_max: v,
                            unbounded,
                            r1: cfl_of(&cfg.betas, v, row.dx, 1),
                            r2: cfl_of(&cfg.betas, v, row.dx, 2),
                        });
                    }
                }
            }
            let semi = semi_discrete_check(&schemes, &cfg.betas, 2048);
            Ok(SetResult {
                summary: SetSummary {
                    set: set.name.clone(),
                    schemes: ids,
                    max_real_part: Some(spec.max_real_part),
                    spectral_radius: Some(spec.spectral_radius),
                    classification: Some(
                        match spec.classification {
                            SpectrumClass::RealOnly => "real",
                            SpectrumClass::ImaginaryOnly => "imaginary",
                            SpectrumClass::Mixed => "mixed",
                        }
                        .into(),
                    ),
                    semi_discrete_margin: Some(semi.worst_margin),
                    error: None,
                },
                dt,
                sweep,
                eigs: spec.eigenvalues.iter().map(|z| EigRow { re: z.re, im: z.im }).collect(),
            })
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let out = OutDir::create(&common.out, common.force)?;
    let mut outcome = Outcome::default();
    let dt_rows: Vec<DtRow> = results.iter().flat_map(|r| r.dt.clone()).collect();
    outcome.files.push(write_rows(&out, common.format, "dt_max", &dt_rows)?);
    if !cfg.sweep_dx.is_empty() {
        let rows: Vec<SweepRow> = results.iter().flat_map(|r| r.sweep.clone()).collect();
        outcome.files.push(write_rows(&out, common.format, "cfl_sweep", &rows)?);
    }
    if cfg.export_spectrum {
        for r in &results {
            if !r.eigs.is_empty() {
                let base = format!("spectrum_{}", stem(&r.summary.set));
                outcome.files.push(write_rows(&out, common.format, &base, &r.eigs)?);
            }
        }
    }
    let summaries: Vec<&SetSummary> = results.iter().map(|r| &r.summary).collect();
    outcome.files.push(out.write_json("stability_summary.json", &summaries)?);
    let failed: Vec<String> = summaries
        .iter()
        .filter_map(|s| s.error.as_ref().map(|e| format!("{}: {e}", s.set)))
        .collect();
    if !failed.is_empty() {
        print_messages(&outcome);
        return Err(CliError::CheckFailed(failed.join("; ")));
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub case: CaseJson,
    pub schemes: Vec<SpecJson>,
    #[serde(default)]
    pub weight: Option<Vec<PieceJson>>,
    /// Defaults to the explicit method matched to the spatial order.
    #[serde(default)]
    pub tableau: Option<TableauRef>,
    /// Used by `verify`: maximum allowed pointwise error against the exact solution.
    #[serde(default)]
    pub max_error: Option<f64>,
}

pub struct Prepared {
    pub case: PdeCase,
    pub schemes: Vec<SchemeCoefficients>,
}

pub fn prepare(cfg: &SolveConfig, seed: Option<u64>) -> Result<Prepared, CliError> {
    if cfg.schemes.is_empty() {
        return Err(CliError::Usage("solve needs at least one scheme".into()));
    }
    let w = weight_or_default(&cfg.weight)?;
    let schemes = cfg
        .schemes
        .iter()
        .map(|s| Ok(derive(&s.to_spec()?, &w)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    let tableau = match &cfg.tableau {
        Some(t) => t.resolve()?,
        None => matching_tableau(schemes.iter().map(|s| s.spec.order()).min().unwrap_or(4)),
    };
    let mut case_json = cfg.case.clone();
    if seed.is_some() {
        case_json.seed = seed;
    }
    let case = case_json.to_case(tableau)?;
    Ok(Prepared { case, schemes })
}

/// Exact solution on the grid; Cole–Hopf points are evaluated in parallel.
pub fn exact_field(case: &PdeCase, t: f64) -> padeopt_core::Result<Vec<f64>> {
    if !case.nonlinear {
        return analytic_advdiff(case, t);
    }
    if t == 0.0 {
        return Ok(init_field(case));
    }
    let grid = case.grid();
    let parts: Vec<Vec<f64>> = grid
        .par_chunks(8)
        .map(|xs| analytic_burgers_colehopf(case, t, xs))
        .collect::<Result<_, _>>()?;
    Ok(parts.concat())
}

#[derive(Debug, Clone, Serialize)]
struct SnapshotRow {
    t: f64,
    x: f64,
    f: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SpectrumRow {
    t: f64,
    t_star: f64,
    k: usize,
    abs_fhat: f64,
    arg_fhat: f64,
    energy_content: Option<f64>,
    energy_error: Option<f64>,
    combined_error: Option<f64>,
    speed: Option<f64>,
    phase_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub seed: Option<u64>,
    pub dt: f64,
    pub steps: usize,
    pub t_end: f64,
    pub np: usize,
    pub kmax: usize,
    pub betas: Vec<f64>,
    pub nonlinear: bool,
    pub cfl: Vec<f64>,
    pub schemes: Vec<String>,
    pub tableau: String,
    pub tolerances: BTreeMap<String, f64>,
    pub max_abs_error: f64,
    pub rms_error: f64,
}

pub struct SolveResult {
    pub metadata: RunMetadata,
    pub prepared: Prepared,
}

/// `t*` reported with a frame: the eddy-time ratio for nonlinear runs, else
/// `t*_d` of the highest derivative present.
fn frame_t_star(case: &PdeCase, t_star: Option<f64>, t_star_d: &[f64]) -> f64 {
    if case.nonlinear {
        if let Some(v) = t_star {
            return v;
        }
    }
    t_star_d
        .iter()
        .zip(&case.betas)
        .rev()
        .find(|(_, b)| **b != 0.0)
        .map_or(0.0, |(v, _)| *v)
}

pub fn solve_and_write(cfg: &SolveConfig, common: &Common) -> Result<(SolveResult, Outcome), CliError> {
    let prepared = prepare(cfg, common.seed)?;
    let case = &prepared.case;
    let sim = simulate(case, &prepared.schemes)?;
    let exact = exact_field(case, sim.t)?;
    let modes = mode_diagnostics(case, &sim.initial, &sim.field, &exact, sim.t);
    let (max_abs_error, sq) = sim
        .field
        .iter()
        .zip(&exact)
        .fold((0.0f64, 0.0), |(m, s), (a, b)| (m.max((a - b).abs()), s + (a - b) * (a - b)));
    let rms_error = (sq / exact.len() as f64).sqrt();

    let grid = case.grid();
    let mut snaps = Vec::new();
    let mut spectra = Vec::new();
    let last = sim.frames.len() - 1;
    for (i, fr) in sim.frames.iter().enumerate() {
        for (x, f) in grid.iter().zip(&fr.field) {
            snaps.push(SnapshotRow { t: fr.t, x: *x, f: *f });
        }
        let ts = frame_t_star(case, fr.t_star, &fr.t_star_d);
        for (j, fh) in fr.spectrum.iter().enumerate() {
            let md = (i == last).then(|| &modes[j]);
            spectra.push(SpectrumRow {
                t: fr.t,
                t_star: ts,
                k: j + 1,
                abs_fhat: fh.norm(),
                arg_fhat: fh.arg(),
                energy_content: md.map(|m| m.energy_content),
                energy_error: md.map(|m| m.energy_error),
                combined_error: md.map(|m| m.combined_error),
                speed: md.and_then(|m| m.speed),
                phase_error: md.map(|m| m.phase_error),
            });
        }
    }
    let mut tolerances = BTreeMap::new();
    tolerances.insert("cole_hopf_simpson".into(), 1e-8);
    tolerances.insert("blowup_limit".into(), 1e12);
    if let Some(e) = cfg.max_error {
        tolerances.insert("max_error".into(), e);
    }
    let metadata = RunMetadata {
        seed: case.seed,
        dt: case.dt,
        steps: sim.steps,
        t_end: sim.t,
        np: case.np,
        kmax: case.kmax,
        betas: case.betas.clone(),
        nonlinear: case.nonlinear,
        cfl: case.cfl(),
        schemes: prepared.schemes.iter().map(|c| c.id()).collect(),
        tableau: case.tableau.name.clone(),
        tolerances,
        max_abs_error,
        rms_error,
    };
    let out = OutDir::create(&common.out, common.force)?;
    let mut outcome = Outcome::default();
    outcome.files.push(write_rows(&out, common.format, "snapshots", &snaps)?);
    outcome.files.push(write_rows(&out, common.format, "spectra", &spectra)?);
    outcome.files.push(out.write_json("metadata.json", &metadata)?);
    outcome.messages.push(format!(
        "{} steps to t = {:.6}, max |f - f_exact| = {:.3e}",
        sim.steps, sim.t, max_abs_error
    ));
    Ok((SolveResult { metadata, prepared }, outcome))
}

pub fn cmd_solve(common: &Common) -> Result<Outcome, CliError> {
    let cfg: SolveConfig = config(common)?;
    Ok(solve_and_write(&cfg, common)?.1)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

pub fn cmd_verify(common: &Common) -> Result<Outcome, CliError> {
    let mut checks = default_suite(common.seed.unwrap_or(0));
    let mut outcome = Outcome::default();
    if let Some(p) = &common.config {
        let cfg: SolveConfig = read_json(p)?;
        match solve_and_write(&cfg, common) {
            Ok((res, o)) => {
                outcome.files.extend(o.files);
                let tol = cfg.max_error.unwrap_or(f64::INFINITY);
                checks.push(Check::below(
                    "case_vs_exact",
                    res.metadata.max_abs_error,
                    tol,
                    format!("{} with {}", res.metadata.schemes.join(" "), res.metadata.tableau),
                ));
            }
            Err(CliError::Format(crate::formats::FormatError::Core(e))) if core_exit_code(&e) == 3 => {
                return Err(e.into());
            }
            Err(e) => checks.push(Check::failed("case_vs_exact", e.to_string())),
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    let out = OutDir::create(&common.out, common.force)?;
    let report = VerifyReport { passed, checks };
    outcome.files.push(out.write_json("verify.json", &report)?);
    for c in &report.checks {
        outcome.messages.push(format!(
            "{} {}: {:.3e} (tol {:.1e}) {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance,
            c.detail
        ));
    }
    if !passed {
        print_messages(&outcome);
        let n = report.checks.iter().filter(|c| !c.passed).count();
        return Err(CliError::CheckFailed(format!("{n} check(s) failed")));
    }
    Ok(outcome)
}

pub fn print_messages(o: &Outcome) {
    for m in &o.messages {
        println!("{m}");
    }
}
