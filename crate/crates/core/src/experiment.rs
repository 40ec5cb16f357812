//! Experiment descriptions (TOML), sweeps, CSV output and built-in checks.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    error_norms, fitted_slope, growth_factors, interface_position, interface_width,
    observed_orders, ErrorTriple, GrowthFactorQuery, LimitState,
};
use crate::error::{Error, Result};
use crate::model::{temperature_at, Grid, RunConfig, Scheme, StateField, Violation};
use crate::simulate::integrate;
use crate::spatial::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldName {
    U,
    V,
    P,
    W,
}

impl FieldName {
    pub fn extract(self, state: &StateField, run: &RunConfig) -> Vec<f64> {
        match self {
            FieldName::U => state.u.clone(),
            FieldName::V => state.v.clone(),
            FieldName::P => state.p.clone(),
            FieldName::W => state.enthalpy(&run.params),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Inf,
    L1,
    L2,
}

impl Norm {
    pub fn pick(self, e: &ErrorTriple) -> f64 {
        match self {
            Norm::Inf => e.e_inf,
            Norm::L1 => e.e_1,
            Norm::L2 => e.e_2,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Norm::Inf => 0,
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }
}

/// How the mesh follows `tau` in an implicit comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    /// Keep the configured grid.
    FixedGrid,
    /// `h = sqrt(τ/ratio)`, rounded to the nearest whole number of cells.
    ParabolicRatio { ratio: f64 },
}

fn default_factor() -> u32 {
    2
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sweep {
    /// One run with snapshots and an interface series.
    #[default]
    Single,
    /// `τ_j = τ / factor^j` for `j < levels`, against `τ / 2^reference_exponent`.
    TauHalving {
        #[serde(default = "default_factor")]
        factor: u32,
        levels: u32,
        reference_exponent: u32,
        field: FieldName,
    },
    /// `h_j = h / factor^j` for `j < levels`, against `h / 2^reference_exponent`.
    HHalving {
        #[serde(default = "default_factor")]
        factor: u32,
        levels: u32,
        reference_exponent: u32,
        field: FieldName,
    },
    /// One run per ε; fields and interface diagnostics at the final time.
    Epsilon { values: Vec<f64> },
    /// The configured scheme against the fully implicit one at equal
    /// `(τ, h)`, for every `τ` and ε.
    ImplicitComparison {
        taus: Vec<f64>,
        epsilons: Vec<f64>,
        coupling: Coupling,
        field: FieldName,
    },
    /// Growth factors on a tensor grid of cases, `r`, `r_ε` and phases.
    GrowthGrid {
        cases: Vec<LimitState>,
        phi_points: usize,
        r: Vec<f64>,
        r_eps: Vec<f64>,
    },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub fields: bool,
    #[serde(default = "yes")]
    pub interface: bool,
    /// Steps between interface samples; 0 samples at snapshot times only.
    #[serde(default)]
    pub series_stride: usize,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            fields: true,
            interface: true,
            series_stride: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Expectation {
    /// Order column of every error table, finest pair first.
    Orders { norm: Norm, values: Vec<f64>, tol: f64 },
    /// Error at one sweep value, within a relative tolerance.
    ErrorAt {
        norm: Norm,
        sweep_value: f64,
        value: f64,
        rel_tol: f64,
    },
    /// Least-squares log–log slope of every error table.
    SlopeRange { norm: Norm, min: f64, max: f64 },
    /// Error falls as the sweep value falls, in every table.
    ErrorDecreasing { norm: Norm },
    /// Interface width strictly falls as ε falls.
    WidthsDecreasing,
    /// `0 ≤ p ≤ 1`, `0 ≤ u ≤ C_u`, `0 ≤ v ≤ C_v` at every step.
    Bounds { slack: f64 },
    /// `w` non-decreasing along `x₁` at `t = 0`.
    MonotoneInitial,
    /// Mean `λ/2` crossing strictly increases over the snapshots.
    FrontAdvances,
    /// Every growth factor lies in `(0, 1]`.
    GrowthInUnitInterval,
}

impl Expectation {
    pub fn describe(&self) -> String {
        match self {
            Expectation::Orders { norm, tol, .. } => format!("orders ({norm:?}) within {tol}"),
            Expectation::ErrorAt {
                norm,
                sweep_value,
                value,
                rel_tol,
            } => format!("error ({norm:?}) at {sweep_value} = {value} within {rel_tol} relative"),
            Expectation::SlopeRange { norm, min, max } => {
                format!("fitted slope ({norm:?}) in [{min}, {max}]")
            }
            Expectation::ErrorDecreasing { norm } => format!("error ({norm:?}) decreasing"),
            Expectation::WidthsDecreasing => "interface width strictly decreasing in epsilon".into(),
            Expectation::Bounds { slack } => format!("bounds hold within {slack}"),
            Expectation::MonotoneInitial => "initial w monotone in x1".into(),
            Expectation::FrontAdvances => "front moves toward +x1".into(),
            Expectation::GrowthInUnitInterval => "growth factors in (0, 1]".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cg_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cg_max_iter: Option<usize>,
}

impl SolverSettings {
    pub fn options(&self) -> SolverOptions {
        let mut o = SolverOptions::default();
        if let Some(t) = self.cg_tol {
            o.cg_tol = t;
        }
        o.cg_max_iter = self.cg_max_iter;
        o
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub run: RunConfig,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default, rename = "expect", skip_serializing_if = "Vec::is_empty")]
    pub expectations: Vec<Expectation>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses and validates; violations come back as [`Error::Invalid`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let spec = Self::from_toml(&text)?;
        let v = spec.validate();
        if v.is_empty() {
            Ok(spec)
        } else {
            Err(Error::Invalid(v))
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.name.trim().is_empty() {
            out.push(Violation::new("name", "name must not be empty"));
        }
        out.extend(self.run.validate());
        let pow2 = |k: &str, f: u32, out: &mut Vec<Violation>| {
            if f < 2 || !f.is_power_of_two() {
                out.push(Violation::new(
                    k,
                    format!("refinement factor {f} must be a power of 2 (2, 4, 8, ...) so refined meshes nest"),
                ));
            }
        };
        match &self.sweep {
            Sweep::Single => {}
            Sweep::TauHalving {
                factor,
                levels,
                reference_exponent,
                ..
            }
            | Sweep::HHalving {
                factor,
                levels,
                reference_exponent,
                ..
            } => {
                pow2("sweep.factor", *factor, &mut out);
                if *levels < 2 {
                    out.push(Violation::new("sweep.levels", "levels must be >= 2"));
                }
                if factor.is_power_of_two() && *levels >= 1 {
                    let finest = factor.trailing_zeros() * (levels - 1);
                    if *reference_exponent <= finest {
                        out.push(Violation::new(
                            "sweep.reference_exponent",
                            format!("reference must be finer than the finest level (exponent > {finest})"),
                        ));
                    }
                    if *reference_exponent > 24 {
                        out.push(Violation::new("sweep.reference_exponent", "reference_exponent must be <= 24"));
                    }
                }
            }
            Sweep::Epsilon { values } => {
                if values.is_empty() {
                    out.push(Violation::new("sweep.values", "need at least one epsilon"));
                }
                for (k, e) in values.iter().enumerate() {
                    if !(*e > 0.0 && e.is_finite()) {
                        out.push(Violation::new(format!("sweep.values[{k}]"), "epsilon must be > 0"));
                    }
                }
            }
            Sweep::ImplicitComparison {
                taus,
                epsilons,
                coupling,
                ..
            } => {
                if taus.is_empty() || epsilons.is_empty() {
                    out.push(Violation::new("sweep", "taus and epsilons must be non-empty"));
                }
                for (k, t) in taus.iter().enumerate() {
                    if !(*t > 0.0 && *t <= self.run.t_final) {
                        out.push(Violation::new(format!("sweep.taus[{k}]"), "tau must lie in (0, t_final]"));
                    }
                }
                for (k, e) in epsilons.iter().enumerate() {
                    if !(*e > 0.0 && e.is_finite()) {
                        out.push(Violation::new(format!("sweep.epsilons[{k}]"), "epsilon must be > 0"));
                    }
                }
                if let Coupling::ParabolicRatio { ratio } = coupling {
                    if !(*ratio > 0.0) {
                        out.push(Violation::new("sweep.coupling.ratio", "ratio must be > 0"));
                    }
                }
            }
            Sweep::GrowthGrid {
                cases,
                phi_points,
                r,
                r_eps,
            } => {
                if *phi_points == 0 {
                    out.push(Violation::new("sweep.phi_points", "phi_points must be >= 1"));
                }
                for (k, c) in cases.iter().enumerate() {
                    if !c.is_admissible() {
                        out.push(Violation::new(
                            format!("sweep.cases[{k}]"),
                            "limit state needs v* > 0, u* > 0 or p1 in [0, 1]",
                        ));
                    }
                }
                if r.iter().chain(r_eps).any(|x| !(*x >= 0.0 && x.is_finite())) {
                    out.push(Violation::new("sweep.r", "r and r_eps must be >= 0"));
                }
            }
        }
        for (k, e) in self.expectations.iter().enumerate() {
            let ok = match e {
                Expectation::Orders { .. }
                | Expectation::ErrorAt { .. }
                | Expectation::SlopeRange { .. }
                | Expectation::ErrorDecreasing { .. } => matches!(
                    self.sweep,
                    Sweep::TauHalving { .. } | Sweep::HHalving { .. } | Sweep::ImplicitComparison { .. }
                ),
                Expectation::WidthsDecreasing => matches!(self.sweep, Sweep::Epsilon { .. }),
                Expectation::Bounds { .. }
                | Expectation::MonotoneInitial
                | Expectation::FrontAdvances => matches!(self.sweep, Sweep::Single),
                Expectation::GrowthInUnitInterval => matches!(self.sweep, Sweep::GrowthGrid { .. }),
            };
            if !ok {
                out.push(Violation::new(
                    format!("expect[{k}]"),
                    format!("check '{}' does not apply to this sweep", e.describe()),
                ));
            }
        }
        out
    }
}

/// Built-in experiments, shipped as TOML files.
pub const PRESETS: &[(&str, &str)] = &[
    ("table1", include_str!("../presets/table1.toml")),
    ("table2", include_str!("../presets/table2.toml")),
    ("fig2-case2", include_str!("../presets/fig2-case2.toml")),
    ("fig2-sirk2", include_str!("../presets/fig2-sirk2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
    ("stability", include_str!("../presets/stability.toml")),
];

pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            Error::Config(format!("unknown preset '{name}' (known: {})", names.join(", ")))
        })?;
    ExperimentSpec::from_toml(text)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub sweep_value: f64,
    pub errors: ErrorTriple,
    /// Orders for `(inf, l1, l2)` against the next finer row.
    pub orders: [Option<f64>; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTable {
    pub label: String,
    /// Ascending in `sweep_value`.
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn build(label: impl Into<String>, points: &[(f64, ErrorTriple)]) -> Self {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let per = |f: fn(&ErrorTriple) -> f64| {
            observed_orders(&pts.iter().map(|(s, e)| (*s, f(e))).collect::<Vec<_>>())
        };
        let oi = per(|e| e.e_inf);
        let o1 = per(|e| e.e_1);
        let o2 = per(|e| e.e_2);
        let rows = pts
            .iter()
            .enumerate()
            .map(|(k, (s, e))| ErrorRow {
                sweep_value: *s,
                errors: *e,
                orders: [oi[k].2, o1[k].2, o2[k].2],
            })
            .collect();
        Self {
            label: label.into(),
            rows,
        }
    }

    pub fn column(&self, norm: Norm) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .map(|r| (r.sweep_value, norm.pick(&r.errors)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sweep_value,e_inf,order_inf,e_1,order_1,e_2,order_2\n");
        for r in &self.rows {
            s += &format!(
                "{},{},{},{},{},{},{}\n",
                fmt_num(r.sweep_value),
                fmt_num(r.errors.e_inf),
                fmt_opt(r.orders[0]),
                fmt_num(r.errors.e_1),
                fmt_opt(r.orders[1]),
                fmt_num(r.errors.e_2),
                fmt_opt(r.orders[2]),
            );
        }
        s
    }
}

/// Field snapshots, one row per node per snapshot.
pub fn fields_csv(grid: &Grid, run: &RunConfig, snapshots: &[StateField]) -> String {
    let mut s = String::from(if grid.dim == 1 {
        "x,t,u,v,p,w,theta\n"
    } else {
        "x1,x2,t,u,v,p,w,theta\n"
    });
    for snap in snapshots {
        let w = snap.enthalpy(&run.params);
        for k in 0..grid.len() {
            let c = grid.coords(k);
            if grid.dim == 1 {
                s += &fmt_num(c[0]);
            } else {
                s += &format!("{},{}", fmt_num(c[0]), fmt_num(c[1]));
            }
            s += &format!(
                ",{},{},{},{},{},{}\n",
                fmt_num(snap.t),
                fmt_num(snap.u[k]),
                fmt_num(snap.v[k]),
                fmt_num(snap.p[k]),
                fmt_num(w[k]),
                fmt_num(temperature_at(w[k], &run.params)),
            );
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfaceSample {
    pub t: f64,
    pub position: Option<f64>,
    pub width: f64,
}

/// Position and width of the `w = λ/2` front. In 2D the position is the
/// mean over rows of each row's first crossing, and the width is taken
/// along the middle row.
pub fn interface_sample(state: &StateField, run: &RunConfig) -> InterfaceSample {
    let w = state.enthalpy(&run.params);
    let firsts: Vec<f64> = interface_position(&w, &run.grid, &run.params)
        .into_iter()
        .filter_map(|r| r.first().copied())
        .collect();
    let position = (!firsts.is_empty()).then(|| firsts.iter().sum::<f64>() / firsts.len() as f64);
    let side = run.grid.side();
    let row = if run.grid.dim == 1 { 0 } else { run.grid.n / 2 };
    let width = interface_width(&w[row * side..(row + 1) * side], &Grid::line(run.grid.a, run.grid.b, run.grid.n), &run.params);
    InterfaceSample {
        t: state.t,
        position,
        width,
    }
}

pub fn interface_csv(samples: &[InterfaceSample]) -> String {
    let mut s = String::from("t,position,width\n");
    for x in samples {
        s += &format!("{},{},{}\n", fmt_num(x.t), fmt_opt(x.position), fmt_num(x.width));
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthRow {
    pub case: LimitState,
    pub phi: f64,
    pub r: f64,
    pub r_eps: f64,
    pub roots: [f64; 3],
}

pub fn growth_csv(rows: &[GrowthRow]) -> String {
    let mut s = String::from("case,phi,r,r_eps,root1,root2,root3\n");
    for g in rows {
        s += &format!(
            "{},{},{},{},{},{},{}\n",
            g.case.label(),
            fmt_num(g.phi),
            fmt_num(g.r),
            fmt_num(g.r_eps),
            fmt_num(g.roots[0]),
            fmt_num(g.roots[1]),
            fmt_num(g.roots[2]),
        );
    }
    s
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    pub quiet: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// What an experiment produced. CSV contents are kept in memory, keyed by
/// file name, until [`Report::write`] puts them on disk.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub name: String,
    pub runs: Vec<RunRecord>,
    pub tables: Vec<ErrorTable>,
    /// `(ε, width, position)` at the final time of an ε sweep.
    pub widths: Vec<(f64, f64, Option<f64>)>,
    pub series: Vec<InterfaceSample>,
    pub growth: Vec<GrowthRow>,
    /// Largest bound violation seen at any step of a single run.
    pub bound_excess: Option<f64>,
    pub initial_monotone: Option<bool>,
    pub files: BTreeMap<String, String>,
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    pub fn solver_failed(&self) -> bool {
        self.runs.iter().any(|r| r.error.is_some())
    }

    pub fn checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Writes every CSV, returning the paths in name order.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let io = |path: &Path, source| Error::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let mut out = Vec::new();
        for (name, body) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| io(&p, e))?;
            out.push(p);
        }
        Ok(out)
    }
}

struct Job {
    label: String,
    run: RunConfig,
}

struct JobResult {
    record: RunRecord,
    state: Option<StateField>,
}

fn run_jobs(jobs: Vec<Job>, solver: SolverOptions, quiet: bool) -> Vec<JobResult> {
    jobs.into_par_iter()
        .map(|job| {
            let start = Instant::now();
            let res = job.run.run(solver);
            let seconds = start.elapsed().as_secs_f64();
            if !quiet {
                match &res {
                    Ok(_) => eprintln!("  {} done in {seconds:.2}s", job.label),
                    Err(e) => eprintln!("  {} failed: {e}", job.label),
                }
            }
            JobResult {
                record: RunRecord {
                    label: job.label,
                    seconds,
                    error: res.as_ref().err().map(|e| e.to_string()),
                },
                state: res.ok(),
            }
        })
        .collect()
}

/// Runs `spec` on a worker pool and evaluates its expectations.
pub fn run_experiment(spec: &ExperimentSpec, opts: RunOptions) -> Result<Report> {
    let v = spec.validate();
    if !v.is_empty() {
        return Err(Error::Invalid(v));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut report = pool.install(|| execute(spec, opts))?;
    report.checks = spec
        .expectations
        .iter()
        .map(|e| evaluate(e, &report))
        .collect();
    Ok(report)
}

fn execute(spec: &ExperimentSpec, opts: RunOptions) -> Result<Report> {
    let solver = spec.solver.options();
    let mut report = Report {
        name: spec.name.clone(),
        ..Report::default()
    };
    let name = &spec.name;
    match &spec.sweep {
        Sweep::Single => single(spec, solver, &mut report)?,
        Sweep::TauHalving {
            factor,
            levels,
            reference_exponent,
            field,
        } => {
            let mut jobs: Vec<Job> = (0..*levels)
                .map(|j| {
                    let mut run = spec.run.clone();
                    run.tau = spec.run.tau / f64::from(*factor).powi(j as i32);
                    Job {
                        label: format!("tau={}", fmt_num(run.tau)),
                        run,
                    }
                })
                .collect();
            let mut reference = spec.run.clone();
            reference.tau = spec.run.tau / 2f64.powi(*reference_exponent as i32);
            jobs.push(Job {
                label: format!("reference tau={}", fmt_num(reference.tau)),
                run: reference,
            });
            let results = run_jobs(jobs, solver, opts.quiet);
            let h = spec.run.grid.h();
            let dim = spec.run.grid.dim;
            collect_table(spec, results, *field, String::new(), &mut report, |run, s, r| {
                Ok((run.tau, error_norms(s, r, h, dim)?))
            })?;
        }
        Sweep::HHalving {
            factor,
            levels,
            reference_exponent,
            field,
        } => {
            let base = spec.run.grid;
            let mut jobs: Vec<Job> = (0..*levels)
                .map(|j| {
                    let mut run = spec.run.clone();
                    run.grid = base.refined((*factor as usize).pow(j));
                    Job {
                        label: format!("h={}", fmt_num(run.grid.h())),
                        run,
                    }
                })
                .collect();
            let mut reference = spec.run.clone();
            reference.grid = base.refined(1 << reference_exponent);
            let ref_grid = reference.grid;
            jobs.push(Job {
                label: format!("reference h={}", fmt_num(ref_grid.h())),
                run: reference,
            });
            let results = run_jobs(jobs, solver, opts.quiet);
            collect_table(spec, results, *field, String::new(), &mut report, |run, s, r| {
                let stride = ref_grid.n / run.grid.n;
                let coarse = crate::model::subsample_field(r, &ref_grid, stride);
                Ok((run.grid.h(), error_norms(s, &coarse, run.grid.h(), run.grid.dim)?))
            })?;
        }
        Sweep::Epsilon { values } => {
            let jobs = values
                .iter()
                .map(|&eps| {
                    let mut run = spec.run.clone();
                    run.params.epsilon = eps;
                    Job {
                        label: format!("eps={}", fmt_num(eps)),
                        run,
                    }
                })
                .collect();
            let results = run_jobs(jobs, solver, opts.quiet);
            for (eps, res) in values.iter().zip(results) {
                let mut run = spec.run.clone();
                run.params.epsilon = *eps;
                report.runs.push(res.record);
                if let Some(state) = res.state {
                    let sample = interface_sample(&state, &run);
                    report.widths.push((*eps, sample.width, sample.position));
                    if spec.outputs.fields {
                        report.files.insert(
                            format!("{name}_fields_eps_{}.csv", fmt_num(*eps)),
                            fields_csv(&run.grid, &run, std::slice::from_ref(&state)),
                        );
                    }
                    report.series.push(sample);
                }
            }
            if spec.outputs.interface {
                let rows: Vec<InterfaceSample> = report.series.clone();
                let mut s = String::from("epsilon,t,position,width\n");
                for ((eps, _, _), x) in report.widths.iter().zip(&rows) {
                    s += &format!("{},{},{},{}\n", fmt_num(*eps), fmt_num(x.t), fmt_opt(x.position), fmt_num(x.width));
                }
                report.files.insert(format!("{name}_interface.csv"), s);
            }
        }
        Sweep::ImplicitComparison {
            taus,
            epsilons,
            coupling,
            field,
        } => {
            let mut jobs = Vec::new();
            for &eps in epsilons {
                for &tau in taus {
                    let mut run = spec.run.clone();
                    run.params.epsilon = eps;
                    run.tau = tau;
                    run.grid = coupled_grid(run.grid, tau, *coupling);
                    let mut implicit = run.clone();
                    implicit.scheme = Scheme::FullyImplicit;
                    let tag = format!("eps={} tau={} n={}", fmt_num(eps), fmt_num(tau), run.grid.n);
                    jobs.push(Job {
                        label: format!("{tag} {}", run.scheme),
                        run,
                    });
                    jobs.push(Job {
                        label: format!("{tag} fully_implicit"),
                        run: implicit,
                    });
                }
            }
            let results = run_jobs(jobs, solver, opts.quiet);
            let mut it = results.into_iter();
            for &eps in epsilons {
                let mut points = Vec::new();
                for &tau in taus {
                    let (a, b) = (it.next().unwrap(), it.next().unwrap());
                    report.runs.push(a.record);
                    report.runs.push(b.record);
                    if let (Some(sa), Some(sb)) = (a.state, b.state) {
                        let mut run = spec.run.clone();
                        run.params.epsilon = eps;
                        let grid = coupled_grid(run.grid, tau, *coupling);
                        let e = error_norms(
                            &field.extract(&sa, &run),
                            &field.extract(&sb, &run),
                            grid.h(),
                            grid.dim,
                        )?;
                        points.push((tau, e));
                    }
                }
                let table = ErrorTable::build(format!("eps_{}", fmt_num(eps)), &points);
                report
                    .files
                    .insert(format!("{name}_errors_eps_{}.csv", fmt_num(eps)), table.to_csv());
                report.tables.push(table);
            }
        }
        Sweep::GrowthGrid {
            cases,
            phi_points,
            r,
            r_eps,
        } => {
            for case in cases {
                for &rr in r {
                    for &re in r_eps {
                        for k in 0..*phi_points {
                            let phi = 2.0 * std::f64::consts::PI * k as f64 / *phi_points as f64;
                            let q = GrowthFactorQuery {
                                r: rr,
                                r_eps: re,
                                phi,
                                params: spec.run.params,
                                state: *case,
                            };
                            report.growth.push(GrowthRow {
                                case: *case,
                                phi,
                                r: rr,
                                r_eps: re,
                                roots: growth_factors(&q),
                            });
                        }
                    }
                }
            }
            report
                .files
                .insert(format!("{name}_growth.csv"), growth_csv(&report.growth));
        }
    }
    Ok(report)
}

/// Grid used for step `tau` under `coupling`.
pub fn coupled_grid(base: Grid, tau: f64, coupling: Coupling) -> Grid {
    match coupling {
        Coupling::FixedGrid => base,
        Coupling::ParabolicRatio { ratio } => {
            let h = (tau / ratio).sqrt();
            let n = ((base.b - base.a) / h).round().max(2.0) as usize;
            Grid { n, ..base }
        }
    }
}

fn collect_table(
    spec: &ExperimentSpec,
    mut results: Vec<JobResult>,
    field: FieldName,
    label: String,
    report: &mut Report,
    measure: impl Fn(&RunConfig, &[f64], &[f64]) -> Result<(f64, ErrorTriple)>,
) -> Result<()> {
    let reference = results.pop().expect("reference job");
    let runs: Vec<RunConfig> = match &spec.sweep {
        Sweep::TauHalving { factor, levels, .. } => (0..*levels)
            .map(|j| {
                let mut r = spec.run.clone();
                r.tau = spec.run.tau / f64::from(*factor).powi(j as i32);
                r
            })
            .collect(),
        Sweep::HHalving { factor, levels, .. } => (0..*levels)
            .map(|j| {
                let mut r = spec.run.clone();
                r.grid = spec.run.grid.refined((*factor as usize).pow(j));
                r
            })
            .collect(),
        _ => unreachable!("collect_table is only used by refinement sweeps"),
    };
    let mut points = Vec::new();
    if let Some(ref_state) = &reference.state {
        let ref_field = field.extract(ref_state, &spec.run);
        for (run, res) in runs.iter().zip(&results) {
            if let Some(s) = &res.state {
                points.push(measure(run, &field.extract(s, run), &ref_field)?);
            }
        }
    }
    report.runs.extend(results.into_iter().map(|r| r.record));
    report.runs.push(reference.record);
    let table = ErrorTable::build(label, &points);
    report
        .files
        .insert(format!("{}_errors.csv", spec.name), table.to_csv());
    report.tables.push(table);
    Ok(())
}

fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn single(spec: &ExperimentSpec, solver: SolverOptions, report: &mut Report) -> Result<()> {
    let run = &spec.run;
    let problem = run.problem(solver);
    let s0 = run.initial_state()?;
    let n_steps = run.n_steps();
    let snap_steps: Vec<usize> = run
        .snapshot_times
        .iter()
        .map(|t| ((t / run.tau).round() as usize).min(n_steps))
        .collect();

    let c_u = max_of(&s0.u).max(run.boundary.u.dirichlet_range(&run.grid, run.t_final).map_or(0.0, |r| r.1));
    let c_v = max_of(&s0.v).max(run.boundary.v.dirichlet_range(&run.grid, run.t_final).map_or(0.0, |r| r.1));

    let w0 = s0.enthalpy(&run.params);
    let side = run.grid.side();
    let rows = if run.grid.dim == 1 { 1 } else { side };
    report.initial_monotone = Some((0..rows).all(|j| {
        w0[j * side..(j + 1) * side].windows(2).all(|p| p[1] >= p[0])
    }));

    let mut step = 0usize;
    let mut excess = f64::NEG_INFINITY;
    let mut snaps = Vec::new();
    let mut series = Vec::new();
    let stride = spec.outputs.series_stride;
    let start = Instant::now();
    let res = integrate(&problem, s0, run.scheme, run.tau, run.t_final, |s| {
        for j in 0..s.len() {
            let e = (-s.p[j])
                .max(s.p[j] - 1.0)
                .max(-s.u[j])
                .max(s.u[j] - c_u)
                .max(-s.v[j])
                .max(s.v[j] - c_v);
            excess = excess.max(e);
        }
        let at_snapshot = snap_steps.contains(&step);
        if at_snapshot {
            snaps.push(s.clone());
        }
        if (stride > 0 && (step.is_multiple_of(stride) || step == n_steps)) || (stride == 0 && at_snapshot) {
            series.push(interface_sample(s, run));
        }
        step += 1;
    });
    report.runs.push(RunRecord {
        label: spec.name.clone(),
        seconds: start.elapsed().as_secs_f64(),
        error: res.as_ref().err().map(|e| e.to_string()),
    });
    report.bound_excess = Some(excess);
    if spec.outputs.fields && !snaps.is_empty() {
        report
            .files
            .insert(format!("{}_fields.csv", spec.name), fields_csv(&run.grid, run, &snaps));
    }
    if spec.outputs.interface && !series.is_empty() {
        report
            .files
            .insert(format!("{}_interface.csv", spec.name), interface_csv(&series));
    }
    report.series = series;
    Ok(())
}

fn check(name: String, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn evaluate(e: &Expectation, r: &Report) -> CheckOutcome {
    let name = e.describe();
    if r.solver_failed() {
        return check(name, false, "a run failed".into());
    }
    match e {
        Expectation::Orders { norm, values, tol } => {
            let mut worst = 0.0f64;
            let mut detail = Vec::new();
            for t in &r.tables {
                let got: Vec<Option<f64>> = t.rows.iter().skip(1).map(|x| x.orders[norm.index()]).collect();
                if got.len() != values.len() {
                    return check(name, false, format!("table has {} orders, expected {}", got.len(), values.len()));
                }
                for (g, want) in got.iter().zip(values) {
                    let dev = g.map_or(f64::INFINITY, |g| (g - want).abs());
                    worst = worst.max(dev);
                    detail.push(g.map_or("-".into(), |g| format!("{g:.4}")));
                }
            }
            check(name, worst <= *tol, format!("orders [{}], max deviation {worst:.2e}", detail.join(", ")))
        }
        Expectation::ErrorAt {
            norm,
            sweep_value,
            value,
            rel_tol,
        } => {
            let found = r.tables.iter().flat_map(|t| &t.rows).find(|x| {
                (x.sweep_value - sweep_value).abs() <= 1e-9 * sweep_value.abs()
            });
            match found {
                None => check(name, false, format!("no row at {sweep_value}")),
                Some(x) => {
                    let got = norm.pick(&x.errors);
                    let rel = (got - value).abs() / value.abs();
                    check(name, rel <= *rel_tol, format!("got {got:.5e}, relative deviation {rel:.3}"))
                }
            }
        }
        Expectation::SlopeRange { norm, min, max } => {
            let slopes: Vec<Option<f64>> = r.tables.iter().map(|t| fitted_slope(&t.column(*norm))).collect();
            let ok = !slopes.is_empty()
                && slopes.iter().all(|s| s.is_some_and(|s| s >= *min && s <= *max));
            let shown: Vec<String> = slopes.iter().map(|s| fmt_opt(s.map(|s| (s * 1e4).round() / 1e4))).collect();
            check(name, ok, format!("slope {}", shown.join(", ")))
        }
        Expectation::ErrorDecreasing { norm } => {
            let mut ok = !r.tables.is_empty();
            let mut detail = Vec::new();
            for t in &r.tables {
                let col = t.column(*norm);
                ok &= col.len() >= 2 && col.windows(2).all(|p| p[0].1 < p[1].1);
                let vals: Vec<String> = col.iter().map(|(s, e)| format!("{s}:{e:.3e}")).collect();
                detail.push(format!("{} [{}]", t.label, vals.join(" ")));
            }
            check(name, ok, detail.join("; "))
        }
        Expectation::WidthsDecreasing => {
            let mut w = r.widths.clone();
            w.sort_by(|a, b| b.0.total_cmp(&a.0));
            let ok = w.len() >= 2 && w.windows(2).all(|p| p[1].1 < p[0].1);
            let shown: Vec<String> = w.iter().map(|(e, x, _)| format!("{e:e}:{x:.4}")).collect();
            check(name, ok, format!("widths {}", shown.join(" ")))
        }
        Expectation::Bounds { slack } => {
            let ex = r.bound_excess.unwrap_or(f64::INFINITY);
            check(name, ex <= *slack, format!("largest excess {ex:.3e}"))
        }
        Expectation::MonotoneInitial => {
            let ok = r.initial_monotone == Some(true);
            check(name, ok, format!("monotone: {ok}"))
        }
        Expectation::FrontAdvances => {
            let pos: Vec<Option<f64>> = r.series.iter().map(|s| s.position).collect();
            let ok = pos.len() >= 2
                && pos.iter().all(Option::is_some)
                && pos.windows(2).all(|p| p[1].unwrap() > p[0].unwrap());
            let show = |s: &InterfaceSample| {
                format!("t={}:{}", s.t, s.position.map_or("-".into(), |p| format!("{p:.4}")))
            };
            let shown: Vec<String> = if r.series.len() <= 6 {
                r.series.iter().map(show).collect()
            } else {
                let n = r.series.len();
                vec![show(&r.series[0]), show(&r.series[1]), "...".into(), show(&r.series[n - 1])]
            };
            check(name, ok, format!("{} samples: {}", r.series.len(), shown.join(" ")))
        }
        Expectation::GrowthInUnitInterval => {
            let bad = r
                .growth
                .iter()
                .filter(|g| g.roots.iter().any(|x| !(*x > 0.0 && *x <= 1.0)))
                .count();
            check(name, bad == 0 && !r.growth.is_empty(), format!("{bad} of {} rows outside (0, 1]", r.growth.len()))
        }
    }
}
