//! Domain types shared by every stepper: parameters, the uniform node-centred
//! grid, boundary descriptors, the state triple `(u, v, p)` and the initial
//! data presets used by the experiments.
//!
//! The model is
//!
//! ```text
//! u_t - d1 Δu = -(1/ε) u [v + λ(1 - p)]
//! v_t - d2 Δv = -(1/ε) v (u + λp)
//! p_t         =  (1/ε) [(1 - p) u - v p]
//! ```
//!
//! and its ε → 0 limit is the two-phase Stefan problem `w_t = Δ B(w)` for the
//! enthalpy `w = u - v + λp`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::ModelError;

/// A single configuration problem, reported against the offending key.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl Violation {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// Reaction time scale, latent heat and the two diffusivities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub lambda: f64,
    pub d1: f64,
    pub d2: f64,
}

impl ModelParams {
    pub fn new(epsilon: f64, lambda: f64, d1: f64, d2: f64) -> Result<Self, ModelError> {
        let params = Self {
            epsilon,
            lambda,
            d1,
            d2,
        };
        match params.validate().into_iter().next() {
            Some(v) => Err(ModelError::Invalid(v.to_string())),
            None => Ok(params),
        }
    }

    /// Zero diffusivities are accepted: they switch diffusion off, which the
    /// pointwise closed-form checks rely on.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            out.push(Violation::new("params.epsilon", "epsilon must be > 0"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            out.push(Violation::new("params.lambda", "lambda must be > 0"));
        }
        if !(self.d1 >= 0.0 && self.d1.is_finite()) {
            out.push(Violation::new("params.d1", "d1 must be >= 0"));
        }
        if !(self.d2 >= 0.0 && self.d2.is_finite()) {
            out.push(Violation::new("params.d2", "d2 must be >= 0"));
        }
        out
    }
}

/// Uniform node-centred mesh on `[a, b]^dim` with `n` cells per axis.
///
/// Nodes are `x_j = a + j h`, `j = 0..=n`. In two dimensions the flat index of
/// node `(i, j)` is `j * (n + 1) + i`, with `i` running along `x1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(dim: usize, a: f64, b: f64, n: usize) -> Result<Self, ModelError> {
        let grid = Self { dim, a, b, n };
        match grid.validate().into_iter().next() {
            Some(v) => Err(ModelError::Invalid(v.to_string())),
            None => Ok(grid),
        }
    }

    pub fn line(a: f64, b: f64, n: usize) -> Self {
        Self { dim: 1, a, b, n }
    }

    pub fn square(a: f64, b: f64, n: usize) -> Self {
        Self { dim: 2, a, b, n }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.dim != 1 && self.dim != 2 {
            out.push(Violation::new("grid.dim", "dim must be 1 or 2"));
        }
        if !(self.b > self.a) || !self.a.is_finite() || !self.b.is_finite() {
            out.push(Violation::new("grid.b", "domain must satisfy b > a"));
        }
        if self.n < 2 {
            out.push(Violation::new("grid.n", "n must be >= 2"));
        }
        out
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    /// Nodes per axis.
    pub fn side(&self) -> usize {
        self.n + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `j` along any axis.
    pub fn x(&self, j: usize) -> f64 {
        self.a + (self.b - self.a) * j as f64 / self.n as f64
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    /// Per-axis node indices of a flat index; the second entry is 0 in 1D.
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx % self.side(), idx / self.side())
    }

    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.split(idx);
        if self.dim == 1 {
            [self.x(i), 0.0]
        } else {
            [self.x(i), self.x(j)]
        }
    }

    /// True when the node has `j_k != 0, n` on every axis.
    pub fn is_interior(&self, idx: usize) -> bool {
        let (i, j) = self.split(idx);
        let inner = |k: usize| k != 0 && k != self.n;
        inner(i) && (self.dim == 1 || inner(j))
    }

    /// The same domain with every cell split into `factor` pieces.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n: self.n * factor,
            ..*self
        }
    }
}

/// Boundary face of `[a, b]^d`. `Y*` faces exist only in two dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Face {
    XLo,
    XHi,
    YLo,
    YHi,
}

/// Condition imposed by one face on one diffusing field.
///
/// Dirichlet data is `value + slope * s + rate * t`, where `s` is the
/// coordinate along the face (`x2` on the `x1` faces, `x1` on the `x2` faces,
/// zero in 1D).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaceCondition {
    Dirichlet {
        value: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        slope: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        rate: f64,
    },
    Neumann,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl FaceCondition {
    pub fn dirichlet(value: f64) -> Self {
        FaceCondition::Dirichlet {
            value,
            slope: 0.0,
            rate: 0.0,
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self, FaceCondition::Dirichlet { .. })
    }

    pub fn value_at(&self, t: f64, s: f64) -> Option<f64> {
        match *self {
            FaceCondition::Dirichlet { value, slope, rate } => Some(value + slope * s + rate * t),
            FaceCondition::Neumann => None,
        }
    }
}

fn neumann() -> FaceCondition {
    FaceCondition::Neumann
}

/// Face conditions for one of the diffusing fields `u` or `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldBoundary {
    pub x_lo: FaceCondition,
    pub x_hi: FaceCondition,
    #[serde(default = "neumann")]
    pub y_lo: FaceCondition,
    #[serde(default = "neumann")]
    pub y_hi: FaceCondition,
}

impl FieldBoundary {
    pub fn uniform(cond: FaceCondition) -> Self {
        Self {
            x_lo: cond,
            x_hi: cond,
            y_lo: cond,
            y_hi: cond,
        }
    }

    pub fn neumann() -> Self {
        Self::uniform(FaceCondition::Neumann)
    }

    pub fn dirichlet(value: f64) -> Self {
        Self::uniform(FaceCondition::dirichlet(value))
    }

    pub fn face(&self, face: Face) -> &FaceCondition {
        match face {
            Face::XLo => &self.x_lo,
            Face::XHi => &self.x_hi,
            Face::YLo => &self.y_lo,
            Face::YHi => &self.y_hi,
        }
    }

    /// The Dirichlet face that owns `idx`, if any. `x1` faces take precedence
    /// at corners.
    pub fn dirichlet_face(&self, grid: &Grid, idx: usize) -> Option<Face> {
        let (i, j) = grid.split(idx);
        let mut candidates = [None; 4];
        if i == 0 {
            candidates[0] = Some(Face::XLo);
        }
        if i == grid.n {
            candidates[1] = Some(Face::XHi);
        }
        if grid.dim == 2 {
            if j == 0 {
                candidates[2] = Some(Face::YLo);
            }
            if j == grid.n {
                candidates[3] = Some(Face::YHi);
            }
        }
        candidates
            .into_iter()
            .flatten()
            .find(|f| self.face(*f).is_dirichlet())
    }

    /// Dirichlet value at a boundary node, `None` for free nodes.
    pub fn dirichlet_value(&self, grid: &Grid, idx: usize, t: f64) -> Option<f64> {
        let face = self.dirichlet_face(grid, idx)?;
        let [x1, x2] = grid.coords(idx);
        let s = match face {
            Face::XLo | Face::XHi => x2,
            Face::YLo | Face::YHi => x1,
        };
        self.face(face).value_at(t, s)
    }

    /// Largest and smallest Dirichlet values over `[0, t_max]` on the grid;
    /// `None` if no face is Dirichlet.
    pub fn dirichlet_range(&self, grid: &Grid, t_max: f64) -> Option<(f64, f64)> {
        let mut range: Option<(f64, f64)> = None;
        for idx in 0..grid.len() {
            for t in [0.0, t_max] {
                if let Some(g) = self.dirichlet_value(grid, idx, t) {
                    range = Some(match range {
                        None => (g, g),
                        Some((lo, hi)) => (lo.min(g), hi.max(g)),
                    });
                }
            }
        }
        range
    }
}

/// Boundary conditions for `u` and `v`. `p` has no spatial operator and
/// therefore no boundary condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub u: FieldBoundary,
    pub v: FieldBoundary,
}

impl BoundarySpec {
    pub fn neumann() -> Self {
        Self {
            u: FieldBoundary::neumann(),
            v: FieldBoundary::neumann(),
        }
    }

    pub fn dirichlet(u: f64, v: f64) -> Self {
        Self {
            u: FieldBoundary::dirichlet(u),
            v: FieldBoundary::dirichlet(v),
        }
    }
}

/// Nodal values of `u`, `v`, `p` at time `t`, boundary nodes included.
#[derive(Clone, Debug, PartialEq)]
pub struct StateField {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl StateField {
    pub fn zeros(len: usize) -> Self {
        Self {
            u: vec![0.0; len],
            v: vec![0.0; len],
            p: vec![0.0; len],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn check_shape(&self, grid: &Grid) -> Result<(), ModelError> {
        let n = grid.len();
        if self.u.len() != n || self.v.len() != n || self.p.len() != n {
            return Err(ModelError::ShapeMismatch {
                expected: n,
                found: self.u.len().max(self.v.len()).max(self.p.len()),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .chain(&self.p)
            .all(|x| x.is_finite())
    }

    /// `w = u - v + λp` at every node.
    pub fn enthalpy(&self, params: &ModelParams) -> Vec<f64> {
        enthalpy(self, params)
    }

    /// Node values restricted to every `stride`-th node per axis of `fine`.
    pub fn subsample(&self, fine: &Grid, stride: usize) -> StateField {
        let pick = |field: &[f64]| subsample_field(field, fine, stride);
        StateField {
            u: pick(&self.u),
            v: pick(&self.v),
            p: pick(&self.p),
            t: self.t,
        }
    }
}

pub(crate) fn subsample_field(field: &[f64], fine: &Grid, stride: usize) -> Vec<f64> {
    let coarse_side = fine.n / stride + 1;
    match fine.dim {
        1 => (0..coarse_side).map(|i| field[i * stride]).collect(),
        _ => (0..coarse_side)
            .flat_map(|j| (0..coarse_side).map(move |i| (i, j)))
            .map(|(i, j)| field[fine.index(i * stride, j * stride)])
            .collect(),
    }
}

/// `w = u - v + λp`.
pub fn enthalpy(state: &StateField, params: &ModelParams) -> Vec<f64> {
    state
        .u
        .iter()
        .zip(&state.v)
        .zip(&state.p)
        .map(|((u, v), p)| u - v + params.lambda * p)
        .collect()
}

/// Temperature `B(w)`: `d2 w` below 0, zero on the mushy range `[0, λ]`,
/// `d1 (w - λ)` above it.
pub fn temperature_at(w: f64, params: &ModelParams) -> f64 {
    if w < 0.0 {
        params.d2 * w
    } else if w <= params.lambda {
        0.0
    } else {
        params.d1 * (w - params.lambda)
    }
}

pub fn temperature(w: &[f64], params: &ModelParams) -> Vec<f64> {
    w.iter().map(|&x| temperature_at(x, params)).collect()
}

/// Named initial data of the experiments, or raw nodal arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum InitialPreset {
    /// Smooth data on `[-L, L]`: `v = cos(πx/2L) + ε0`, `u = 1 - v + ε0`,
    /// `p = x/2L + 1/2`.
    Case1Cosine { l: f64, eps0: f64 },
    /// Liquid (`u = θ/d1`, `p = 1`) for `x > 0`, solid (`v = S_t/d2`, `p = 0`)
    /// for `x < 0`; the node at `x = 0` takes the average.
    Case2Jump { theta: f64, st: f64 },
    /// Liquid everywhere, with the left end node set to the cold boundary
    /// state `u = 0`, `v = S_t/d2`, `p = 0`.
    LimitTest { theta: f64, st: f64 },
    /// Two-dimensional front along `x1 = 0`; the `x1 = ±L` columns carry the
    /// Dirichlet data `½(S_m - S_t)x2 + ½(S_m + S_t)` (for `u` at `x1 = L`)
    /// and its mirror image in `x2` (for `v` at `x1 = -L`).
    TwoD { theta: f64, st: f64, sm: f64 },
    Tabulated { u: Vec<f64>, v: Vec<f64>, p: Vec<f64> },
}

impl InitialPreset {
    pub fn name(&self) -> &'static str {
        match self {
            InitialPreset::Case1Cosine { .. } => "case1_cosine",
            InitialPreset::Case2Jump { .. } => "case2_jump",
            InitialPreset::LimitTest { .. } => "limit_test",
            InitialPreset::TwoD { .. } => "two_d",
            InitialPreset::Tabulated { .. } => "tabulated",
        }
    }

    fn required_dim(&self) -> Option<usize> {
        match self {
            InitialPreset::TwoD { .. } => Some(2),
            InitialPreset::Tabulated { .. } => None,
            _ => Some(1),
        }
    }
}

/// Samples `preset` on the nodes of `grid`.
pub fn make_initial_state(
    preset: &InitialPreset,
    grid: &Grid,
    params: &ModelParams,
) -> Result<StateField, ModelError> {
    if let Some(dim) = preset.required_dim() {
        if dim != grid.dim {
            return Err(ModelError::DimensionMismatch {
                preset: preset.name(),
                expected: dim,
                found: grid.dim,
            });
        }
    }
    let mut state = StateField::zeros(grid.len());
    // Nodes within this distance of a jump location count as lying on it.
    let snap = 1e-12 * (grid.b - grid.a);
    match *preset {
        InitialPreset::Case1Cosine { l, eps0 } => {
            for j in 0..grid.len() {
                let x = grid.x(j);
                let v = (PI * x / (2.0 * l)).cos() + eps0;
                // 1 - cos(πx/2L) in cancellation-free form
                let s = (PI * x / (4.0 * l)).sin();
                state.v[j] = v;
                state.u[j] = 2.0 * s * s;
                state.p[j] = x / (2.0 * l) + 0.5;
            }
        }
        InitialPreset::Case2Jump { theta, st } => {
            let liquid = (theta / params.d1, 0.0, 1.0);
            let solid = (0.0, st / params.d2, 0.0);
            for j in 0..grid.len() {
                let x = grid.x(j);
                let (u, v, p) = if x.abs() <= snap {
                    (
                        0.5 * (liquid.0 + solid.0),
                        0.5 * (liquid.1 + solid.1),
                        0.5 * (liquid.2 + solid.2),
                    )
                } else if x > 0.0 {
                    liquid
                } else {
                    solid
                };
                state.u[j] = u;
                state.v[j] = v;
                state.p[j] = p;
            }
        }
        InitialPreset::LimitTest { theta, st } => {
            for j in 0..grid.len() {
                let (u, v, p) = if j == 0 {
                    (0.0, st / params.d2, 0.0)
                } else {
                    (theta / params.d1, 0.0, 1.0)
                };
                state.u[j] = u;
                state.v[j] = v;
                state.p[j] = p;
            }
        }
        InitialPreset::TwoD { theta, st, sm } => {
            let half_diff = 0.5 * (sm - st);
            let half_sum = 0.5 * (sm + st);
            for idx in 0..grid.len() {
                let (i, _) = grid.split(idx);
                let [x1, x2] = grid.coords(idx);
                let (u, v, p) = if i == 0 {
                    (0.0, -half_diff * x2 + half_sum, 0.0)
                } else if i == grid.n {
                    (half_diff * x2 + half_sum, 0.0, 1.0)
                } else if x1 <= snap {
                    (0.0, theta / params.d2, 0.0)
                } else {
                    (theta / params.d1, 0.0, 1.0)
                };
                state.u[idx] = u;
                state.v[idx] = v;
                state.p[idx] = p;
            }
        }
        InitialPreset::Tabulated {
            ref u,
            ref v,
            ref p,
        } => {
            state.u.clone_from(u);
            state.v.clone_from(v);
            state.p.clone_from(p);
            state.check_shape(grid)?;
        }
    }
    Ok(state)
}

/// Time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SemiImplicit,
    Sirk2,
    FullyImplicit,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::SemiImplicit => "semi_implicit",
            Scheme::Sirk2 => "sirk2",
            Scheme::FullyImplicit => "fully_implicit",
        })
    }
}

/// Everything needed to integrate one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub grid: Grid,
    pub boundary: BoundarySpec,
    pub initial: InitialPreset,
    pub scheme: Scheme,
    pub tau: f64,
    pub t_final: f64,
    /// Times at which full fields are recorded; snapped to completed steps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
}

impl RunConfig {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = self.params.validate();
        out.extend(self.grid.validate());
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            out.push(Violation::new("run.tau", "tau must be > 0"));
        }
        if !(self.t_final >= self.tau) {
            out.push(Violation::new("run.t_final", "t_final must be >= tau"));
        }
        if let Some(dim) = self.initial.required_dim() {
            if dim != self.grid.dim {
                out.push(Violation::new(
                    "initial.preset",
                    format!(
                        "preset {} needs a {dim}D grid, got dim = {}",
                        self.initial.name(),
                        self.grid.dim
                    ),
                ));
            }
        }
        for (k, t) in self.snapshot_times.iter().enumerate() {
            if !(*t >= 0.0 && *t <= self.t_final * (1.0 + 1e-12)) {
                out.push(Violation::new(
                    format!("run.snapshot_times[{k}]"),
                    "snapshot time must lie in [0, t_final]",
                ));
            }
        }
        out
    }

    /// Number of steps; the last one is shortened to land on `t_final`.
    pub fn n_steps(&self) -> usize {
        step_count(self.t_final, self.tau)
    }

    /// Step sizes of the whole run.
    pub fn step_sizes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_steps();
        (0..n).map(move |k| {
            if k + 1 == n {
                self.t_final - k as f64 * self.tau
            } else {
                self.tau
            }
        })
    }
}

pub(crate) fn step_count(t_final: f64, tau: f64) -> usize {
    let ratio = t_final / tau;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest.max(1.0) as usize
    } else {
        ratio.ceil() as usize
    }
}
