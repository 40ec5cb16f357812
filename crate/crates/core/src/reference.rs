//! Fully implicit backward Euler, solved by repeated semi-implicit sweeps,
//! plus the residual diagnostics of the semi-implicit scheme.

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::model::StateField;
use crate::semi_implicit::{step_u, step_v};
use crate::spatial::{laplacian, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConfig {
    /// Bound on the max-norm change between sweeps, relative to the iterate.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_sweeps: 200,
        }
    }
}

/// Accepted relative backward-Euler residual after the sweeps stop.
pub const IMPLICIT_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ImplicitOutcome {
    pub state: StateField,
    pub sweeps: usize,
    pub residual: f64,
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Max-norm backward-Euler residual, each equation multiplied by `τ` and
/// the whole divided by the largest field magnitude of `next`.
pub fn backward_euler_residual(
    problem: &Problem,
    prev: &StateField,
    next: &StateField,
    tau: f64,
) -> f64 {
    let prm = &problem.params;
    let grid = &problem.grid;
    let r = tau / prm.epsilon;
    let lap_u = laplacian(grid, &problem.boundary.u, &next.u);
    let lap_v = laplacian(grid, &problem.boundary.v, &next.v);
    let mut worst = 0.0f64;
    for j in 0..grid.len() {
        let (u, v, p) = (next.u[j], next.v[j], next.p[j]);
        if problem.boundary.u.dirichlet_face(grid, j).is_none() {
            let ru = u - prev.u[j] - prm.d1 * tau * lap_u[j] + r * u * (v + prm.lambda * (1.0 - p));
            worst = worst.max(ru.abs());
        }
        if problem.boundary.v.dirichlet_face(grid, j).is_none() {
            let rv = v - prev.v[j] - prm.d2 * tau * lap_v[j] + r * v * (u + prm.lambda * p);
            worst = worst.max(rv.abs());
        }
        let rp = p - prev.p[j] - r * ((1.0 - p) * u - v * p);
        worst = worst.max(rp.abs());
    }
    let scale = max_abs(&next.u).max(max_abs(&next.v)).max(max_abs(&next.p));
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// One backward-Euler step. Each sweep is the semi-implicit `p → u → v`
/// pass with the cross terms taken from the previous sweep; the first sweep
/// is exactly the semi-implicit step.
pub fn fully_implicit_step(
    problem: &Problem,
    state: &StateField,
    tau: f64,
    cfg: &FixedPointConfig,
) -> Result<ImplicitOutcome, SolverError> {
    let r = tau / problem.params.epsilon;
    let mut cur = state.clone();
    cur.t = state.t + tau;
    let mut update = f64::INFINITY;
    for sweep in 1..=cfg.max_sweeps {
        let p: Vec<f64> = (0..state.len())
            .map(|j| (state.p[j] + r * cur.u[j]) / (1.0 + r * (cur.u[j] + cur.v[j])))
            .collect();
        let frozen_v = StateField {
            v: cur.v.clone(),
            ..state.clone()
        };
        let u = step_u(problem, &frozen_v, &p, tau)?;
        let v = step_v(problem, state, &u, &p, tau)?;
        let change = max_diff(&u, &cur.u)
            .max(max_diff(&v, &cur.v))
            .max(max_diff(&p, &cur.p));
        let size = max_abs(&u).max(max_abs(&v)).max(max_abs(&p));
        update = if size > 0.0 { change / size } else { change };
        cur.u = u;
        cur.v = v;
        cur.p = p;
        if !cur.is_finite() {
            return Err(SolverError::NonFinite { t: cur.t });
        }
        if update <= cfg.tol {
            let residual = backward_euler_residual(problem, state, &cur, tau);
            if residual > IMPLICIT_RESIDUAL_TOL {
                return Err(SolverError::FixedPoint {
                    sweeps: sweep,
                    update,
                    residual,
                });
            }
            return Ok(ImplicitOutcome {
                state: cur,
                sweeps: sweep,
                residual,
            });
        }
    }
    Err(SolverError::FixedPoint {
        sweeps: cfg.max_sweeps,
        update,
        residual: backward_euler_residual(problem, state, &cur, tau),
    })
}

/// Pointwise residual left when the semi-implicit step is substituted into
/// the time-continuous reaction balance of `w`:
/// `R = -(1/ε)u⁺[vⁿ + λ(1-p⁺)] + (1/ε)v⁺(u⁺ + λp⁺) + (λ/ε)[(1-p⁺)uⁿ - vⁿp⁺]`.
pub fn residual_diagnostic(
    prev: &StateField,
    next: &StateField,
    params: &crate::model::ModelParams,
) -> Vec<f64> {
    let inv = 1.0 / params.epsilon;
    let lam = params.lambda;
    (0..prev.len())
        .map(|j| {
            let (u0, v0) = (prev.u[j], prev.v[j]);
            let (u1, v1, p1) = (next.u[j], next.v[j], next.p[j]);
            -inv * u1 * (v0 + lam * (1.0 - p1))
                + inv * v1 * (u1 + lam * p1)
                + lam * inv * ((1.0 - p1) * u0 - v0 * p1)
        })
        .collect()
}
