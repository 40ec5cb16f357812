//! Two-stage, second-order semi-implicit Runge–Kutta scheme.
//!
//! The right-hand side is written as `H(y, z)` with a duplicated copy `z` of
//! the state; `y` enters explicitly and `z` implicitly:
//!
//! ```text
//! H_u = d1 Δ z_u - (1/ε) z_u [y_v + λ(1 - y_p)]
//! H_v = d2 Δ z_v - (1/ε) z_v (y_u + λ y_p)
//! H_p = (1/ε) (z_u - (y_u + y_v) z_p)
//! ```
//!
//! Stage `i` solves `k_i = H(Y_i, Z̃_i + τ a_ii k_i)`, which is a linear
//! system that is block lower triangular in `(k_u, k_v, k_p)`: two implicit
//! diffusion solves followed by a pointwise `p` row.

use crate::error::SolverError;
use crate::model::StateField;
use crate::spatial::{laplacian, ImplicitOperator, Problem};

/// Explicit/implicit tableau pair of a two-stage scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ButcherPair {
    pub a_hat: [[f64; 2]; 2],
    pub a: [[f64; 2]; 2],
    pub b_hat: [f64; 2],
    pub b: [f64; 2],
    pub c_hat: [f64; 2],
    pub c: [f64; 2],
}

/// `γ = 1 - 1/√2`.
pub fn gamma() -> f64 {
    1.0 - 1.0 / 2f64.sqrt()
}

impl ButcherPair {
    /// The second-order pair with `a_ii = γ` and `â₂₁ = 1/(2γ)`.
    pub fn sirk2() -> Self {
        let g = gamma();
        let c0 = 1.0 / (2.0 * g);
        Self {
            a_hat: [[0.0, 0.0], [c0, 0.0]],
            a: [[g, 0.0], [1.0 - g, g]],
            b_hat: [1.0 - g, g],
            b: [1.0 - g, g],
            c_hat: [0.0, c0],
            c: [g, 1.0],
        }
    }

    /// Structural checks: triangularity, equal diagonal, row sums.
    pub fn check(&self) -> Result<(), String> {
        let tol = 1e-15;
        if self.a_hat[0] != [0.0, 0.0] || self.a_hat[1][1] != 0.0 {
            return Err("explicit tableau must be strictly lower triangular".into());
        }
        if self.a[0][1] != 0.0 {
            return Err("implicit tableau must be lower triangular".into());
        }
        if (self.a[0][0] - self.a[1][1]).abs() > tol || self.a[0][0] <= 0.0 {
            return Err("implicit diagonal must be a single positive value".into());
        }
        for i in 0..2 {
            let hat: f64 = self.a_hat[i][..i].iter().sum();
            let imp: f64 = self.a[i][..=i].iter().sum();
            if (hat - self.c_hat[i]).abs() > tol || (imp - self.c[i]).abs() > tol {
                return Err(format!("row-sum condition fails in row {i}"));
            }
        }
        if (self.b_hat.iter().sum::<f64>() - 1.0).abs() > tol
            || (self.b.iter().sum::<f64>() - 1.0).abs() > tol
        {
            return Err("weights must sum to one".into());
        }
        Ok(())
    }
}

/// Stage flux `k_i = (k_u, k_v, k_p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StageFlux {
    pub k_u: Vec<f64>,
    pub k_v: Vec<f64>,
    pub k_p: Vec<f64>,
}

/// `f_i`: the stage right-hand side with `k_i = 0`, i.e. `H(Y, Z̃)`.
pub fn stage_rhs(problem: &Problem, y: &StateField, z: &StateField) -> StageFlux {
    let prm = &problem.params;
    let inv_eps = 1.0 / prm.epsilon;
    let lap_u = laplacian(&problem.grid, &problem.boundary.u, &z.u);
    let lap_v = laplacian(&problem.grid, &problem.boundary.v, &z.v);
    let n = problem.grid.len();
    let mut f = StageFlux {
        k_u: vec![0.0; n],
        k_v: vec![0.0; n],
        k_p: vec![0.0; n],
    };
    for j in 0..n {
        f.k_u[j] = -inv_eps * z.u[j] * (y.v[j] + prm.lambda * (1.0 - y.p[j])) + prm.d1 * lap_u[j];
        f.k_v[j] = -inv_eps * z.v[j] * (y.u[j] + prm.lambda * y.p[j]) + prm.d2 * lap_v[j];
        f.k_p[j] = inv_eps * z.u[j] - inv_eps * (y.u[j] + y.v[j]) * z.p[j];
    }
    f
}

struct StageCoefficients {
    react_u: Vec<f64>,
    react_v: Vec<f64>,
    react_p: Vec<f64>,
    /// `τ a_ii / ε`, the coupling of `k_u` into the `p` row.
    coupling: f64,
}

fn stage_coefficients(problem: &Problem, y: &StateField, a_ii: f64, tau: f64) -> StageCoefficients {
    let prm = &problem.params;
    let s = tau * a_ii / prm.epsilon;
    let n = y.len();
    StageCoefficients {
        react_u: (0..n).map(|j| s * (y.v[j] + prm.lambda * (1.0 - y.p[j]))).collect(),
        react_v: (0..n).map(|j| s * (y.u[j] + prm.lambda * y.p[j])).collect(),
        react_p: (0..n).map(|j| s * (y.u[j] + y.v[j])).collect(),
        coupling: s,
    }
}

/// Solves `M_i k_i = f_i`. Dirichlet nodes are pinned so that
/// `Z̃ + τ a_ii k` equals the boundary data at `t_stage`.
pub fn stage_solve(
    problem: &Problem,
    y: &StateField,
    z: &StateField,
    a_ii: f64,
    tau: f64,
    t_stage: f64,
) -> Result<StageFlux, SolverError> {
    let prm = &problem.params;
    let grid = &problem.grid;
    let f = stage_rhs(problem, y, z);
    let coef = stage_coefficients(problem, y, a_ii, tau);
    let step = tau * a_ii;

    let op_u = ImplicitOperator {
        grid,
        bc: &problem.boundary.u,
        reaction: &coef.react_u,
        diffusion: prm.d1 * step,
    };
    let k_u = op_u.solve(
        &f.k_u,
        |k| {
            let g = problem.boundary.u.dirichlet_value(grid, k, t_stage).unwrap_or(0.0);
            (g - z.u[k]) / step
        },
        &vec![0.0; grid.len()],
        &problem.solver,
    )?;
    let op_v = ImplicitOperator {
        grid,
        bc: &problem.boundary.v,
        reaction: &coef.react_v,
        diffusion: prm.d2 * step,
    };
    let k_v = op_v.solve(
        &f.k_v,
        |k| {
            let g = problem.boundary.v.dirichlet_value(grid, k, t_stage).unwrap_or(0.0);
            (g - z.v[k]) / step
        },
        &vec![0.0; grid.len()],
        &problem.solver,
    )?;
    let k_p = (0..grid.len())
        .map(|j| (f.k_p[j] + coef.coupling * k_u[j]) / (1.0 + coef.react_p[j]))
        .collect();
    Ok(StageFlux { k_u, k_v, k_p })
}

/// `‖M_i k - f_i‖∞` over free nodes (every node for the `p` row).
pub fn stage_residual(
    problem: &Problem,
    y: &StateField,
    z: &StateField,
    a_ii: f64,
    tau: f64,
    k: &StageFlux,
) -> f64 {
    let grid = &problem.grid;
    let f = stage_rhs(problem, y, z);
    let coef = stage_coefficients(problem, y, a_ii, tau);
    let step = tau * a_ii;
    let mu = ImplicitOperator {
        grid,
        bc: &problem.boundary.u,
        reaction: &coef.react_u,
        diffusion: problem.params.d1 * step,
    }
    .apply(&k.k_u);
    let mv = ImplicitOperator {
        grid,
        bc: &problem.boundary.v,
        reaction: &coef.react_v,
        diffusion: problem.params.d2 * step,
    }
    .apply(&k.k_v);
    let mut worst = 0.0f64;
    for j in 0..grid.len() {
        if problem.boundary.u.dirichlet_face(grid, j).is_none() {
            worst = worst.max((mu[j] - f.k_u[j]).abs());
        }
        if problem.boundary.v.dirichlet_face(grid, j).is_none() {
            worst = worst.max((mv[j] - f.k_v[j]).abs());
        }
        let mp = (1.0 + coef.react_p[j]) * k.k_p[j] - coef.coupling * k.k_u[j];
        worst = worst.max((mp - f.k_p[j]).abs());
    }
    worst
}

/// `‖f_i‖∞` over the same nodes `stage_residual` inspects.
pub fn stage_rhs_norm(problem: &Problem, y: &StateField, z: &StateField) -> f64 {
    let f = stage_rhs(problem, y, z);
    let grid = &problem.grid;
    (0..grid.len()).fold(0.0f64, |m, j| {
        let mut m = m.max(f.k_p[j].abs());
        if problem.boundary.u.dirichlet_face(grid, j).is_none() {
            m = m.max(f.k_u[j].abs());
        }
        if problem.boundary.v.dirichlet_face(grid, j).is_none() {
            m = m.max(f.k_v[j].abs());
        }
        m
    })
}

fn axpy(base: &StateField, scale: f64, k: &StageFlux, t: f64) -> StateField {
    let comb = |x: &[f64], d: &[f64]| x.iter().zip(d).map(|(a, b)| a + scale * b).collect();
    StateField {
        u: comb(&base.u, &k.k_u),
        v: comb(&base.v, &k.k_v),
        p: comb(&base.p, &k.k_p),
        t,
    }
}

/// Intermediate quantities of one step, kept for diagnostics.
#[derive(Clone, Debug)]
pub struct Sirk2Stages {
    pub stages: [(StateField, StateField, StageFlux); 2],
    pub next: StateField,
}

/// One step, returning the stage data alongside the new state.
pub fn sirk2_step_traced(
    problem: &Problem,
    state: &StateField,
    tau: f64,
    tableau: &ButcherPair,
) -> Result<Sirk2Stages, SolverError> {
    let t = state.t;
    let y1 = state.clone();
    let z1 = state.clone();
    let k1 = stage_solve(problem, &y1, &z1, tableau.a[0][0], tau, t + tableau.c[0] * tau)?;
    let y2 = axpy(state, tau * tableau.a_hat[1][0], &k1, t + tableau.c_hat[1] * tau);
    let z2 = axpy(state, tau * tableau.a[1][0], &k1, t + tableau.c[1] * tau);
    let k2 = stage_solve(problem, &y2, &z2, tableau.a[1][1], tau, t + tableau.c[1] * tau)?;
    let n = state.len();
    let combine = |x: &[f64], a: &[f64], b: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|j| x[j] + tau * (tableau.b_hat[0] * a[j] + tableau.b_hat[1] * b[j]))
            .collect()
    };
    let next = StateField {
        u: combine(&state.u, &k1.k_u, &k2.k_u),
        v: combine(&state.v, &k1.k_v, &k2.k_v),
        p: combine(&state.p, &k1.k_p, &k2.k_p),
        t: t + tau,
    };
    Ok(Sirk2Stages {
        stages: [(y1, z1, k1), (y2, z2, k2)],
        next,
    })
}

pub fn sirk2_step(
    problem: &Problem,
    state: &StateField,
    tau: f64,
    tableau: &ButcherPair,
) -> Result<StateField, SolverError> {
    sirk2_step_traced(problem, state, tau, tableau).map(|s| s.next)
}
