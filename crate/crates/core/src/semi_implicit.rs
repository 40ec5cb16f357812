//! First-order fully discrete semi-implicit scheme.
//!
//! One step advances `p`, then `u`, then `v`:
//!
//! ```text
//! [1 + (τ/ε)(uⁿ + vⁿ)] pⁿ⁺¹                        = pⁿ + (τ/ε) uⁿ
//! [1 + (τ/ε)(vⁿ + λ(1 - pⁿ⁺¹)) - d1 τ Δ_h] uⁿ⁺¹    = uⁿ
//! [1 + (τ/ε)(uⁿ⁺¹ + λ pⁿ⁺¹)   - d2 τ Δ_h] vⁿ⁺¹    = vⁿ
//! ```
//!
//! Each row only needs a linear solve, and the ordering is what keeps
//! `0 ≤ p ≤ 1` and the max-principle bounds on `u` and `v`.

use crate::error::SolverError;
use crate::model::StateField;
use crate::spatial::{ImplicitOperator, Problem};

/// Pointwise `p` update; applies on boundary nodes too.
pub fn step_p(problem: &Problem, state: &StateField, tau: f64) -> Vec<f64> {
    let r = tau / problem.params.epsilon;
    state
        .p
        .iter()
        .zip(&state.u)
        .zip(&state.v)
        .map(|((p, u), v)| (p + r * u) / (1.0 + r * (u + v)))
        .collect()
}

/// Reaction coefficient `(τ/ε)(vⁿ + λ(1 - pⁿ⁺¹))` of the `u` row.
pub fn u_reaction(problem: &Problem, v: &[f64], p_next: &[f64], tau: f64) -> Vec<f64> {
    let r = tau / problem.params.epsilon;
    let lambda = problem.params.lambda;
    v.iter()
        .zip(p_next)
        .map(|(v, p)| r * (v + lambda * (1.0 - p)))
        .collect()
}

/// Reaction coefficient `(τ/ε)(uⁿ⁺¹ + λ pⁿ⁺¹)` of the `v` row.
pub fn v_reaction(problem: &Problem, u_next: &[f64], p_next: &[f64], tau: f64) -> Vec<f64> {
    let r = tau / problem.params.epsilon;
    let lambda = problem.params.lambda;
    u_next
        .iter()
        .zip(p_next)
        .map(|(u, p)| r * (u + lambda * p))
        .collect()
}

/// Implicit `u` solve; Dirichlet data taken at `state.t + tau`.
pub fn step_u(
    problem: &Problem,
    state: &StateField,
    p_next: &[f64],
    tau: f64,
) -> Result<Vec<f64>, SolverError> {
    let reaction = u_reaction(problem, &state.v, p_next, tau);
    let t_next = state.t + tau;
    let op = ImplicitOperator {
        grid: &problem.grid,
        bc: &problem.boundary.u,
        reaction: &reaction,
        diffusion: problem.params.d1 * tau,
    };
    op.solve(
        &state.u,
        |k| {
            problem
                .boundary
                .u
                .dirichlet_value(&problem.grid, k, t_next)
                .unwrap_or(0.0)
        },
        &state.u,
        &problem.solver,
    )
}

/// Implicit `v` solve, using the new `u` in the reaction coefficient.
pub fn step_v(
    problem: &Problem,
    state: &StateField,
    u_next: &[f64],
    p_next: &[f64],
    tau: f64,
) -> Result<Vec<f64>, SolverError> {
    let reaction = v_reaction(problem, u_next, p_next, tau);
    let t_next = state.t + tau;
    let op = ImplicitOperator {
        grid: &problem.grid,
        bc: &problem.boundary.v,
        reaction: &reaction,
        diffusion: problem.params.d2 * tau,
    };
    op.solve(
        &state.v,
        |k| {
            problem
                .boundary
                .v
                .dirichlet_value(&problem.grid, k, t_next)
                .unwrap_or(0.0)
        },
        &state.v,
        &problem.solver,
    )
}

/// One step `p → u → v`.
pub fn step(problem: &Problem, state: &StateField, tau: f64) -> Result<StateField, SolverError> {
    let p = step_p(problem, state, tau);
    let u = step_u(problem, state, &p, tau)?;
    let v = step_v(problem, state, &u, &p, tau)?;
    Ok(StateField {
        u,
        v,
        p,
        t: state.t + tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense;
    use crate::model::{
        make_initial_state, BoundarySpec, FieldBoundary, Grid, InitialPreset, ModelParams,
    };

    fn problem(eps: f64, d1: f64, d2: f64, grid: Grid, bc: BoundarySpec) -> Problem {
        Problem::new(ModelParams { epsilon: eps, lambda: 1.0, d1, d2 }, grid, bc)
    }

    #[test]
    fn p_update_examples() {
        let pr = problem(1.0, 1.0, 1.0, Grid::line(0.0, 1.0, 2), BoundarySpec::neumann());
        let s = StateField {
            u: vec![0.0, 1.0, 0.0],
            v: vec![0.0, 0.0, 3.0],
            p: vec![0.3, 0.5, 1.0],
            t: 0.0,
        };
        let p = step_p(&pr, &s, 1.0);
        assert_eq!(p[0], 0.3);
        assert_eq!(p[1], 0.75);
        assert_eq!(p[2], 0.25);
    }

    #[test]
    fn diffusion_off_reduces_to_closed_forms() {
        let grid = Grid::line(-1.0, 1.0, 9);
        let pr = problem(0.1, 0.0, 0.0, grid, BoundarySpec::neumann());
        let s = StateField {
            u: (0..10).map(|k| 0.1 * k as f64).collect(),
            v: (0..10).map(|k| 0.05 * (9 - k) as f64).collect(),
            p: (0..10).map(|k| (k as f64 / 9.0).powi(2)).collect(),
            t: 0.0,
        };
        let tau = 0.03;
        let r = tau / 0.1;
        let next = step(&pr, &s, tau).unwrap();
        for j in 0..10 {
            let p = (s.p[j] + r * s.u[j]) / (1.0 + r * (s.u[j] + s.v[j]));
            let u = s.u[j] / (1.0 + r * (s.v[j] + (1.0 - p)));
            let v = s.v[j] / (1.0 + r * (u + p));
            assert!((next.p[j] - p).abs() <= 1e-16);
            assert!((next.u[j] - u).abs() <= 1e-16);
            assert!((next.v[j] - v).abs() <= 1e-16);
        }
    }

    #[test]
    fn zero_fields_stay_zero() {
        let pr = problem(
            0.01,
            1.0,
            2.0,
            Grid::line(-1.0, 1.0, 8),
            BoundarySpec::dirichlet(0.0, 0.0),
        );
        let s = StateField {
            u: vec![0.0; 9],
            v: vec![0.0; 9],
            p: (0..9).map(|k| k as f64 / 8.0).collect(),
            t: 0.0,
        };
        let next = step(&pr, &s, 0.01).unwrap();
        assert_eq!(next.u, s.u);
        assert_eq!(next.v, s.v);
        assert_eq!(next.p, s.p);
        assert_eq!(next.t, 0.01);
    }

    #[test]
    fn hand_built_n4_matches_dense() {
        // interior nodes 1..=3 of a 4-cell line with Dirichlet data
        let grid = Grid::line(0.0, 1.0, 4);
        let bc = BoundarySpec {
            u: FieldBoundary::dirichlet(0.4),
            v: FieldBoundary::dirichlet(0.1),
        };
        let pr = problem(0.5, 1.0, 2.0, grid, bc);
        let s = StateField {
            u: vec![0.4, 0.2, 0.3, 0.1, 0.4],
            v: vec![0.1, 0.3, 0.05, 0.2, 0.1],
            p: vec![0.0, 0.5, 0.9, 0.2, 1.0],
            t: 0.0,
        };
        let tau = 0.01;
        let h2 = 0.25f64 * 0.25;
        let p = step_p(&pr, &s, tau);
        let u = step_u(&pr, &s, &p, tau).unwrap();
        let v = step_v(&pr, &s, &u, &p, tau).unwrap();
        let r = tau / 0.5;

        let solve3 = |coef: [f64; 3], c: f64, rhs: [f64; 3], g: f64| {
            let a = vec![
                vec![1.0 + coef[0] + 2.0 * c, -c, 0.0],
                vec![-c, 1.0 + coef[1] + 2.0 * c, -c],
                vec![0.0, -c, 1.0 + coef[2] + 2.0 * c],
            ];
            dense::solve(a, vec![rhs[0] + c * g, rhs[1], rhs[2] + c * g])
        };
        let cu = 1.0 * tau / h2;
        let coef_u = [1, 2, 3].map(|j| r * (s.v[j] + (1.0 - p[j])));
        let exact_u = solve3(coef_u, cu, [s.u[1], s.u[2], s.u[3]], 0.4);
        let cv = 2.0 * tau / h2;
        let coef_v = [1, 2, 3].map(|j| r * (u[j] + p[j]));
        let exact_v = solve3(coef_v, cv, [s.v[1], s.v[2], s.v[3]], 0.1);
        for k in 0..3 {
            assert!((u[k + 1] - exact_u[k]).abs() <= 1e-13);
            assert!((v[k + 1] - exact_v[k]).abs() <= 1e-13);
        }
        assert_eq!((u[0], u[4], v[0], v[4]), (0.4, 0.4, 0.1, 0.1));
    }

    #[test]
    fn case1_single_step_respects_bounds() {
        let grid = Grid::line(-1.0, 1.0, 160);
        let params = ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let bc = BoundarySpec::dirichlet(1.0, 1e-8);
        let pr = Problem::new(params, grid, bc);
        let s0 = make_initial_state(
            &InitialPreset::Case1Cosine { l: 1.0, eps0: 1e-8 },
            &grid,
            &params,
        )
        .unwrap();
        let c_u = s0.u.iter().cloned().fold(1.0, f64::max);
        let c_v = s0.v.iter().cloned().fold(1e-8, f64::max);
        let s1 = step(&pr, &s0, 2e-3).unwrap();
        for j in 0..grid.len() {
            assert!((0.0..=1.0).contains(&s1.p[j]));
            assert!(s1.u[j] >= 0.0 && s1.u[j] <= c_u + 1e-12);
            assert!(s1.v[j] >= 0.0 && s1.v[j] <= c_v + 1e-12);
        }
    }
}
