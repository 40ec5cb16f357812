//! Time integration of a configured run.

use crate::error::{Result, SolverError};
use crate::model::{make_initial_state, step_count, RunConfig, Scheme, StateField};
use crate::reference::{fully_implicit_step, FixedPointConfig};
use crate::semi_implicit;
use crate::sirk2::{sirk2_step, ButcherPair};
use crate::spatial::{Problem, SolverOptions};

/// One step of `scheme`.
pub fn advance(
    problem: &Problem,
    state: &StateField,
    tau: f64,
    scheme: Scheme,
) -> Result<StateField, SolverError> {
    let next = match scheme {
        Scheme::SemiImplicit => semi_implicit::step(problem, state, tau)?,
        Scheme::Sirk2 => sirk2_step(problem, state, tau, &ButcherPair::sirk2())?,
        Scheme::FullyImplicit => {
            fully_implicit_step(problem, state, tau, &FixedPointConfig::default())?.state
        }
    };
    if !next.is_finite() {
        return Err(SolverError::NonFinite { t: next.t });
    }
    Ok(next)
}

/// Integrates from `initial` to `t_final` with steps of `tau`, shortening
/// the last one. `observe` sees the initial state and every new state.
pub fn integrate(
    problem: &Problem,
    initial: StateField,
    scheme: Scheme,
    tau: f64,
    t_final: f64,
    mut observe: impl FnMut(&StateField),
) -> Result<StateField, SolverError> {
    let n = step_count(t_final - initial.t, tau);
    let t0 = initial.t;
    let mut state = initial;
    observe(&state);
    for k in 0..n {
        let dt = if k + 1 == n {
            t_final - t0 - k as f64 * tau
        } else {
            tau
        };
        let mut next = advance(problem, &state, dt, scheme)?;
        // avoid drift from summing k copies of tau
        next.t = if k + 1 == n {
            t_final
        } else {
            t0 + (k + 1) as f64 * tau
        };
        state = next;
        observe(&state);
    }
    Ok(state)
}

impl RunConfig {
    pub fn problem(&self, solver: SolverOptions) -> Problem {
        Problem {
            params: self.params,
            grid: self.grid,
            boundary: self.boundary,
            solver,
        }
    }

    pub fn initial_state(&self) -> Result<StateField> {
        Ok(make_initial_state(&self.initial, &self.grid, &self.params)?)
    }

    /// Runs to `t_final` and returns the final state.
    pub fn run(&self, solver: SolverOptions) -> Result<StateField> {
        self.run_observed(solver, |_| {})
    }

    pub fn run_observed(
        &self,
        solver: SolverOptions,
        observe: impl FnMut(&StateField),
    ) -> Result<StateField> {
        let problem = self.problem(solver);
        let s0 = self.initial_state()?;
        Ok(integrate(&problem, s0, self.scheme, self.tau, self.t_final, observe)?)
    }
}

/// Axis along which a reference solution is refined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Refinement {
    /// Halve `tau` this many times.
    InTime(u32),
    /// Halve `h` this many times; the result is sampled back onto the
    /// original nodes.
    InSpace(u32),
}

/// Final state of `config` run at a finer resolution.
pub fn make_reference(config: &RunConfig, refinement: Refinement, solver: SolverOptions) -> Result<StateField> {
    match refinement {
        Refinement::InTime(levels) => {
            let mut fine = config.clone();
            fine.tau = config.tau / f64::from(1u32 << levels);
            fine.run(solver)
        }
        Refinement::InSpace(levels) => {
            let factor = 1usize << levels;
            let mut fine = config.clone();
            fine.grid = config.grid.refined(factor);
            let out = fine.run(solver)?;
            Ok(out.subsample(&fine.grid, factor))
        }
    }
}
