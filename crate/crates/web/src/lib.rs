//! WebAssembly bindings for the browser demo in `www/`.

use fastrd_core::analysis::{growth_factors, interface_position, GrowthFactorQuery, LimitState};
use fastrd_core::experiment::preset;
use fastrd_core::{advance, temperature, ModelParams, Problem, Scheme, SolverOptions, StateField};
use wasm_bindgen::prelude::*;

/// A 1D run started from one of the shipped presets.
#[wasm_bindgen]
pub struct Simulation {
    problem: Problem,
    scheme: Scheme,
    tau: f64,
    state: StateField,
}

#[wasm_bindgen]
impl Simulation {
    /// `epsilon`, `n` and `tau` override the preset when positive.
    #[wasm_bindgen(constructor)]
    pub fn new(name: &str, epsilon: f64, n: usize, tau: f64) -> Result<Simulation, String> {
        let spec = preset(name).map_err(|e| e.to_string())?;
        let mut run = spec.run;
        if run.grid.dim != 1 {
            return Err(format!("preset {name} is not one-dimensional"));
        }
        if epsilon > 0.0 {
            run.params.epsilon = epsilon;
        }
        if n > 0 {
            run.grid.n = n;
        }
        if tau > 0.0 {
            run.tau = tau;
        }
        if let Some(v) = run.validate().first() {
            return Err(format!("{}: {}", v.key, v.message));
        }
        let state = run.initial_state().map_err(|e| e.to_string())?;
        Ok(Simulation {
            problem: run.problem(SolverOptions::default()),
            scheme: run.scheme,
            tau: run.tau,
            state,
        })
    }

    /// Advances `steps` steps; returns the new time.
    pub fn step(&mut self, steps: usize) -> Result<f64, String> {
        for _ in 0..steps {
            self.state = advance(&self.problem, &self.state, self.tau, self.scheme)
                .map_err(|e| e.to_string())?;
        }
        Ok(self.state.t)
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn x(&self) -> Vec<f64> {
        (0..self.problem.grid.len()).map(|j| self.problem.grid.x(j)).collect()
    }

    pub fn u(&self) -> Vec<f64> {
        self.state.u.clone()
    }

    pub fn v(&self) -> Vec<f64> {
        self.state.v.clone()
    }

    pub fn p(&self) -> Vec<f64> {
        self.state.p.clone()
    }

    pub fn w(&self) -> Vec<f64> {
        self.state.enthalpy(&self.problem.params)
    }

    pub fn lambda(&self) -> f64 {
        self.problem.params.lambda
    }

    /// First crossing of `w = λ/2`, or NaN.
    pub fn interface(&self) -> f64 {
        interface_position(&self.w(), &self.problem.grid, &self.problem.params)[0]
            .first()
            .copied()
            .unwrap_or(f64::NAN)
    }
}

fn limit_state(case: &str, value: f64) -> Result<LimitState, String> {
    let s = match case {
        "s1" => LimitState::S1 { v_star: value },
        "s2" => LimitState::S2 { u_star: value },
        "s3" => LimitState::S3 { p1: value },
        _ => return Err(format!("unknown limit state {case}; expected s1, s2 or s3")),
    };
    if !s.is_admissible() {
        return Err(format!("{value} is not admissible for {}", s.label()));
    }
    Ok(s)
}

/// The three growth factors at `points` phases in `[0, π]`, laid out as
/// `[branch1..., branch2..., branch3...]`.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn growth_curves(
    case: &str,
    value: f64,
    r: f64,
    r_eps: f64,
    lambda: f64,
    d1: f64,
    d2: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let state = limit_state(case, value)?;
    let params = ModelParams::new(1.0, lambda, d1, d2).map_err(|e| e.to_string())?;
    let points = points.max(2);
    let mut out = vec![0.0; 3 * points];
    for k in 0..points {
        let phi = std::f64::consts::PI * k as f64 / (points - 1) as f64;
        let g = growth_factors(&GrowthFactorQuery { r, r_eps, phi, params, state });
        for b in 0..3 {
            out[b * points + k] = g[b];
        }
    }
    Ok(out)
}

/// Temperature `B(w)` at `points` enthalpies spread over `[w_min, w_max]`.
#[wasm_bindgen]
pub fn temperature_curve(
    lambda: f64,
    d1: f64,
    d2: f64,
    w_min: f64,
    w_max: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let params = ModelParams::new(1.0, lambda, d1, d2).map_err(|e| e.to_string())?;
    let points = points.max(2);
    let w: Vec<f64> = (0..points)
        .map(|k| w_min + (w_max - w_min) * k as f64 / (points - 1) as f64)
        .collect();
    Ok(temperature(&w, &params))
}
