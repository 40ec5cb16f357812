//! Error norms, convergence orders, growth factors and interface diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::{Grid, ModelParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTriple {
    pub e_inf: f64,
    pub e_1: f64,
    pub e_2: f64,
}

/// Discrete max, L¹ and L² errors. Sums run over every node and carry the
/// cell measure `h^dim`.
pub fn error_norms(
    numeric: &[f64],
    reference: &[f64],
    h: f64,
    dim: usize,
) -> Result<ErrorTriple, ModelError> {
    if numeric.len() != reference.len() {
        return Err(ModelError::ShapeMismatch {
            expected: reference.len(),
            found: numeric.len(),
        });
    }
    let w = h.powi(dim as i32);
    let mut out = ErrorTriple::default();
    let mut sq = 0.0;
    for (a, b) in numeric.iter().zip(reference) {
        let d = (a - b).abs();
        out.e_inf = out.e_inf.max(d);
        out.e_1 += d;
        sq += d * d;
    }
    out.e_1 *= w;
    out.e_2 = (w * sq).sqrt();
    Ok(out)
}

/// Orders between consecutive rows of a refinement table.
///
/// Rows are `(step, err)` in any order; the result is sorted by ascending
/// step and each row except the finest carries the order measured against
/// the next finer row. `None` marks a pair with a zero or non-finite error.
pub fn observed_orders(rows: &[(f64, f64)]) -> Vec<(f64, f64, Option<f64>)> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(sorted.len());
    for (i, &(s, e)) in sorted.iter().enumerate() {
        let order = if i == 0 {
            None
        } else {
            let (s0, e0) = sorted[i - 1];
            let o = (e / e0).ln() / (s / s0).ln();
            (e > 0.0 && e0 > 0.0 && o.is_finite()).then_some(o)
        };
        out.push((s, e, order));
    }
    out
}

/// Least-squares slope of `log err` against `log step`.
pub fn fitted_slope(rows: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(s, e)| *s > 0.0 && *e > 0.0)
        .map(|(s, e)| (s.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Spatially constant states the ε → 0 limit can settle into.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitState {
    /// Solid: `u = 0, p = 0, v = v* > 0`.
    S1 { v_star: f64 },
    /// Liquid: `v = 0, p = 1, u = u* > 0`.
    S2 { u_star: f64 },
    /// Mushy: `u = v = 0, p = p1 ∈ [0, 1]`.
    S3 { p1: f64 },
}

impl LimitState {
    pub fn label(&self) -> &'static str {
        match self {
            LimitState::S1 { .. } => "S1",
            LimitState::S2 { .. } => "S2",
            LimitState::S3 { .. } => "S3",
        }
    }

    pub fn is_admissible(&self) -> bool {
        match *self {
            LimitState::S1 { v_star } => v_star > 0.0,
            LimitState::S2 { u_star } => u_star > 0.0,
            LimitState::S3 { p1 } => (0.0..=1.0).contains(&p1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthFactorQuery {
    /// `τ/h²`
    pub r: f64,
    /// `τ/ε`
    pub r_eps: f64,
    /// Phase `m_k h`.
    pub phi: f64,
    pub params: ModelParams,
    pub state: LimitState,
}

/// Amplification factors of the three decoupled branches of the scheme
/// linearised about a limit state.
pub fn growth_factors(q: &GrowthFactorQuery) -> [f64; 3] {
    let ModelParams { lambda, d1, d2, .. } = q.params;
    let s = 2.0 * q.r * (1.0 - q.phi.cos());
    let re = q.r_eps;
    match q.state {
        LimitState::S1 { v_star } => [
            1.0 / (1.0 + re * (v_star + lambda) + d1 * s),
            1.0 / (1.0 + d2 * s),
            1.0 / (1.0 + re * v_star),
        ],
        LimitState::S2 { u_star } => [
            1.0 / (1.0 + d1 * s),
            1.0 / (1.0 + d2 * s + re * (u_star + lambda)),
            1.0 / (1.0 + re * u_star),
        ],
        LimitState::S3 { p1 } => [
            1.0 / (1.0 + re * lambda * (1.0 - p1) + d1 * s),
            1.0 / (1.0 + d2 * s + re * lambda * p1),
            1.0,
        ],
    }
}

/// Abscissae where `w` crosses `λ/2`, by linear interpolation between the
/// bracketing nodes. Works on one grid line of `w` sampled at `xs`.
pub fn crossings(xs: &[f64], w: &[f64], level: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..w.len().saturating_sub(1) {
        let (a, b) = (w[k] - level, w[k + 1] - level);
        if a == 0.0 {
            out.push(xs[k]);
        } else if a * b < 0.0 {
            out.push(xs[k] + (xs[k + 1] - xs[k]) * a / (a - b));
        }
    }
    if let (Some(&x), Some(&last)) = (xs.last(), w.last()) {
        if last == level {
            out.push(x);
        }
    }
    out
}

/// Interface positions. In 1D the crossings along the line; in 2D the
/// crossings along `x₁` for each row, concatenated row by row.
pub fn interface_position(w: &[f64], grid: &Grid, params: &ModelParams) -> Vec<Vec<f64>> {
    let side = grid.side();
    let xs: Vec<f64> = (0..side).map(|i| grid.x(i)).collect();
    let level = 0.5 * params.lambda;
    let rows = if grid.dim == 1 { 1 } else { side };
    (0..rows)
        .map(|j| crossings(&xs, &w[j * side..(j + 1) * side], level))
        .collect()
}

/// Length of the smallest interval holding every node with
/// `0.1λ ≤ w ≤ 0.9λ`; zero when there is none. 1D only.
pub fn interface_width(w: &[f64], grid: &Grid, params: &ModelParams) -> f64 {
    let (lo, hi) = (0.1 * params.lambda, 0.9 * params.lambda);
    let mut inside = (0..w.len().min(grid.side())).filter(|&k| w[k] >= lo && w[k] <= hi);
    match inside.next() {
        None => 0.0,
        Some(first) => {
            let last = inside.next_back().unwrap_or(first);
            grid.x(last) - grid.x(first)
        }
    }
}
