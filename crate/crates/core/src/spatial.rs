//! Spatial discretisation: the centred three/five-point Laplacian with
//! Dirichlet elimination and mirrored ghost nodes for homogeneous Neumann
//! faces, and the implicit operator `(1 + r_j) - D Δ_h` every stepper solves.

use crate::error::SolverError;
use crate::linalg::{self, FivePointSystem, TridiagonalSystem, DEFAULT_CG_TOL};
use crate::model::{BoundarySpec, FieldBoundary, Grid, ModelParams};

/// Tolerances for the 2D conjugate-gradient solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub cg_tol: f64,
    /// Defaults to ten times the number of unknowns.
    pub cg_max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            cg_tol: DEFAULT_CG_TOL,
            cg_max_iter: None,
        }
    }
}

/// Parameters, mesh and boundary conditions of one discrete problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Problem {
    pub params: ModelParams,
    pub grid: Grid,
    pub boundary: BoundarySpec,
    pub solver: SolverOptions,
}

impl Problem {
    pub fn new(params: ModelParams, grid: Grid, boundary: BoundarySpec) -> Self {
        Self {
            params,
            grid,
            boundary,
            solver: SolverOptions::default(),
        }
    }
}

/// Range of non-Dirichlet node indices along one axis.
fn free_range(n: usize, lo_dirichlet: bool, hi_dirichlet: bool) -> (usize, usize) {
    (
        usize::from(lo_dirichlet),
        if hi_dirichlet { n - 1 } else { n },
    )
}

/// Centred second difference of `x`; zero on Dirichlet nodes.
pub fn laplacian(grid: &Grid, bc: &FieldBoundary, x: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let side = grid.side();
    let mut out = vec![0.0; grid.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        if bc.dirichlet_face(grid, idx).is_some() {
            continue;
        }
        let (i, j) = grid.split(idx);
        let along = |k: usize, stride: usize| -> f64 {
            // second difference along one axis, reflecting at free faces
            let left = if k == 0 { x[idx + stride] } else { x[idx - stride] };
            let right = if k == n { x[idx - stride] } else { x[idx + stride] };
            left - 2.0 * x[idx] + right
        };
        let mut acc = along(i, 1);
        if grid.dim == 2 {
            acc += along(j, side);
        }
        *o = acc * inv_h2;
    }
    out
}

/// `(1 + reaction_j) x_j - diffusion * Δ_h x_j` on free nodes, with
/// Dirichlet nodes pinned.
///
/// For the semi-implicit `u` update `reaction = (τ/ε)(vⁿ + λ(1 - pⁿ⁺¹))` and
/// `diffusion = d1 τ`.
pub struct ImplicitOperator<'a> {
    pub grid: &'a Grid,
    pub bc: &'a FieldBoundary,
    pub reaction: &'a [f64],
    pub diffusion: f64,
}

impl ImplicitOperator<'_> {
    /// Operator applied at free nodes; Dirichlet nodes map to themselves.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let lap = laplacian(self.grid, self.bc, x);
        (0..self.grid.len())
            .map(|k| {
                if self.bc.dirichlet_face(self.grid, k).is_some() {
                    x[k]
                } else {
                    (1.0 + self.reaction[k]) * x[k] - self.diffusion * lap[k]
                }
            })
            .collect()
    }

    /// Solves the operator equation with `rhs` on free nodes and `pinned(k)`
    /// on Dirichlet nodes. `guess` seeds CG in 2D.
    pub fn solve(
        &self,
        rhs: &[f64],
        pinned: impl Fn(usize) -> f64,
        guess: &[f64],
        opts: &SolverOptions,
    ) -> Result<Vec<f64>, SolverError> {
        let mut out = vec![0.0; self.grid.len()];
        for (k, o) in out.iter_mut().enumerate() {
            if self.bc.dirichlet_face(self.grid, k).is_some() {
                *o = pinned(k);
            }
        }
        match self.grid.dim {
            1 => self.solve_line(rhs, &mut out)?,
            _ => self.solve_plane(rhs, guess, opts, &mut out)?,
        }
        Ok(out)
    }

    fn solve_line(&self, rhs: &[f64], out: &mut [f64]) -> Result<(), SolverError> {
        let n = self.grid.n;
        let c = self.diffusion / (self.grid.h() * self.grid.h());
        let (lo, hi) = free_range(n, self.bc.x_lo.is_dirichlet(), self.bc.x_hi.is_dirichlet());
        let m = hi - lo + 1;
        let mut sys = TridiagonalSystem {
            sub: vec![0.0; m],
            diag: vec![0.0; m],
            sup: vec![0.0; m],
            rhs: vec![0.0; m],
        };
        for (row, i) in (lo..=hi).enumerate() {
            sys.diag[row] = 1.0 + self.reaction[i] + 2.0 * c;
            sys.rhs[row] = rhs[i];
            if i == 0 {
                sys.sup[row] = -2.0 * c;
            } else if i == n {
                sys.sub[row] = -2.0 * c;
            } else {
                if i - 1 < lo {
                    sys.rhs[row] += c * out[i - 1];
                } else {
                    sys.sub[row] = -c;
                }
                if i + 1 > hi {
                    sys.rhs[row] += c * out[i + 1];
                } else {
                    sys.sup[row] = -c;
                }
            }
        }
        let x = linalg::solve_tridiagonal(&sys)?;
        out[lo..=hi].copy_from_slice(&x);
        Ok(())
    }

    fn solve_plane(
        &self,
        rhs: &[f64],
        guess: &[f64],
        opts: &SolverOptions,
        out: &mut [f64],
    ) -> Result<(), SolverError> {
        let grid = self.grid;
        let n = grid.n;
        let c = self.diffusion / (grid.h() * grid.h());
        let (i_lo, i_hi) = free_range(n, self.bc.x_lo.is_dirichlet(), self.bc.x_hi.is_dirichlet());
        let (j_lo, j_hi) = free_range(n, self.bc.y_lo.is_dirichlet(), self.bc.y_hi.is_dirichlet());
        let nx = i_hi - i_lo + 1;
        let ny = j_hi - j_lo + 1;
        // Rows on a free face are halved once per such axis; this makes the
        // ghost-reflected system symmetric.
        let face_weight = |k: usize| if k == 0 || k == n { 0.5 } else { 1.0 };
        let weight = |i: usize, j: usize| face_weight(i) * face_weight(j);
        let mut sys = FivePointSystem {
            nx,
            ny,
            diag: vec![0.0; nx * ny],
            cx: vec![0.0; nx.saturating_sub(1) * ny],
            cy: vec![0.0; nx * ny.saturating_sub(1)],
            rhs: vec![0.0; nx * ny],
        };
        let mut x0 = vec![0.0; nx * ny];
        for j in j_lo..=j_hi {
            for i in i_lo..=i_hi {
                let k = (j - j_lo) * nx + (i - i_lo);
                let idx = grid.index(i, j);
                let w = weight(i, j);
                sys.diag[k] = w * (1.0 + self.reaction[idx] + 4.0 * c);
                let mut b = rhs[idx];
                if i > 0 && i - 1 < i_lo {
                    b += c * out[grid.index(i - 1, j)];
                }
                if i < n && i + 1 > i_hi {
                    b += c * out[grid.index(i + 1, j)];
                }
                if j > 0 && j - 1 < j_lo {
                    b += c * out[grid.index(i, j - 1)];
                }
                if j < n && j + 1 > j_hi {
                    b += c * out[grid.index(i, j + 1)];
                }
                sys.rhs[k] = w * b;
                x0[k] = guess[idx];
                if i < i_hi {
                    let mirror = if i == 0 { 2.0 } else { 1.0 };
                    sys.cx[(j - j_lo) * (nx - 1) + (i - i_lo)] = w * c * mirror;
                }
                if j < j_hi {
                    let mirror = if j == 0 { 2.0 } else { 1.0 };
                    sys.cy[(j - j_lo) * nx + (i - i_lo)] = w * c * mirror;
                }
            }
        }
        let x = linalg::solve_fivepoint(&sys, Some(&x0), opts.cg_tol, opts.cg_max_iter)?;
        for j in j_lo..=j_hi {
            for i in i_lo..=i_hi {
                out[grid.index(i, j)] = x[(j - j_lo) * nx + (i - i_lo)];
            }
        }
        Ok(())
    }
}

/// Discrete L² norm over the nodes with `j_k ∉ {0, N}`, weight `h^d`.
pub fn interior_l2(grid: &Grid, x: &[f64]) -> f64 {
    let w = grid.h().powi(grid.dim as i32);
    (0..grid.len())
        .filter(|&k| grid.is_interior(k))
        .map(|k| w * x[k] * x[k])
        .sum::<f64>()
        .sqrt()
}
