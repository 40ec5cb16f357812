#![allow(dead_code)]

use fastrd_core::{
    BoundarySpec, FaceCondition, FieldBoundary, Grid, ModelParams, Problem, StateField,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

pub fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// Dense discrete Laplacian with mirrored ghosts at free faces; Dirichlet
/// rows are zero.
pub fn dense_laplacian(grid: &Grid, bc: &FieldBoundary) -> Vec<Vec<f64>> {
    let len = grid.len();
    let n = grid.n;
    let side = grid.side();
    let c = 1.0 / (grid.h() * grid.h());
    let mut l = vec![vec![0.0; len]; len];
    for k in 0..len {
        if bc.dirichlet_face(grid, k).is_some() {
            continue;
        }
        let (i, j) = (k % side, k / side);
        let mut axes = vec![(i, 1usize)];
        if grid.dim == 2 {
            axes.push((j, side));
        }
        for (pos, stride) in axes {
            l[k][k] -= 2.0 * c;
            let lo = if pos == 0 { k + stride } else { k - stride };
            let hi = if pos == n { k - stride } else { k + stride };
            l[k][lo] += c;
            l[k][hi] += c;
        }
    }
    l
}

/// Dense `(1 + reaction) - diffusion Δ` with identity rows on Dirichlet nodes.
pub fn dense_operator(
    grid: &Grid,
    bc: &FieldBoundary,
    reaction: &[f64],
    diffusion: f64,
) -> Vec<Vec<f64>> {
    let mut a = dense_laplacian(grid, bc);
    for (k, row) in a.iter_mut().enumerate() {
        for x in row.iter_mut() {
            *x *= -diffusion;
        }
        if bc.dirichlet_face(grid, k).is_some() {
            row[k] = 1.0;
        } else {
            row[k] += 1.0 + reaction[k];
        }
    }
    a
}

fn pinned_rhs(grid: &Grid, bc: &FieldBoundary, rhs: &[f64], t: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|k| bc.dirichlet_value(grid, k, t).unwrap_or(rhs[k]))
        .collect()
}

/// The first-order step built from dense matrices.
pub fn oracle_semi_step(pr: &Problem, s: &StateField, tau: f64) -> StateField {
    let m = &pr.params;
    let r = tau / m.epsilon;
    let t1 = s.t + tau;
    let len = s.len();
    let p: Vec<f64> = (0..len)
        .map(|j| (s.p[j] + r * s.u[j]) / (1.0 + r * (s.u[j] + s.v[j])))
        .collect();
    let ru: Vec<f64> = (0..len).map(|j| r * (s.v[j] + m.lambda * (1.0 - p[j]))).collect();
    let au = dense_operator(&pr.grid, &pr.boundary.u, &ru, m.d1 * tau);
    let u = dense_solve(au, pinned_rhs(&pr.grid, &pr.boundary.u, &s.u, t1));
    let rv: Vec<f64> = (0..len).map(|j| r * (u[j] + m.lambda * p[j])).collect();
    let av = dense_operator(&pr.grid, &pr.boundary.v, &rv, m.d2 * tau);
    let v = dense_solve(av, pinned_rhs(&pr.grid, &pr.boundary.v, &s.v, t1));
    StateField { u, v, p, t: t1 }
}

/// Solves one stage system `k = H(Y, Z + τ a k)` as a single dense
/// `3N × 3N` system.
pub fn oracle_stage(
    pr: &Problem,
    y: &StateField,
    z: &StateField,
    a: f64,
    tau: f64,
    t_stage: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = &pr.params;
    let g = &pr.grid;
    let n = g.len();
    let ie = 1.0 / m.epsilon;
    let s = tau * a;
    let lu = dense_laplacian(g, &pr.boundary.u);
    let lv = dense_laplacian(g, &pr.boundary.v);
    let mut mat = vec![vec![0.0; 3 * n]; 3 * n];
    let mut rhs = vec![0.0; 3 * n];
    let lzu = matvec(&lu, &z.u);
    let lzv = matvec(&lv, &z.v);
    for j in 0..n {
        let cu = y.v[j] + m.lambda * (1.0 - y.p[j]);
        let cv = y.u[j] + m.lambda * y.p[j];
        let cp = y.u[j] + y.v[j];
        // u row: k_u = -(1/ε)(z_u + s k_u) cu + d1 L (z_u + s k_u)
        if let Some(gv) = pr.boundary.u.dirichlet_value(g, j, t_stage) {
            mat[j][j] = 1.0;
            rhs[j] = (gv - z.u[j]) / s;
        } else {
            mat[j][j] += 1.0 + ie * s * cu;
            for k in 0..n {
                mat[j][k] -= m.d1 * s * lu[j][k];
            }
            rhs[j] = -ie * z.u[j] * cu + m.d1 * lzu[j];
        }
        let jv = n + j;
        if let Some(gv) = pr.boundary.v.dirichlet_value(g, j, t_stage) {
            mat[jv][jv] = 1.0;
            rhs[jv] = (gv - z.v[j]) / s;
        } else {
            mat[jv][jv] += 1.0 + ie * s * cv;
            for k in 0..n {
                mat[jv][n + k] -= m.d2 * s * lv[j][k];
            }
            rhs[jv] = -ie * z.v[j] * cv + m.d2 * lzv[j];
        }
        // p row: k_p = (1/ε)(z_u + s k_u) - (1/ε) cp (z_p + s k_p)
        let jp = 2 * n + j;
        mat[jp][jp] = 1.0 + ie * s * cp;
        mat[jp][j] = -ie * s;
        rhs[jp] = ie * z.u[j] - ie * cp * z.p[j];
    }
    let k = dense_solve(mat, rhs);
    (k[..n].to_vec(), k[n..2 * n].to_vec(), k[2 * n..].to_vec())
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// A random admissible problem and state.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    dim: usize,
    kind: BoundaryKind,
    epsilon: f64,
    max_n: usize,
) -> (Problem, StateField, f64) {
    let n = rng.gen_range(3..=max_n);
    let grid = Grid::new(dim, -1.0, 1.0, n).unwrap();
    let params = ModelParams::new(
        epsilon,
        rng.gen_range(0.2..2.0),
        rng.gen_range(0.1..3.0),
        rng.gen_range(0.1..3.0),
    )
    .unwrap();
    let face = |rng: &mut ChaCha8Rng| match kind {
        BoundaryKind::Dirichlet => FaceCondition::dirichlet(rng.gen_range(0.0..1.0)),
        BoundaryKind::Neumann => FaceCondition::Neumann,
    };
    let fb = |rng: &mut ChaCha8Rng| FieldBoundary {
        x_lo: face(rng),
        x_hi: face(rng),
        y_lo: face(rng),
        y_hi: face(rng),
    };
    let boundary = BoundarySpec { u: fb(rng), v: fb(rng) };
    let len = grid.len();
    let mut state = StateField {
        u: (0..len).map(|_| rng.gen_range(0.0..1.0)).collect(),
        v: (0..len).map(|_| rng.gen_range(0.0..1.0)).collect(),
        p: (0..len).map(|_| rng.gen_range(0.0..=1.0)).collect(),
        t: 0.0,
    };
    for k in 0..len {
        if let Some(g) = boundary.u.dirichlet_value(&grid, k, 0.0) {
            state.u[k] = g;
        }
        if let Some(g) = boundary.v.dirichlet_value(&grid, k, 0.0) {
            state.v[k] = g;
        }
    }
    let tau = log_uniform(rng, 1e-4, 1e-1);
    (Problem::new(params, grid, boundary), state, tau)
}
