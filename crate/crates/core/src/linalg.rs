//! Linear solvers for the implicit diffusion systems: Thomas elimination in
//! one dimension, Jacobi-preconditioned conjugate gradients on the
//! five-point stencil in two.

use crate::error::SolverError;

pub const DEFAULT_CG_TOL: f64 = 1e-11;

/// `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[n-1]` are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.sup[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}

/// Thomas elimination without pivoting.
pub fn solve_tridiagonal(sys: &TridiagonalSystem) -> Result<Vec<f64>, SolverError> {
    let n = sys.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let (lower, c_prev, d_prev) = if i == 0 {
            (0.0, 0.0, 0.0)
        } else {
            (sys.sub[i], c[i - 1], d[i - 1])
        };
        let pivot = sys.diag[i] - lower * c_prev;
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(SolverError::ZeroPivot { row: i });
        }
        c[i] = if i + 1 < n { sys.sup[i] / pivot } else { 0.0 };
        d[i] = (sys.rhs[i] - lower * d_prev) / pivot;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Symmetric five-point system on an `nx × ny` block of unknowns.
///
/// Row `k = j * nx + i` reads
/// `diag[k] x[k] - cx(i-1,j) x[k-1] - cx(i,j) x[k+1] - cy(i,j-1) x[k-nx] - cy(i,j) x[k+nx]`,
/// where `cx(i, j)` couples `(i, j)` with `(i+1, j)` and `cy(i, j)` couples
/// `(i, j)` with `(i, j+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FivePointSystem {
    pub nx: usize,
    pub ny: usize,
    pub diag: Vec<f64>,
    /// `(nx - 1) * ny` entries, index `j * (nx - 1) + i`.
    pub cx: Vec<f64>,
    /// `nx * (ny - 1)` entries, index `j * nx + i`.
    pub cy: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl FivePointSystem {
    /// Constant coupling `c` on every link.
    pub fn uniform(nx: usize, ny: usize, diag: Vec<f64>, c: f64, rhs: Vec<f64>) -> Self {
        Self {
            nx,
            ny,
            diag,
            cx: vec![c; nx.saturating_sub(1) * ny],
            cy: vec![c; nx * ny.saturating_sub(1)],
            rhs,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let mut acc = self.diag[k] * x[k];
                if i > 0 {
                    acc -= self.cx[j * (nx - 1) + i - 1] * x[k - 1];
                }
                if i + 1 < nx {
                    acc -= self.cx[j * (nx - 1) + i] * x[k + 1];
                }
                if j > 0 {
                    acc -= self.cy[(j - 1) * nx + i] * x[k - nx];
                }
                if j + 1 < ny {
                    acc -= self.cy[j * nx + i] * x[k + nx];
                }
                y[k] = acc;
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.len()];
        self.apply_into(x, &mut y);
        y
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG; `observe` sees every iterate, starting with the guess.
pub fn conjugate_gradient(
    sys: &FivePointSystem,
    guess: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&[f64]),
) -> Result<CgOutcome, SolverError> {
    let n = sys.len();
    // iterate on x / scale so tiny right-hand sides cannot underflow p·Ap
    let scale = sys.rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if scale == 0.0 {
        let x = vec![0.0; n];
        observe(&x);
        return Ok(CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
        });
    }
    let rhs: Vec<f64> = sys.rhs.iter().map(|b| b / scale).collect();
    let mut x: Vec<f64> = match guess {
        Some(g) => g.iter().map(|v| v / scale).collect(),
        None => vec![0.0; n],
    };
    let b_norm = dot(&rhs, &rhs).sqrt();
    let mut shown = vec![0.0; n];
    let mut emit = |x: &[f64]| {
        for k in 0..n {
            shown[k] = x[k] * scale;
        }
        observe(&shown);
    };
    let inv_diag: Vec<f64> = sys.diag.iter().map(|d| 1.0 / d).collect();
    let mut ap = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];

    let restart = |x: &[f64], r: &mut Vec<f64>, ap: &mut Vec<f64>| {
        sys.apply_into(x, ap);
        for k in 0..n {
            r[k] = rhs[k] - ap[k];
        }
    };

    restart(&x, &mut r, &mut ap);
    emit(&x);
    let mut iterations = 0;
    let mut residual = dot(&r, &r).sqrt() / b_norm;
    'outer: while iterations < max_iter {
        for k in 0..n {
            z[k] = inv_diag[k] * r[k];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < max_iter {
            if residual <= tol {
                // confirm against the true residual before returning
                restart(&x, &mut r, &mut ap);
                residual = dot(&r, &r).sqrt() / b_norm;
                if residual <= tol {
                    break 'outer;
                }
                continue 'outer;
            }
            sys.apply_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                break 'outer;
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            iterations += 1;
            emit(&x);
            residual = dot(&r, &r).sqrt() / b_norm;
            for k in 0..n {
                z[k] = inv_diag[k] * r[k];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
    }
    if residual <= tol {
        x.iter_mut().for_each(|v| *v *= scale);
        Ok(CgOutcome {
            x,
            iterations,
            residual,
        })
    } else {
        Err(SolverError::NotConverged {
            iterations,
            residual,
        })
    }
}

/// Solves `sys` to relative residual `tol`; `max_iter` defaults to
/// ten times the number of unknowns.
pub fn solve_fivepoint(
    sys: &FivePointSystem,
    guess: Option<&[f64]>,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<Vec<f64>, SolverError> {
    let max_iter = max_iter.unwrap_or(10 * sys.len().max(1));
    conjugate_gradient(sys, guess, tol, max_iter, |_| {}).map(|o| o.x)
}
