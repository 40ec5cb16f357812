use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model input: {0}")]
    Invalid(String),
    #[error("preset {preset} needs a {expected}D grid, got {found}D")]
    DimensionMismatch {
        preset: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("field length {found} does not match grid size {expected}")]
    ShapeMismatch { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("zero pivot at row {row} (system is not diagonally dominant)")]
    ZeroPivot { row: usize },
    #[error("conjugate gradient stalled after {iterations} iterations, relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("fixed-point sweeps did not converge after {sweeps} sweeps, last update {update:e}, residual {residual:e}")]
    FixedPoint {
        sweeps: usize,
        update: f64,
        residual: f64,
    },
    #[error("non-finite value produced at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid configuration:\n{}", list_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn list_violations(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}
