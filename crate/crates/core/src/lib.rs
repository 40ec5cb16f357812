//! Finite-difference solvers for the fast reaction–diffusion system
//! `u_t - d1Δu = -(1/ε)u[v + λ(1-p)]`, `v_t - d2Δv = -(1/ε)v(u + λp)`,
//! `p_t = (1/ε)[(1-p)u - vp]`, whose ε → 0 limit is the Stefan problem with
//! latent heat λ.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod reference;
pub mod semi_implicit;
pub mod simulate;
pub mod sirk2;
pub mod spatial;

pub use error::{Error, ModelError, Result, SolverError};
pub use model::{
    enthalpy, make_initial_state, temperature, BoundarySpec, FaceCondition, FieldBoundary, Grid,
    InitialPreset, ModelParams, RunConfig, Scheme, StateField,
};
pub use simulate::{advance, integrate, make_reference, Refinement};
pub use spatial::{Problem, SolverOptions};
