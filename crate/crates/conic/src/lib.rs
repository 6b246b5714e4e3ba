//! Dense conic optimization for small problems mixing linear, second-order
//! and semidefinite constraints.
//!
//! Programs are described with [`ConeProgram`] and solved by a homogeneous
//! self-dual primal-dual interior-point method. [`validate_solution`] checks
//! a candidate point against the program without touching solver internals.

mod compile;
mod cones;
mod kkt;
mod program;
mod solver;
mod validate;
mod vecs;

pub use program::{Bounds, ConeProgram, LinExpr, RsocConstraint, SocConstraint};
pub use solver::{solve, solve_with, SolverOptions, SolverSolution, Status};
pub use validate::{validate_solution, ResidualReport};

#[derive(Debug, thiserror::Error)]
pub enum ProgramError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("tolerance {0} outside [1e-10, 1e-4]")]
    BadTolerance(f64),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
