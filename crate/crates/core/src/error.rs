use radcom_conic::Status;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("matrix is not positive semidefinite (minimum eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("rank-one extraction failed: residual {residual:.3e} exceeds {threshold:.3e}")]
    RankOneExtractionFailed { residual: f64, threshold: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("penalty loop stopped after {outer} outer iterations with rank-one residual {residual:.3e}")]
    MaxIterations { outer: usize, inner: usize, residual: f64 },
    #[error("conic solver returned {status:?} in {context}")]
    Solver { status: Status, context: String },
    #[error(transparent)]
    Program(#[from] radcom_conic::ProgramError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
