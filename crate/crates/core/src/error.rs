use thiserror::Error;

/// Errors raised by the discretization, the solvers, and the time integrator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("singular geometry: non-positive weight {value:e} at quadrature entry {index}")]
    SingularGeometry { index: usize, value: f64 },

    #[error("invalid state: {0}")]
    StateInvalid(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("operator is not SPD: p^T A p = {curvature:e} at iteration {iteration}")]
    SpdViolation { iteration: usize, curvature: f64 },

    #[error("preconditioner build failed: diagonal entry {index} is {value:e}")]
    PreconditionerBuild { index: usize, value: f64 },

    #[error("time step rejected: minimum density {min_rho:e} at cell {cell}, node {node}")]
    TimeStepRejected {
        min_rho: f64,
        cell: usize,
        node: usize,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_stage(self, stage: usize) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
