use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension of degree-{k} polynomials in {n} variables overflows usize")]
    Size { n: usize, k: usize },

    #[error("mesh is flat along coordinate {axis}: min = max = {value}")]
    FlatMesh { axis: usize, value: f64 },

    #[error("point {index} maps to {value} outside [-1, 1] (closed-form Chebyshev evaluation)")]
    Domain { index: usize, value: String },

    #[error("disk mesh undersampled: s = {s} must exceed degree {k}")]
    Undersampled { s: usize, k: usize },

    #[error("mesh is not unisolvent for degree {k}: numerical rank {rank} < {dim}")]
    NotUnisolvent { k: usize, rank: usize, dim: usize },

    #[error("degenerate Bergman weight {value:e} at mesh point {index}")]
    DegenerateWeight { index: usize, value: f64 },

    #[error("Gram matrix catastrophically ill-conditioned: smallest singular value {sigma_min:e}")]
    IllConditioned { sigma_min: f64 },

    #[error("brute-force enumeration infeasible: {points}^{dim} tuples exceeds 1e7")]
    Infeasible { points: usize, dim: usize },

    #[error("no closed-form extremal function available for {0}")]
    NoReference(String),

    #[error("grid configuration: {0}")]
    Grid(String),

    #[error("no valid accelerated entries for the requested selection")]
    NoAccelerant,

    #[error("invariant suite failed {failed} of {total} checks")]
    ProbeFailed { failed: usize, total: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Numerical failures (rank or conditioning) as opposed to configuration errors.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotUnisolvent { .. }
                | Error::DegenerateWeight { .. }
                | Error::IllConditioned { .. }
                | Error::NoAccelerant
                | Error::ProbeFailed { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
