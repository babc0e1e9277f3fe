use thiserror::Error;

/// Errors produced by the metric solvers and their input validation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("edge weights are not symmetric at ({i}, {j}): {qij} vs {qji}")]
    Asymmetric { i: usize, j: usize, qij: f64, qji: f64 },

    #[error("negative edge weight at ({i}, {j}): {q}")]
    NegativeWeight { i: usize, j: usize, q: f64 },

    #[error("graph is disconnected: node {0} unreachable from node 0")]
    Disconnected(usize),

    #[error("graph must have at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },

    #[error("not a probability vector: sum = {sum}")]
    NotNormalized { sum: f64 },

    #[error("right-hand side is not orthogonal to constants: sum = {sum}")]
    NotInRange { sum: f64 },

    #[error("Laplacian is rank deficient (second eigenvalue {0:e})")]
    RankDeficient(f64),

    #[error("improper integral diverges near a = {endpoint}")]
    DivergentIntegral { endpoint: f64 },

    #[error("ODE integration stalled near the simplex boundary at t = {t}")]
    StiffAtBoundary { t: f64 },

    #[error("anchor point is not strictly interior to the simplex")]
    BoundaryAnchors,

    #[error("lifted atom {0} is not strictly interior to the simplex")]
    BoundaryAtom(usize),

    #[error("total masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error("interpolation does not vanish at the boundary: theta(1, 0) = {0}")]
    ThetaNotVanishing(f64),

    #[error("no witness found in the search box")]
    NotFound,

    #[error("embeddings use different reference measures")]
    ReferenceMismatch,

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error("time step rejected {0} times; integration diverged")]
    Diverged(usize),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}
