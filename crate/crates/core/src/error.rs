use thiserror::Error;

/// Failure modes of the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point outside the domain: {0}")]
    Domain(String),
    #[error("grazing ray: |<theta, nu>| = {0:.3e} below tolerance")]
    GrazingRay(f64),
    #[error("geodesic did not exit within {0} steps")]
    NonExit(usize),
    #[error("Fermi chart width too large: {0}")]
    Width(String),
    #[error("integration accuracy not met: {0}")]
    Accuracy(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("collar error: {0}")]
    Collar(String),
    #[error("order error: {0}")]
    Order(String),
    #[error("gluing error: {0}")]
    Gluing(String),
    #[error("quadrature under-resolved: {0}")]
    Quadrature(String),
    #[error("no ray coverage at ({0:.4}, {1:.4})")]
    Coverage(f64, f64),
    #[error("system too large: {0}")]
    Size(String),
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
