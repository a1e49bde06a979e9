use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants split into two families: input validation (bad measures,
/// domains, parameters) and numerical failures (factorizations, quadrature
/// or eigen-solver breakdown). [`Error::is_validation`] tells them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectral measure: {0}")]
    InvalidMeasure(String),
    #[error("spectral measure is not elliptic: mu1 = {mu1:e}")]
    NotElliptic { mu1: f64 },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("grid has no interior nodes (h = {h})")]
    EmptyGrid { h: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("eigen-solver failed to converge at index {index}: residual {residual:e}")]
    EigenConvergence { index: usize, residual: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("assembly defect: {0}")]
    Assembly(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidMeasure(_)
                | Error::NotElliptic { .. }
                | Error::InvalidDomain(_)
                | Error::EmptyGrid { .. }
                | Error::InvalidParameter(_)
                | Error::Unsupported(_)
                | Error::Json(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMeasure(_) => "invalid_measure",
            Error::NotElliptic { .. } => "not_elliptic",
            Error::InvalidDomain(_) => "invalid_domain",
            Error::EmptyGrid { .. } => "empty_grid",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Unsupported(_) => "unsupported",
            Error::Factorization(_) => "factorization",
            Error::EigenConvergence { .. } => "eigen_convergence",
            Error::Quadrature(_) => "quadrature",
            Error::Assembly(_) => "assembly",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
