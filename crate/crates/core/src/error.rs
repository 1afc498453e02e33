use thiserror::Error;

/// Errors raised by the q-calculus layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QbmError {
    #[error("q must satisfy 0 < q < 1, got {0}")]
    InvalidQ(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("x = {x} lies outside the support |x| <= {half_width} of the marginal at time {time}")]
    OutsideSupport { x: f64, time: f64, half_width: f64 },

    #[error("quadrature did not converge at order {order}: last change {change:e}")]
    QuadratureNonConvergence { order: usize, change: f64 },

    #[error("tabulated CDF total mass off by {0:e}")]
    CdfNormalization(f64),

    #[error("integrand horizon {integrand} does not match path horizon {path}")]
    HorizonMismatch { integrand: f64, path: f64 },

    #[error("integrand is not declared bounded near 0")]
    UnboundedIntegrand,

    #[error("integrator has no Hölder declaration near 0")]
    MissingHolder,

    #[error("grid depth {depth} too shallow: tail bound {bound:e} exceeds tolerance {tolerance:e}")]
    GridTooShallow { depth: usize, bound: f64, tolerance: f64 },

    #[error("horizon {t} is outside the convergence radius {radius}")]
    OutsideRadius { t: f64, radius: f64 },

    #[error("unknown check `{0}`")]
    UnknownCheck(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QbmError {
    fn from(e: std::io::Error) -> Self {
        QbmError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QbmError>;
