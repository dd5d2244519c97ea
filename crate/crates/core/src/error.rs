use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlError {
    #[error("coupling measure violates the growth condition: {0}")]
    DivergentM2(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("dispersion derivative changes sign inside piece {piece}")]
    NonMonotonePiece { piece: usize },
    #[error("inverse dispersion left piece {piece} at energy {lambda}")]
    EvaluationDomain { piece: usize, lambda: f64 },
    #[error("quadrature failed: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    QuadratureFailure { estimate: f64, tolerance: f64 },
    #[error("boundary value requested at atom location {0}")]
    AtomCollision(f64),
    #[error("extrapolation did not stabilise: spread {spread:e} above {tolerance:e}")]
    NonConvergent { spread: f64, tolerance: f64 },
    #[error("argument outside the domain of the closed form: {0}")]
    DomainViolation(String),
    #[error("window [{lo}, {hi}] has no region where the coupling density vanishes")]
    WindowInsideAcSupport { lo: f64, hi: f64 },
    #[error("lambda = {lambda} is not an eigenvalue (residual {residual:e})")]
    NotAnEigenvalue { lambda: f64, residual: f64 },
    #[error("no analytic continuation available: {0}")]
    NoContinuation(String),
    #[error("dispersion derivative vanishes on an interval inside piece {piece}")]
    ZeroDerivative { piece: usize },
    #[error("invalid document: {0}")]
    Schema(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type FlResult<T> = Result<T, FlError>;
