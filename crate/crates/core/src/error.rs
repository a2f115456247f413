use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-positive length: {what} = {value}")]
    NonPositiveLength { what: &'static str, value: f64 },

    #[error("geometric constraint violated: |kappa| * l = {product} must be < 2*pi")]
    GeometricConstraintViolated { product: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field is not mean-free: |mean| = {mean:e}, tolerance {tol:e}")]
    NotMeanFree { mean: f64, tol: f64 },

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),

    #[error("eps = {eps} must lie in (0, l/4) = (0, {limit})")]
    EpsTooLarge { eps: f64, limit: f64 },

    #[error("degenerate denominator omega1 + omega2 - omega1*omega2*l = {value:e}")]
    DegenerateDenominator { value: f64 },

    #[error("zero eigenvalue is not semisimple; modal propagation is undefined")]
    NotSemisimple,

    #[error("no sign change of the leading eigenvalue on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),

    #[error("no admissible arc for m = {m}: {reason}")]
    NoAdmissibleArc { m: f64, reason: String },

    #[error("curve is not a graph over the reference chart: {0}")]
    NotAGraph(String),

    #[error("I* is not positive on mean-free fields (mu_min = {mu_min:e})")]
    IStarNotPositive { mu_min: f64 },

    #[error("Newton iteration diverged at m = {m} after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { m: f64, iterations: usize, residual: f64 },

    #[error("unsupported wall geometry: {0}")]
    UnsupportedWalls(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
