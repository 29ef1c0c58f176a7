use thiserror::Error;

/// Errors produced by the approximation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain [{a}, {b}]: need a < b")]
    InvalidDomain { a: f64, b: f64 },

    #[error("jump location {delta} is not strictly inside ({a}, {b})")]
    JumpOutsideDomain { delta: f64, a: f64, b: f64 },

    #[error("point {x} lies outside the domain [{a}, {b}]")]
    OutsideDomain { x: f64, a: f64, b: f64 },

    #[error("invalid interval: lower bound {lo} exceeds upper bound {hi}")]
    ReversedBounds { lo: f64, hi: f64 },

    #[error("interval [{lo}, {hi}] is not contained in [-1, 1]")]
    IntervalOutOfRange { lo: f64, hi: f64 },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("invalid point set: {0}")]
    InvalidPoints(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("non-square canonical system: {0}")]
    NonSquareSystem(String),

    #[error("canonical point solver did not converge after {attempts} attempt(s); best residual {residual:e}")]
    NoConvergence { attempts: usize, residual: f64 },

    #[error("canonical point iterate left the ordered simplex: {0}")]
    OrderingViolation(String),

    #[error("uniqueness check unavailable: {0}")]
    UniquenessUnavailable(String),

    #[error("collocation matrix is singular (reciprocal condition {rcond:e})")]
    SingularCollocation { rcond: f64 },

    #[error("space dimension {n} is odd; interpolation at canonical points does not determine the approximant")]
    OddDimension { n: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear program failed: {0}")]
    LpFailure(String),

    #[error("quadrature did not reach tolerance: estimated error {estimate:e}")]
    Quadrature { estimate: f64 },
}

impl Error {
    /// True for failures raised by the canonical-point solver.
    pub fn is_solver_error(&self) -> bool {
        matches!(
            self,
            Error::NonSquareSystem(_)
                | Error::NoConvergence { .. }
                | Error::OrderingViolation(_)
                | Error::UniquenessUnavailable(_)
        )
    }

    /// Short machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDomain { .. } => "invalid_domain",
            Error::JumpOutsideDomain { .. } => "jump_outside_domain",
            Error::OutsideDomain { .. } => "outside_domain",
            Error::ReversedBounds { .. } => "reversed_bounds",
            Error::IntervalOutOfRange { .. } => "interval_out_of_range",
            Error::InvalidMeasure(_) => "invalid_measure",
            Error::InvalidKnots(_) => "invalid_knots",
            Error::InvalidSpace(_) => "invalid_space",
            Error::InvalidPoints(_) => "invalid_points",
            Error::Expression(_) => "expression",
            Error::NonSquareSystem(_) => "non_square_system",
            Error::NoConvergence { .. } => "no_convergence",
            Error::OrderingViolation(_) => "ordering_violation",
            Error::UniquenessUnavailable(_) => "uniqueness_unavailable",
            Error::SingularCollocation { .. } => "singular_collocation",
            Error::OddDimension { .. } => "odd_dimension",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::LpFailure(_) => "lp_failure",
            Error::Quadrature { .. } => "quadrature",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
