use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("symbol {0} has no successor or no predecessor")]
    ZeroRowOrColumn(usize),
    #[error("transition matrix entries must be 0 or 1 and the matrix square and nonempty")]
    BadMatrix,
    #[error("transition matrix is not irreducible and aperiodic")]
    NotMixing,
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("symbol {symbol} out of range for alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },
    #[error("invalid Markov measure: {0}")]
    InvalidMeasure(String),
    #[error("measures live on different spaces")]
    SpaceMismatch,
    #[error("orbit has {have} points, need {need}")]
    TooShort { have: usize, need: usize },
    #[error("matrix is not a hyperbolic unimodular automorphism")]
    NotHyperbolic,
    #[error("rectangles overlap at ({0}, {1})")]
    OverlapDetected(f64, f64),
    #[error("point ({0}, {1}) lies in no rectangle")]
    CoverageGap(f64, f64),
    #[error("Markov property fails at ({x}, {y}): {detail}")]
    MarkovViolation { x: f64, y: f64, detail: String },
    #[error("orbit within boundary margin of a rectangle at time {0}")]
    BoundaryAmbiguity(i64),
    #[error("nested intervals are empty at time {0}")]
    EmptyIntersection(i64),
    #[error("word is not admissible at position {0}")]
    Inadmissible(usize),
    #[error("Jacobian is singular at step {0}")]
    SingularJacobian(usize),
    #[error("no rational combination within 1/{0} of the target")]
    NoFeasibleCombination(u64),
    #[error("acceptance rate {rate:e} below floor {floor:e}")]
    AcceptanceTooLow { rate: f64, floor: f64 },
    #[error("schedule index overflows i64 at level {0}")]
    DepthOverflow(usize),
    #[error("no admissible bridge of length {len} from {from} to {to}")]
    BridgeInfeasible { from: usize, to: usize, len: usize },
    #[error("work {0} exceeds the configured budget")]
    BudgetExceeded(u64),
    #[error("invalid radii or exponent for the slowdown map")]
    BadRadii,
    #[error("integrator needs more than {0} substeps")]
    IntegratorUnderflow(usize),
    #[error("stable/unstable splitting not resolved (angle drift {0:e})")]
    SplittingNotResolved(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// Process exit code used by the command line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. }
            | Error::SingularJacobian(_)
            | Error::IntegratorUnderflow(_)
            | Error::SplittingNotResolved(_) => 3,
            Error::NoFeasibleCombination(_)
            | Error::AcceptanceTooLow { .. }
            | Error::DepthOverflow(_)
            | Error::BridgeInfeasible { .. }
            | Error::BudgetExceeded(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
