use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("grid function has {got} nodal values, mesh has {expected}")]
    MeshMismatch { expected: usize, got: usize },
    #[error("grid function violates the zero Dirichlet trace")]
    NonzeroTrace,
    #[error("invalid exponents p = {p}, q = {q}")]
    InvalidExponents { p: f64, q: f64 },
    #[error("weight is identically zero")]
    ZeroWeight,
    #[error("weight does not change sign")]
    WeightNotSignChanging,
    #[error("function is identically zero")]
    ZeroFunction,
    #[error("fiber undefined: E = {energy:e}, weight integral = {weight:e}")]
    FiberUndefined { energy: f64, weight: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("fibered functional unbounded below at lambda = {lambda} (reached {level:e})")]
    Diverged { lambda: f64, level: f64 },
    #[error("no admissible start with E < 0 and negative weight integral")]
    EmptyConstraintSet,
    #[error("continuation window exceeded: minimizer at distance {distance:e} from the minimizer set, radius {delta:e}")]
    ContinuationWindowExceeded { distance: f64, delta: f64 },
    #[error("saddle not found: {0}")]
    SaddleNotFound(String),
    #[error("weight has no positive region")]
    EmptyPlusSet,
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
