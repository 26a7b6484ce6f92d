use serde::Serialize;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum Error {
    #[error("point {z} outside the admissible domain: {reason}")]
    Domain { z: String, reason: String },
    #[error("non-integer exponent applied to non-real point {z}")]
    NonReal { z: String },
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error("degenerate chart: {0}")]
    DegenerateChart(String),
    #[error("invalid family: {0}")]
    InvalidSpec(String),
    #[error("operation not supported for this family: {0}")]
    Unsupported(String),
    #[error("orbit escaped at iterate {k} (|x| = {modulus})")]
    Escape { k: usize, modulus: f64 },
    #[error("kneading sequences are incomparable")]
    Incomparable,
    #[error("critical orbit {j} did not close within {max_iter} iterates")]
    NotFinite { j: usize, max_iter: usize },
    #[error("derivative {modulus} below floor at c_({i},{j})")]
    DegenerateDerivative { i: usize, j: usize, modulus: f64 },
    #[error("ambiguous closure of critical orbit {j} at iterate {i}")]
    AmbiguousRelation { i: usize, j: usize },
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("root {c} has minimal period {period} < {q}")]
    LowerPeriodCollision { c: f64, period: usize, q: usize },
    #[error("division by zero: {0}")]
    DivideByZero(String),
    #[error("coefficient magnitude {0} exceeds 1e100")]
    Overflow(f64),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("branch lost at iterate {k}: {reason}")]
    BranchLoss { k: usize, reason: String },
    #[error("motion not injective: points {x} and {y} collide at lambda = {lambda}")]
    InjectivityViolation { x: usize, y: usize, lambda: String },
    #[error("degenerate point {0}")]
    DegeneratePoint(String),
    #[error("vector has no unit eigenvalue")]
    NoUnitEigenvalue,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("seed ({a}, {b}) is not on the curve")]
    SeedNotOnCurve { a: f64, b: f64 },
    #[error("continuation step failed after ({a}, {b})")]
    StepFailure { a: f64, b: f64 },
    #[error("gradient of norm {0} below the rank tolerance")]
    RankDeficient(f64),
}

pub(crate) fn domain(z: crate::Scalar, reason: &str) -> Error {
    Error::Domain { z: format!("{z}"), reason: reason.to_string() }
}
