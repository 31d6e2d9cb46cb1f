use thiserror::Error;

/// Errors raised by the constructions, return maps and certification pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate interval [{lo}, {hi}] (width below tolerance {tol})")]
    DegenerateInterval { lo: f64, hi: f64, tol: f64 },

    #[error("polynomial is identically zero")]
    ZeroPolynomial,

    #[error("tangency degeneracy on the {side} side at y = {y}: first and second Lie derivatives vanish")]
    TangencyDegenerate { side: &'static str, y: f64 },

    #[error("level {k} exceeds the supported depth {max}")]
    DegreeOverflow { k: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Newton iteration did not converge after {iterations} iterations (y = {y})")]
    NoConvergence { y: f64, iterations: usize },

    #[error("derivative underflow |dF/dy2| = {value:e} at y2 = {y2}")]
    DerivativeUnderflow { y2: f64, value: f64 },

    #[error("half-return from y = {y} converged to {found}, too far from seed {seed}")]
    BranchJump { y: f64, seed: f64, found: f64 },

    #[error("orbit from y = {y} did not return to the switching line within budget")]
    NoReturn { y: f64 },

    #[error("orbit from y = {y} met the switching line tangentially (|dx/dt| = {speed:e})")]
    TangentialReturn { y: f64, speed: f64 },

    #[error("orbit from y = {y} does not enter the {side} half-plane")]
    WrongSide { y: f64, side: &'static str },

    #[error("half-map {position} of the return chain failed: {source}")]
    Chain { position: usize, source: Box<Error> },

    #[error("zero multiplicity indeterminate: derivatives up to order {max_order} vanish")]
    Indeterminate { max_order: usize },

    #[error("pole: phi^{index}(y) vanishes at y = {y}")]
    Pole { index: usize, y: f64 },

    #[error("branch error: R + 2 = {value} < 0 (cycle leaves the strip)")]
    Branch { value: f64 },

    #[error("condition (B) violated: {0}")]
    ConditionB(String),

    #[error("condition (A) violated: {0}")]
    ConditionA(String),

    #[error("no monodromic point: stability sign is zero")]
    MonodromyMissing,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("seed {seed} diverged during refinement: {reason}")]
    SeedDivergence { seed: f64, reason: String },

    #[error("Richardson extrapolation unstable for record {index}")]
    ExtrapolationUnstable { index: usize },

    #[error("unresolved sign change near y = {y}")]
    UnresolvedSignChange { y: f64 },

    #[error("io: {0}")]
    Io(String),

    #[error("serialization: {0}")]
    Serde(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
