use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix must be square, got {rows} rows with a row of length {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("entry ({row}, {col}) = {value} is not 0 or 1")]
    NotBinary { row: usize, col: usize, value: f64 },
    #[error("alphabet size {0} is outside 1..=256")]
    AlphabetSize(usize),
    #[error("symbol {0} has no admissible successor or predecessor")]
    DeadSymbol(usize),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("measure is not compatible with the transition system: {0}")]
    Incompatible(String),
    #[error("word must be non-empty")]
    EmptyWord,
    #[error("transition matrix is reducible")]
    Reducible,
    #[error("power iteration did not converge after {0} iterations (reducible matrix?)")]
    NoConvergence(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("horizon n = {n} exceeds generated length {len}")]
    HorizonTooLong { n: usize, len: usize },
    #[error("exact computation exceeds its cap: {0}")]
    CapExceeded(String),
    #[error("operation requires a Markov or Bernoulli measure")]
    NotMarkov,
    #[error("window of {window} digits is below the floor of {floor} for n = {n}")]
    WindowTooSmall { window: u32, floor: u32, n: usize },
    #[error("point {x} hit a branch endpoint at step {step}; resample")]
    Endpoint { step: usize, x: f64 },
    #[error("point {x} fell into the truncated tail at step {step}; resample")]
    Tail { step: usize, x: f64 },
    #[error("orbit terminated at the fixed point 0 at step {0}")]
    Terminated(usize),
    #[error("first return unresolved after {0} steps")]
    UnresolvedReturn(usize),
    #[error("no collisions observed; use a shorter block length")]
    NoCollisions,
    #[error("only {usable} usable points, need at least {needed}")]
    InsufficientPoints { usable: usize, needed: usize },
    #[error("{excluded} of {total} cells excluded; fit refused")]
    TooManyExcluded { excluded: usize, total: usize },
}

impl Error {
    /// Whether a replicate that failed with this error should be redrawn
    /// from a fresh initial point.
    pub fn is_resample(&self) -> bool {
        matches!(self, Error::Endpoint { .. } | Error::Tail { .. } | Error::Terminated(_) | Error::UnresolvedReturn(_))
    }
}
