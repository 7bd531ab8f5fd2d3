use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("matrix is not row-stochastic: {0}")]
    NonStochastic(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("player {player} has no safe deviation")]
    NoSafeDeviation { player: usize },
    #[error("promise violated: {0}")]
    PromiseViolation(String),
    #[error("solver did not converge (best gap {best_gap:.3e}): {detail}")]
    NonConvergence { best_gap: f64, detail: String },
    #[error("block norm outside admissible band: {0}")]
    NormOutOfBand(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures caused by an input that breaks a promise of the
    /// problem (empty safe set, empty correspondence) rather than by numerics.
    pub fn is_promise_violation(&self) -> bool {
        matches!(self, Error::NoSafeDeviation { .. } | Error::PromiseViolation(_))
    }
}
