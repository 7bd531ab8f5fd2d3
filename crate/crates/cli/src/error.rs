use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_TRUE: u8 = 0;
pub const EXIT_FALSE: u8 = 1;
pub const EXIT_PROMISE: u8 = 2;
pub const EXIT_FAILURE: u8 = 3;
pub const EXIT_USAGE: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] phieq::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_promise_violation() => EXIT_PROMISE,
            CliError::Core(
                phieq::Error::NonConvergence { .. } | phieq::Error::Numerical(_) | phieq::Error::NormOutOfBand(_),
            ) => EXIT_FAILURE,
            _ => EXIT_USAGE,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_stable_codes() {
        let promise = CliError::Core(phieq::Error::NoSafeDeviation { player: 0 });
        assert_eq!(promise.exit_code(), EXIT_PROMISE);
        let stuck = CliError::Core(phieq::Error::NonConvergence { best_gap: -1.0, detail: String::new() });
        assert_eq!(stuck.exit_code(), EXIT_FAILURE);
        assert_eq!(CliError::Core(phieq::Error::InvalidGame("x".into())).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
    }
}
