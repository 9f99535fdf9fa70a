//! Error taxonomy and the process exit-code mapping used by the CLI.

use thiserror::Error;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum RabiError {
    /// Invalid configuration value or combination.
    #[error("configuration error: {0}")]
    Config(String),
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Operand dimensions do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The Fock cutoff cannot faithfully hold the requested displaced state.
    #[error(
        "cutoff too small for displacement alpha = {alpha}: need n >= {required_n}, got n = {got_n}"
    )]
    CutoffTooSmall {
        alpha: f64,
        required_n: usize,
        got_n: usize,
    },
    /// The filter threshold excludes every matrix entry.
    #[error(
        "empty filter support: threshold {threshold} is at or above the largest entry magnitude {max_entry}"
    )]
    EmptyFilterSupport { threshold: f64, max_entry: f64 },
    /// Rank correlation is undefined (zero rank variance).
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    /// An iterative solver failed to reach its tolerance.
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    /// Some sweep cells failed while others completed; partial data was produced.
    #[error("partial sweep failure: {failed} of {total} cells failed; first error: {first}")]
    PartialFailure {
        failed: usize,
        total: usize,
        first: String,
    },
    /// File input/output failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RabiError {
    /// Process exit code for the CLI:
    /// `0` success, `2` configuration/validation error, `3` numerical
    /// non-convergence, `4` partial sweep failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RabiError::NonConvergence(_) => 3,
            RabiError::PartialFailure { .. } => 4,
            _ => 2,
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, RabiError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_documented_mapping() {
        assert_eq!(RabiError::Config("x".into()).exit_code(), 2);
        assert_eq!(RabiError::Domain("x".into()).exit_code(), 2);
        assert_eq!(RabiError::NonConvergence("x".into()).exit_code(), 3);
        assert_eq!(
            RabiError::PartialFailure {
                failed: 1,
                total: 4,
                first: "x".into()
            }
            .exit_code(),
            4
        );
    }
}
