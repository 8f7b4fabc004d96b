//! Error type shared by every module of the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while assembling or solving a system.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operands have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A triangular factor has a diagonal entry too small to invert. `index`
    /// is the offending diagonal position.
    #[error("triangular factor is singular at diagonal index {index}")]
    SingularFactor { index: usize },

    /// A matrix or vector contains NaN or infinite entries.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// Every row of the matrix has zero norm, so no sampling distribution
    /// exists.
    #[error("degenerate sampling distribution: all rows have zero norm")]
    DegenerateDistribution,

    /// Requested sketch size is outside `1..=m`.
    #[error("invalid sketch size r={r} for a matrix with {m} rows")]
    InvalidSketchSize { r: usize, m: usize },

    /// The row selected for a Kaczmarz projection has zero norm.
    #[error("cannot project onto a zero row")]
    ZeroRow,

    /// The smallest singular value is too close to zero for conditioning
    /// diagnostics to be meaningful.
    #[error("conditioning overflow: smallest singular value {sigma_min:e} is below cutoff")]
    ConditioningOverflow { sigma_min: f64 },

    /// An input is degenerate for the requested operation (e.g. a zero
    /// reference solution in a relative-error computation).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A scalar parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A text file (Matrix Market, vector, trace, sidecar) failed to parse.
    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: &std::path::Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}
