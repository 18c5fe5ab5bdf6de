use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for an order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("eigenvalue weights underflowed; the core shrinkage matrix is not finite")]
    DegenerateEigenvalues,

    #[error(
        "fitting at full rank under the improper reciprocal scale prior gives an improper \
         posterior; use a proper gamma prior for the noise precision"
    )]
    ImproperFullRankFit,

    #[error("every entry of slice {index} along mode {mode} is missing; the slice is unidentifiable")]
    UnidentifiableSlice { mode: usize, index: usize },

    #[error("missing entries are not supported here: {0}")]
    MissingEntries(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
