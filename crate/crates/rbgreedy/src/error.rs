//! Crate-wide error types.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The snapshot selected for basis extension is numerically in the span
    /// of the current basis.
    #[error("greedy breakdown: residual norm {residual:.3e} below tolerance {tolerance:.3e}")]
    Breakdown { residual: f64, tolerance: f64 },

    /// A certified budget whose `m` or `N` cannot be represented or afforded.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error("basis file: {0}")]
    BasisFile(#[from] BasisFileError),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Load failures for the binary basis container, kept distinct so callers can
/// tell corruption from version drift.
#[derive(Debug, Error)]
pub enum BasisFileError {
    #[error("bad magic bytes (not a basis file)")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("file truncated: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
