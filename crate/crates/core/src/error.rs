use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("plan does not match block: {0}")]
    PlanMismatch(String),

    #[error("dense {0} count is zero")]
    ZeroDenseCount(&'static str),

    #[error("config: {0}")]
    Config(String),

    #[error("bad tensor magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported tensor file version {0}")]
    UnsupportedVersion(u8),

    #[error("unknown dtype tag {0}")]
    UnknownDtype(u8),

    #[error("truncated tensor file: needed {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("{0} trailing bytes after tensor payload")]
    TrailingBytes(usize),

    #[error("dtype mismatch: expected {expected}, found {found}")]
    DtypeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 1 validation, 2 I/O and format, 3 internal invariant.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::PlanMismatch(_)
            | Error::ZeroDenseCount(_)
            | Error::Config(_) => 1,
            Error::BadMagic(_)
            | Error::UnsupportedVersion(_)
            | Error::UnknownDtype(_)
            | Error::Truncated { .. }
            | Error::TrailingBytes(_)
            | Error::DtypeMismatch { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::Invariant(_) => 3,
        }
    }
}
