//! Error types shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failures reported by the library.
///
/// Instance-loading problems carry the offending entry or eigenvalue in the
/// message so a bad file can be fixed without a debugger.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("bad dimension: {0}")]
    BadDimension(String),

    #[error("duplicate entry: {0}")]
    DuplicateEntry(String),

    #[error("unpaired entry: {0}")]
    UnpairedEntry(String),

    #[error("non-Hermitian pair: {0}")]
    NonHermitianPair(String),

    #[error("sparsity violation: {0}")]
    SparsityViolation(String),

    #[error("spectrum out of declared bounds: {0}")]
    SpectrumOutOfBounds(String),

    #[error("bad right-hand side: {0}")]
    BadRhs(String),

    #[error("oracle query out of range: {0}")]
    OracleRange(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("series construction: {0}")]
    Series(String),

    #[error("certification failed: {0}")]
    Certification(String),

    #[error("register layout: {0}")]
    Layout(String),

    #[error("numeric guard tripped: {0}")]
    Numeric(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
