use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A point or parameter lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Input violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// A numerical procedure failed or produced non-finite values.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A simulation ran out of retries or exceeded a size cap.
    #[error("resource error: {0}")]
    Resource(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(format!($($arg)*)))
    };
}
pub(crate) use bail;
