use thiserror::Error;

#[derive(Debug, Error)]
pub enum UnireError {
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("internal consistency violation: {0}")]
    Internal(String),
    #[error("numeric error at {location}: {message}")]
    Numeric { location: String, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, UnireError>;
