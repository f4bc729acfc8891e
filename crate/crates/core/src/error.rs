use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported index k = {0}; need k >= 4")]
    UnsupportedIndex(u32),
    #[error("operands belong to different rings (k = {0} vs k = {1})")]
    RingMismatch(u32, u32),
    #[error("{value} lies outside {interval}")]
    OutOfDomain { value: String, interval: &'static str },
    #[error("point {0} is inside the boundary collar")]
    Boundary(String),
    #[error("singular matrix")]
    Singular,
    #[error("division by zero")]
    DivisionByZero,
    #[error("rectangle crosses the diagonal x = y")]
    CrossesDiagonal,
    #[error("domain has infinite measure; supply a clip threshold")]
    InfiniteMeasure,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("estimator failed: {0}")]
    Estimator(String),
    #[error("internal check failed: {0}")]
    Check(String),
}

pub type Result<T> = std::result::Result<T, Error>;
