use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract error: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

macro_rules! dim_err {
    ($($arg:tt)*) => { $crate::error::TensorError::Dimension(format!($($arg)*)) };
}
pub(crate) use dim_err;
