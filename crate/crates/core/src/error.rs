use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input failed validation (dimension mismatch, index out of range, bad parameter).
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// An exact computation would exceed its configured budget.
    #[error("capacity exceeded: {bound} = {value} > cap {cap}{hint}")]
    Capacity {
        bound: String,
        value: f64,
        cap: f64,
        hint: String,
    },

    #[error("reward `{id}` produced {value}, outside declared range [{min}, {max}]")]
    RewardOutOfRange {
        id: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

/// Shorthand for returning `Error::InvalidInput` from a validation check.
macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::InvalidInput(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
