use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("drift must be positive, got {0}")]
    Drift(f64),

    #[error("boundary error: {0}")]
    Boundary(String),

    #[error("numerics error: {0}")]
    Numerics(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("expected equal sample sizes, got {f_count} F and {g_count} G observations")]
    Shape { f_count: usize, g_count: usize },

    #[error("tie at value {0}")]
    Tie(f64),

    #[error("branch error: {0}")]
    Branch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for numerics,
    /// 4 for output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Boundary(_) | Error::Branch(_) | Error::Drift(_) => 2,
            Error::Numerics(_) | Error::Domain(_) | Error::Shape { .. } | Error::Tie(_) => 3,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 4,
        }
    }
}
