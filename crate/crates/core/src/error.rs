use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no events: every kernel-smoother value is zero")]
    NoEvents,

    #[error("KL divergence is infinite: model has zero mass at state index {0} where the target is positive")]
    SupportMismatch(usize),

    #[error("every parameter was pruned from the domain")]
    EmptyDomain,

    #[error("Fisher matrix is not positive definite even with jitter {0:e}")]
    SingularFisher(f64),

    #[error("intensity exceeds its bound: lambda({t}) = {value} > {bound}")]
    BoundViolated { t: f64, value: f64, bound: f64 },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("every grid cell failed to fit")]
    AllCellsFailed,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularFisher(_) | Error::SupportMismatch(_) | Error::EmptyDomain
        )
    }
}
