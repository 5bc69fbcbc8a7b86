use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix too large for exact permanent: min dimension {size} exceeds limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("singular profile: {0}")]
    SingularProfile(String),

    #[error("column {0} of the power profile sums to zero")]
    ZeroColumn(usize),

    #[error("unknown built-in profile `{0}`")]
    UnknownProfile(String),

    #[error("denominator polynomial has clustered roots {cluster:?}")]
    DegenerateRoots { cluster: Vec<Complex64> },

    #[error("quadrature did not converge: estimated error {achieved:e} after {subdivisions} subdivisions")]
    QuadratureNonConvergence { achieved: f64, subdivisions: usize },

    #[error("channel realization is numerically singular (condition number {condition:e})")]
    SingularChannel { condition: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by numerical degeneracy rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateRoots { .. }
                | Error::QuadratureNonConvergence { .. }
                | Error::SingularChannel { .. }
        )
    }
}
