use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("Hurst index must lie in (0,1), got {0}")]
    InvalidHurst(f64),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("covariance matrix is not positive semidefinite: pivot {pivot:e} at row {row} (tolerance {tolerance:e})")]
    CovarianceNotPsd { pivot: f64, row: usize, tolerance: f64 },

    #[error("circulant embedding has a negative eigenvalue {min:e} (largest {max:e})")]
    CirculantNotPsd { min: f64, max: f64 },

    #[error("generation {generation} needs {intervals} intervals, above the cap of {cap}")]
    GenerationTooLarge { generation: u32, intervals: u128, cap: usize },

    #[error("invalid Cantor parameters m={m}, r={r}: need m >= 2 and 0 < r < 1/m")]
    InvalidRatio { m: u32, r: f64 },

    #[error("alpha={alpha} exceeds H={hurst}")]
    AlphaExceedsH { alpha: f64, hurst: f64 },

    #[error("comparison requires H < H', got H={hurst}, H'={hurst_prime}")]
    HOrderViolation { hurst: f64, hurst_prime: f64 },

    #[error("box counts are constant over the fit range; slope undefined")]
    DegenerateRange,

    #[error("gamma={gamma} is within {margin} of Hd={hd}")]
    GammaAtBoundary { gamma: f64, hd: f64, margin: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("conditioning block is numerically singular: pivot {pivot:e} below tolerance {tolerance:e}")]
    SingularConditioning { pivot: f64, tolerance: f64 },

    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerics (as opposed to bad input or configuration).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CovarianceNotPsd { .. }
                | Error::CirculantNotPsd { .. }
                | Error::DegenerateRange
                | Error::SingularConditioning { .. }
        )
    }
}
