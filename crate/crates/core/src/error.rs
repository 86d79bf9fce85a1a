use thiserror::Error;

use crate::spectral::Field;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("REFUSED_ALIASING: {0}")]
    RefusedAliasing(String),

    #[error("REFUSED_TRUNCATION: {0}")]
    RefusedTruncation(String),

    #[error("REFUSED_UNDERRESOLVED: {0}")]
    RefusedUnderresolved(String),

    #[error("REFUSED_SUBGRID: scale {scale} is below the grid spacing {spacing}")]
    RefusedSubgrid { scale: f64, spacing: f64 },

    #[error("TRUNCATION_SUSPECT: {0}")]
    TruncationSuspect(String),

    /// The state stopped being finite. Carries the last finite state.
    #[error("NUMERICAL_BLOWUP at t = {t}")]
    NumericalBlowup { t: f64, last_finite: Box<Field> },

    #[error("residual check failed: {0}")]
    Residual(String),

    #[error("shooting failed: {0}")]
    ShootingFailed(String),

    #[error("NO_BLOWUP_TREND: {0}")]
    NoBlowupTrend(String),

    #[error("CONCENTRATION_ABSENT: {0}")]
    ConcentrationAbsent(String),

    #[error("INSUFFICIENT_WINDOW: {0}")]
    InsufficientWindow(String),

    #[error("INSUFFICIENT_SAMPLING: {0}")]
    InsufficientSampling(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate case: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
