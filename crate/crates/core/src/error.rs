use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid wavefunction: {0}")]
    InvalidWavefunction(String),

    #[error("non-normalizable model: {0}")]
    NonNormalizable(String),

    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("relative tolerance {0} outside [1e-14, 1e-2]")]
    InvalidTolerance(f64),

    #[error("invalid detector geometry: {0}")]
    InvalidGeometry(String),

    #[error("denominator consistent with zero: {value} (quadrature error {error})")]
    DenominatorZero { value: f64, error: f64 },

    #[error("negative density {value} exceeds rounding tolerance (scale {scale})")]
    NegativeDensity { value: f64, scale: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("insufficient converged points: {0} (need at least 4)")]
    InsufficientPoints(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
