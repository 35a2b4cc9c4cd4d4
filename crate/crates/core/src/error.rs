use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("dimensionless separation must be positive, got {0}")]
    NonPositiveSeparation(f64),

    #[error("relaxation matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("closed forms need a symmetric three-emitter array (|Δ12 - Δ23| = {0:e})")]
    AsymmetricArray(f64),

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("no population inversion into level {level} before t = {t_end}")]
    NoInversion { level: char, t_end: f64 },

    #[error("closed form is singular: {0}")]
    Singular(&'static str),

    #[error("no interior fidelity maximum for detuning in [{lo}, {hi}]")]
    NoCalibrationMaximum { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),

    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("state has zero norm")]
    ZeroNorm,
}

pub type Result<T> = std::result::Result<T, Error>;
