use thiserror::Error;

use crate::units::UnitError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {steps} steps at t = {t:.6e}")]
    TooManySteps { steps: usize, t: f64 },

    #[error("Fock truncation breached: population {population:.3e} on the top level at t = {t:.6e}")]
    TruncationBreach { population: f64, t: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("no peak found in spectrum")]
    NoPeakFound,

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("no heteroclinic connection for friction in [{lo}, {hi}]")]
    NoConnection { lo: f64, hi: f64 },

    #[error("kink profile is not monotone near xi = {xi:.6e}")]
    NonMonotoneProfile { xi: f64 },

    #[error(transparent)]
    Unit(#[from] UnitError),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
