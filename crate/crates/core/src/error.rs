use alloc::string::String;

/// Errors shared by every module.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{n} qubits exceeds the dense cap of {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state is not normalised (norm {0})")]
    NotNormalised(f64),

    /// Requested energy sits at or above the infinite-temperature mean.
    #[error("energy {energy} requires negative temperature (mean {mean})")]
    NegativeTemperature { energy: f64, mean: f64 },

    /// Requested energy is unreachable at any finite positive temperature.
    #[error("energy {energy} is at or below the ground state ({ground})")]
    BelowGroundState { energy: f64, ground: f64 },

    /// Thermal model left its positive-temperature range mid-run.
    #[error("thermal model broke down at t = {t}: {reason}")]
    ThermalBreakdown { t: f64, reason: String },

    #[error("integrator failed at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("drive is not cyclic: G(0) = {start}, G(end) = {end}")]
    NonCyclic { start: f64, end: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("ansatz outside its valid regime: {0}")]
    Ansatz(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
