use thiserror::Error;

/// Errors produced by the simulator and its I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("invalid wave vector: {0}")]
    WaveVector(String),

    #[error("invalid basis request: {0}")]
    Basis(String),

    #[error("invalid forcing: {0}")]
    Forcing(String),

    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("blow-up at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("ensemble failed: {0}")]
    Ensemble(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration errors: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable category, used in CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Grid(_) | Error::GridMismatch { .. } => "grid",
            Error::WaveVector(_) => "wave_vector",
            Error::Basis(_) => "basis",
            Error::Forcing(_) => "forcing",
            Error::Params(_) => "params",
            Error::BlowUp { .. } => "blow_up",
            Error::Ensemble(_) => "ensemble",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Config(_) => "config",
            Error::Snapshot(_) => "snapshot",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
