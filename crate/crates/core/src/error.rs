use thiserror::Error;

/// Errors and block-level flags raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("frequency {shift_hz} Hz aliases at sample rate {sample_rate_hz} Hz")]
    Aliasing { shift_hz: f64, sample_rate_hz: f64 },
    #[error("stream length or rate mismatch: {0}")]
    Mismatch(String),
    #[error("CMA equalizer diverged (post-warmup CM error {0:.3e})")]
    CmaDiverged(f64),
    #[error("carrier frequency estimate is ambiguous: {0}")]
    CfeAmbiguous(String),
    #[error("frame synchronisation failed: {0}")]
    SyncFailed(String),
    #[error("invalid noise calibration: shot {v_shot} <= dark {v_dark}")]
    InvalidCalibration { v_dark: f64, v_shot: f64 },
    #[error("classical receiver report required for quantum processing")]
    MissingClassicalReport,
    #[error("residual frequency search hit boundary at {0} Hz")]
    SearchBoundary(f64),
    #[error("no Alice/Bob covariance (signal absent)")]
    NoCovariance,
    #[error("too few revealed symbols: {0} < 100")]
    TooFewRevealed(usize),
    #[error("nonphysical parameters: {0}")]
    NonPhysical(String),
    #[error("no sign change of the key rate in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
