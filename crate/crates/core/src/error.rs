use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("integration did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    NonConvergence { achieved: f64, requested: f64 },

    #[error("timetag stream on channel {channel} is not sorted at index {index}")]
    Unsorted { channel: u16, index: usize },

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("dip not resolvable: {0}")]
    DipNotResolvable(String),

    #[error("histogram binning mismatch: {0}")]
    BinningMismatch(String),

    #[error("bad timetag file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
