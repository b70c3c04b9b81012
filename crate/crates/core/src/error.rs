use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate direction: vector norm {0:.3e} is zero or not finite")]
    DegenerateDirection(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("negative signal value {value} at x = {x}")]
    NegativeSignal { x: f64, value: f64 },

    #[error("no extrema in window [{lo}, {hi}]")]
    NoExtrema { lo: f64, hi: f64 },

    #[error("quadrature did not converge: relative change {rel_change:.3e} on node doubling (value {coarse:.6e} -> {fine:.6e})")]
    NotConverged {
        rel_change: f64,
        coarse: f64,
        fine: f64,
    },

    #[error(
        "unidentifiable: objective varies by {relative_variation:.3e} (relative) across the bounds"
    )]
    Unidentifiable { relative_variation: f64 },

    #[error("evaluation failed at x = {x}: {source}")]
    AtPoint { x: f64, source: Box<Error> },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
