use thiserror::Error;

/// Errors produced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid boundaries: {0}")]
    InvalidBoundaries(String),
    #[error("invalid durations: {0}")]
    InvalidDurations(String),
    #[error("invalid rate inputs: {0}")]
    InvalidRateInputs(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("invalid boundary targets: {0}")]
    InvalidTargets(String),
    #[error("fit diverged after {step} steps (loss {loss})")]
    FitDiverged { step: usize, loss: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("duration budget infeasible: {total} frames cannot hold {tokens} tokens of at least {d_min}")]
    BudgetInfeasible { total: u64, tokens: usize, d_min: u32 },
    #[error("invalid alignment: {0}")]
    InvalidAlignment(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("token index {index} out of range for {levels} levels")]
    InvalidToken { index: usize, levels: usize },
    #[error("degenerate code: every dimension sits on the zero level")]
    DegenerateCode,
    #[error("codebook of {levels}^{dim} entries exceeds the enumeration cap")]
    TooLarge { dim: usize, levels: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no candidate vectors in the probed lists")]
    NoCandidate,
    #[error("decode mode mismatch: {0}")]
    ModeMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(offset: usize, message: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: message.into(),
        }
    }

    /// True for errors caused by malformed bytes or files rather than bad values.
    pub fn is_format(&self) -> bool {
        matches!(self, Error::Format { .. } | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
