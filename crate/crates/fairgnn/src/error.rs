//! Crate-wide error type and exit-code mapping for the CLI.

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor or graph dimensions that do not line up.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// A NaN or infinity appeared where the numeric contract forbids it.
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    /// Structural graph violations (isolated node, bad endpoint, asymmetry).
    #[error("invalid graph: {0}")]
    Graph(String),

    /// Text-format parse failures, with file and 1-based line number.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Dataset- or split-level violations that are not parse errors.
    #[error("invalid data: {0}")]
    Data(String),

    /// Bad experiment configuration (unknown model, missing section, bad override).
    #[error("invalid config: {0}")]
    Config(String),

    /// A metric whose preconditions do not hold on the given inputs.
    #[error("metric undefined: {0}")]
    Metric(String),

    /// Training aborted because the objective or parameters left the finite range.
    #[error("training diverged at epoch {epoch}: {msg}")]
    Diverged { epoch: usize, msg: String },

    /// Checkpoint encode/decode failures.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// An argument outside its documented domain (negative epsilon, alpha < 0, ...).
    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 divergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Invalid(_) => 2,
            Error::Graph(_)
            | Error::Parse { .. }
            | Error::Data(_)
            | Error::Metric(_)
            | Error::Checkpoint(_)
            | Error::Io(_) => 3,
            Error::NonFinite { .. } | Error::Diverged { .. } => 4,
            Error::Shape { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
