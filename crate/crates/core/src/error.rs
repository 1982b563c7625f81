use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit-code contract: invalid inputs and malformed
/// files are usage errors (2), simulation blow-ups are runtime failures (3),
/// and the remaining variants flag numerical degeneracy of data or config (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("simulation diverged: non-finite state at step {step}")]
    SimulationDiverged { step: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unusable bandwidth: {0}")]
    Bandwidth(String),

    #[error("stationary density underflow at sample {sample} (p_s = {value:e})")]
    DegenerateWeight { sample: usize, value: f64 },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
