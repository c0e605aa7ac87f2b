use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two tensors/matrices whose shapes must agree did not.
    #[error("{context}: shape mismatch ({lhs} vs {rhs})")]
    Shape {
        context: String,
        lhs: String,
        rhs: String,
    },

    /// Invalid argument or configuration value.
    #[error("{0}")]
    Invalid(String),

    /// Gradient contained NaN/Inf; the optimizer refuses to apply it.
    #[error("non-finite gradient in layer `{0}`")]
    NonFiniteGrad(String),

    /// Training loss diverged.
    #[error("non-finite loss at epoch {epoch}, batch {batch} (loss = {loss})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// Text file (clip/stats/mask/config/csv) failed to parse.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Binary weight file violated the format.
    #[error("{path}: {msg} (byte offset {offset})")]
    WeightFile {
        path: String,
        offset: usize,
        msg: String,
    },
}

impl Error {
    pub fn shape(context: &str, lhs: impl std::fmt::Debug, rhs: impl std::fmt::Debug) -> Self {
        Error::Shape {
            context: context.to_string(),
            lhs: format!("{lhs:?}"),
            rhs: format!("{rhs:?}"),
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
