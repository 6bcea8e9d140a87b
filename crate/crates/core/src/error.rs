use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the models, the fitting engine and the data/config layer.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received inputs that violate its contract.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A query fell outside the validated range of a model.
    #[error("{quantity} = {value} outside validated range [{min}, {max}]")]
    OutOfRange {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("no photorefraction parameters for {0} °C")]
    MissingTemperature(f64),

    /// Configuration problem located by a dotted field path.
    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    /// Malformed measurement data, located by 1-based line in the source.
    #[error("{source_name}, line {line}: {message}")]
    Data {
        source_name: String,
        line: u64,
        message: String,
    },

    /// The numerics could not produce a result (singular system, no bracket, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}
