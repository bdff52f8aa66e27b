use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension N = {0} out of range: the critical exponent 2N/(N-4) requires N >= 5")]
    DimensionOutOfRange(usize),

    #[error("quadrature did not converge: achieved standard error {achieved:.3e}, requested {requested:.3e}")]
    Accuracy { achieved: f64, requested: f64 },

    #[error("invalid constant `{name}` = {value}: must be strictly positive")]
    InvalidConstant { name: &'static str, value: f64 },

    #[error("point coincides with the domain center; nearest boundary point is not unique")]
    NoUniqueFrame,

    #[error("point at distance {distance} from center lies outside the ball of radius {radius}")]
    OutsideDomain { distance: f64, radius: f64 },

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range {min}..={max}")]
    IndexOutOfRange { index: usize, min: usize, max: usize },

    #[error("coincident arguments (|x - y| = {0:.3e}): kernel is singular")]
    Singularity(f64),

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("no interior minimum: {0}")]
    NoMinimum(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown subcommand `{0}`; valid subcommands: constants, bubble-check, green-check, projection-scan, asymptotics, critical-points, residual-scan, energy-check")]
    UnknownSubcommand(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
