use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown connection-function variant `{0}`")]
    InvalidVariant(String),

    #[error("table-defined connection function requires an explicit tail radius")]
    MissingTail,

    #[error("quadrature did not converge: value {value:e}, error estimate {error:e} after {subdivisions} subdivisions")]
    NonConvergent {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("component statistics require a connection function of bounded support")]
    UnboundedSupport,

    #[error("simulation margin {have} is smaller than the required {need}")]
    InsufficientMargin { need: f64, have: f64 },

    #[error("sample has zero variance")]
    ZeroVariance,

    #[error("sample too small: need at least {need} values, got {got}")]
    SampleTooSmall { need: usize, got: usize },

    #[error("invalid filtration: {0}")]
    InvalidFiltration(String),

    #[error("estimate not significantly positive: {0}")]
    NotSignificant(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
