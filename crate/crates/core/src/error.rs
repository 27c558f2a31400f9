use thiserror::Error;

/// Errors raised anywhere in the simulation and analysis pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("rate alpha[{population}]({from}->{to}) = {value} is negative or non-finite")]
    RateDomain {
        population: usize,
        from: usize,
        to: usize,
        value: f64,
    },
    #[error("non-finite {what} at t = {time}")]
    NonFinite { what: &'static str, time: f64 },
    #[error("integration failed after last good time t = {last_good}: {reason}")]
    Integration { last_good: f64, reason: String },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("subthreshold amplitude A = {amplitude}: no threshold crossing before t = {t_max}")]
    SubthresholdAmplitude { amplitude: f64, t_max: f64 },
    #[error("tangential crossing: crossing speed {speed:e} is below tolerance")]
    TangentialCrossing { speed: f64 },
    #[error("transversality violated: grad(phi).F = {value:e} must be negative")]
    Transversality { value: f64 },
    #[error("no passage through phi = 0 before t = {t_max}")]
    NoPassage { t_max: f64 },
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("trial {trial} failed: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical pipeline, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Config { .. } | Error::InvalidInput(_) | Error::Io(_) => false,
            Error::Trial { source, .. } => source.is_numerical(),
            _ => true,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
