use thiserror::Error;

/// Errors raised by simulation, detection and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A collapse was requested for a configuration that admits a distance tie.
    #[error(
        "ambiguous configuration: particles {first} and {second} tie (gap {gap:e}) \
         for weights {weights:?}"
    )]
    Ambiguous {
        first: usize,
        second: usize,
        weights: Vec<u32>,
        gap: f64,
    },

    /// Branching was requested at a site with zero weight.
    #[error("invalid branch at site {site}: weight is zero")]
    InvalidBranch { site: usize },

    /// A bounded resource (memory budget for BBM nodes) was exhausted.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
