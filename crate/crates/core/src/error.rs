use thiserror::Error;

/// Errors raised by the reconstruction toolkit.
///
/// Variants follow the failure classes of the numerical pipeline: bad
/// arguments (`Domain`, `Validation`), insufficient discretisation
/// (`Resolution`), and failures of an inversion stage.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("spectral error: {0}")]
    Spectral(String),
    #[error("positivity error: {0}")]
    Positivity(String),
    #[error("reconstruction error: {0}")]
    Reconstruction(String),
    #[error("stability error: {0}")]
    Stability(String),
    #[error("applicability error: {0}")]
    Applicability(String),
    #[error("optimization error: {0}")]
    Optimization(String),
    #[error("conditioning error: {0}")]
    Conditioning(String),
    #[error("matching error: {0}")]
    Matching(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the name of the pipeline stage that produced it.
    pub fn at_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
