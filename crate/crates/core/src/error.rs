use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid environment model: {0}")]
    InvalidModel(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("rejection sampler exhausted after {attempts} attempts (horizon {horizon})")]
    RejectionExhausted { horizon: usize, attempts: u64 },

    #[error("ladder estimation did not converge: {censored} of {epochs} epochs exceeded {cap} steps")]
    LadderNonconvergence { censored: usize, epochs: usize, cap: u64 },

    #[error("population saturated at generation {generation}")]
    Saturation { generation: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{test}: {source}")]
    Experiment {
        test: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Attaches the name of the failing test.
    pub fn in_test(self, test: &str) -> Self {
        Error::Experiment {
            test: test.to_string(),
            source: Box::new(self),
        }
    }
}
