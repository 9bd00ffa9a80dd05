use thiserror::Error;

/// Errors raised by the reserve model, the network solver and the scenario loader.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A closed form was evaluated outside its domain (log of a nonpositive argument).
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "network is disconnected: buses {isolated:?} are not reachable from the reference bus"
    )]
    Disconnected { isolated: Vec<usize> },

    #[error("numerical failure in state {state}: {reason}")]
    Numerical { state: usize, reason: String },

    #[error("system state count {count} exceeds the cap of {cap}; reduce the unit polynomials with lz_reduce or raise the cap")]
    StateOverflow { count: usize, cap: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
