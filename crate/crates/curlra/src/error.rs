//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An iterative kernel (SVD, quadrature) failed to converge.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A rank-revealing step found a different numerical rank than requested.
    #[error("rank mismatch: expected {expected}, revealed {found}")]
    RankMismatch { expected: usize, found: usize },

    /// Exact-inverse nucleus (k = l = r) hit a singular generator.
    #[error("singular CUR generator ({k}x{l}, target rank {r})")]
    SingularGenerator { k: usize, l: usize, r: usize },

    /// Random index selection kept producing rank-deficient generators.
    #[error("unlucky sampling: {attempts} draws produced generators of rank < {target_rank}")]
    UnluckySampling { attempts: usize, target_rank: usize },

    /// The a priori error bound is undefined because theta = ||U|| * Delta >= 1.
    #[error("a priori bound unavailable: theta = {theta} >= 1")]
    BoundUnavailable { theta: f64 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A text format (Matrix Market, config file) failed to parse.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
