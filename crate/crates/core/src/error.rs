use thiserror::Error;

use crate::AgentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("field evaluated at obstacle center ({x}, {y})")]
    SingularityEvaluation { x: f64, y: f64 },

    #[error("invalid obstacle: {0}")]
    InvalidObstacle(String),

    #[error("obstacle centers must be pairwise distinct, duplicate at ({x}, {y})")]
    DuplicateObstacle { x: f64, y: f64 },

    #[error("sampling domain is empty: every grid point lies inside an exclusion disk")]
    EmptyDomain,

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("jacobian is singular at ({x}, {y}) even after damping")]
    SingularJacobian { x: f64, y: f64 },

    #[error("solver iterate diverged to a non-finite value")]
    NonFinite,

    #[error("agent {agent} starts inside a planned exclusion disk")]
    AgentInsideExclusion { agent: AgentId },

    #[error("agent {agent}: {source}")]
    Agent {
        agent: AgentId,
        #[source]
        source: Box<Error>,
    },

    #[error("check not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    ConfigInvalid(Vec<String>),

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn for_agent(self, agent: AgentId) -> Error {
        match self {
            e @ (Error::Agent { .. } | Error::AgentInsideExclusion { .. }) => e,
            e => Error::Agent {
                agent,
                source: Box::new(e),
            },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
