use thiserror::Error;

use crate::protocols::{EphemeralId, ProtocolKind};
use crate::textfmt::ParseError;
use crate::world::{AgentId, ConfigErrors, RunId};
use crate::Tick;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigErrors),

    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),

    #[error("protocol {0} does not use ephemeral identifiers")]
    IdentifiersNotUsed(ProtocolKind),

    #[error("{variant} is not a legal message under protocol {kind}")]
    IllegalMessage {
        kind: ProtocolKind,
        variant: &'static str,
    },

    #[error("identifier {0} cannot be resolved: not in the authority registry")]
    UnknownIdentifier(EphemeralId),

    #[error("agent {agent} has no report event at tick {tick}")]
    NotReported { agent: AgentId, tick: Tick },

    #[error("artifacts come from different runs (expected {expected}, found {found})")]
    MismatchedRun { expected: RunId, found: RunId },

    #[error("inconsistent trace: {0}")]
    InconsistentTrace(String),

    #[error(transparent)]
    Parse(#[from] ParseError),
}
