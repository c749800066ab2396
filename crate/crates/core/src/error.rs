use thiserror::Error;

use crate::mdp::Violation;
use crate::reduce::ReductionViolation;
use crate::spec::ltl::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {}", format_list(.0))]
    InvalidMdp(Vec<Violation>),

    #[error("invalid reduction descriptor: {}", format_list(.0))]
    InvalidReduction(Vec<ReductionViolation>),

    #[error("action {action} out of range (MDP has {num_actions} actions)")]
    ActionOutOfRange { action: usize, num_actions: usize },

    #[error("state {state} out of range (MDP has {num_states} states)")]
    StateOutOfRange { state: usize, num_states: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid reward machine: {0}")]
    InvalidMachine(String),

    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),

    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),

    #[error("policy map rejected: {0}")]
    PolicyMap(String),

    #[error("descriptor corruption: {0}")]
    DescriptorCorruption(String),

    #[error("run of length {len} is shorter than the averaging horizon {t}")]
    RunTooShort { len: usize, t: usize },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn format_list<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
