use alloc::string::String;

use thiserror::Error;

use crate::ids::{AgentId, InquiryId};
use crate::model::AgentStatus;

/// Validation failures for labels, responses, cases and templates.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("label is empty after normalization")]
    EmptyLabel,
    #[error("probability {value} for {label:?} is not a finite value in [0, 1]")]
    InvalidProbability { label: String, value: f64 },
    #[error("response has status ok but no hypotheses")]
    EmptyDifferential,
    #[error("response has status {0:?} but carries hypotheses")]
    UnexpectedHypotheses(AgentStatus),
    #[error("case text is empty")]
    EmptyCaseText,
    #[error("rubric score {0} is outside [0, 4]")]
    InvalidRubricScore(f64),
    #[error("template error: {0}")]
    Template(String),
    #[error("synonym table line {line}: {reason}")]
    SynonymTable { line: usize, reason: String },
}

/// Failures raised by the meta-learner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetaError {
    #[error("no agents supplied")]
    NoAgents,
    #[error("smoothing must be a positive finite number, got {0}")]
    InvalidSmoothing(f64),
    #[error("no agent returned a usable response")]
    AllAgentsFailed { statuses: alloc::vec::Vec<(AgentId, AgentStatus)> },
    #[error("agent {0} has no weight")]
    UnknownAgent(AgentId),
    #[error("inquiry {0} not found")]
    NotFound(InquiryId),
}
