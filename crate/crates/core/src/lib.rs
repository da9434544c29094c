//! Pure, allocation-only core of the MEDAS diagnostic super-learner.
//!
//! Everything in this crate is deterministic and free of IO so it can be
//! shared by the service, the CLI and the evaluation harness alike:
//!
//! - [`label`]: canonical diagnosis labels and the optional synonym table
//! - [`model`]: case, hypothesis, agent response and confirmation types
//! - [`prompt`]: per-agent prompt templates
//! - [`parse`]: lenient extraction of differentials from free-form agent text
//! - [`stub`]: seeded synthetic agents for reproducible experiments
//! - [`meta`]: accuracy-derived weights and the two consolidation strategies
//! - [`eval`]: Pass@1 scoring, coverage, and report rendering
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod eval;
pub mod ids;
pub mod label;
pub mod meta;
pub mod model;
pub mod parse;
pub mod prompt;
pub mod stub;

pub use error::{CoreError, MetaError};
pub use ids::{AgentId, InquiryId};
pub use label::{canonicalize_label, Label, SynonymTable};
pub use meta::{
    aggregate, aggregate_prob_sum, aggregate_top1_vote, compute_weights, AgentStats,
    ConsolidatedResponse, DifferentialEntry, StatsLedger, Strategy, WeightVector,
};
pub use model::{
    validate_response, AgentResponse, AgentStatus, CaseInquiry, ConfirmedDiagnosis,
    DiagnosisHypothesis, DispatchResult, InquirySource, RubricFeature, Urgency,
};
