//! Domain values shared by every layer. All of them are plain immutable data
//! once constructed.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::ids::{AgentId, InquiryId};
use crate::label::{Label, SynonymTable};

/// Values this far outside `[0, 1]` are treated as parsing noise and clamped.
pub const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InquirySource {
    Api,
    Cli,
    EvalReplay,
}

/// A free-text emergency case description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseInquiry {
    pub inquiry_id: InquiryId,
    pub text: String,
    pub created_at: DateTime<Utc>,
    pub source: InquirySource,
}

impl CaseInquiry {
    pub fn new(
        inquiry_id: InquiryId,
        text: impl Into<String>,
        created_at: DateTime<Utc>,
        source: InquirySource,
    ) -> Result<Self, CoreError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(CoreError::EmptyCaseText);
        }
        Ok(Self { inquiry_id, text, created_at, source })
    }
}

/// Triage severity attached to a hypothesis. Ordered from least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Urgency {
    Routine = 1,
    Urgent = 2,
    Emergent = 3,
    Critical = 4,
}

impl Urgency {
    pub const ALL: [Urgency; 4] = [Urgency::Routine, Urgency::Urgent, Urgency::Emergent, Urgency::Critical];

    pub fn as_str(self) -> &'static str {
        match self {
            Urgency::Routine => "routine",
            Urgency::Urgent => "urgent",
            Urgency::Emergent => "emergent",
            Urgency::Critical => "critical",
        }
    }

    pub fn level(self) -> u8 {
        self as u8
    }

    pub fn from_level(level: u8) -> Option<Self> {
        match level {
            1 => Some(Urgency::Routine),
            2 => Some(Urgency::Urgent),
            3 => Some(Urgency::Emergent),
            4 => Some(Urgency::Critical),
            _ => None,
        }
    }
}

impl fmt::Display for Urgency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Urgency {
    type Err = ();

    /// Accepts the level names in any case, or the digits 1 to 4.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(level) = s.parse::<u8>() {
            return Urgency::from_level(level).ok_or(());
        }
        Urgency::ALL
            .into_iter()
            .find(|u| u.as_str().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

/// One candidate diagnosis returned by an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisHypothesis {
    pub label: Label,
    pub raw_label: String,
    pub probability: f64,
    pub urgency: Urgency,
}

impl DiagnosisHypothesis {
    /// Builds a hypothesis from agent text, canonicalizing the label. The
    /// probability is checked later by [`validate_response`].
    pub fn from_raw(
        raw_label: impl Into<String>,
        probability: f64,
        urgency: Urgency,
        synonyms: &SynonymTable,
    ) -> Result<Self, CoreError> {
        let raw_label = raw_label.into();
        let label = synonyms.canonicalize(&raw_label)?;
        Ok(Self { label, raw_label, probability, urgency })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentStatus {
    Ok,
    Timeout,
    TransportError,
    Unparseable,
}

impl AgentStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentStatus::Ok => "ok",
            AgentStatus::Timeout => "timeout",
            AgentStatus::TransportError => "transport_error",
            AgentStatus::Unparseable => "unparseable",
        }
    }
}

impl fmt::Display for AgentStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One agent's ranked differential for one inquiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub agent_id: AgentId,
    pub inquiry_id: InquiryId,
    pub hypotheses: Vec<DiagnosisHypothesis>,
    pub status: AgentStatus,
    pub latency_ms: u64,
    pub raw_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl AgentResponse {
    /// A response that carries no differential.
    pub fn failed(
        agent_id: AgentId,
        inquiry_id: InquiryId,
        status: AgentStatus,
        reason: impl Into<String>,
        latency_ms: u64,
    ) -> Self {
        Self {
            agent_id,
            inquiry_id,
            hypotheses: Vec::new(),
            status,
            latency_ms,
            raw_output: String::new(),
            reason: Some(reason.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == AgentStatus::Ok
    }

    pub fn top1(&self) -> Option<&Label> {
        if self.is_ok() {
            self.hypotheses.first().map(|h| &h.label)
        } else {
            None
        }
    }

    /// Probability this response assigns to `label`, if it lists it.
    pub fn probability_of(&self, label: &Label) -> Option<f64> {
        self.hypotheses.iter().find(|h| &h.label == label).map(|h| h.probability)
    }
}

fn checked_probability(label: &str, value: f64) -> Result<f64, CoreError> {
    if !value.is_finite() {
        return Err(CoreError::InvalidProbability { label: label.into(), value });
    }
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else if (-PROBABILITY_SLACK..0.0).contains(&value) {
        Ok(0.0)
    } else if value > 1.0 && value <= 1.0 + PROBABILITY_SLACK {
        Ok(1.0)
    } else {
        Err(CoreError::InvalidProbability { label: label.into(), value })
    }
}

/// Brings an assembled response into its invariant form.
///
/// Labels are re-derived from `raw_label`, probabilities within
/// [`PROBABILITY_SLACK`] of the unit interval are clamped, duplicate labels
/// are merged (max probability, max urgency) and the list is stably sorted
/// by descending probability.
pub fn validate_response(candidate: AgentResponse, synonyms: &SynonymTable) -> Result<AgentResponse, CoreError> {
    let mut merged: Vec<DiagnosisHypothesis> = Vec::with_capacity(candidate.hypotheses.len());
    for hypothesis in candidate.hypotheses.iter() {
        let label = synonyms.canonicalize(&hypothesis.raw_label)?;
        let probability = checked_probability(&hypothesis.raw_label, hypothesis.probability)?;
        match merged.iter_mut().find(|h| h.label == label) {
            Some(existing) => {
                if probability > existing.probability {
                    existing.probability = probability;
                    existing.raw_label = hypothesis.raw_label.clone();
                }
                existing.urgency = existing.urgency.max(hypothesis.urgency);
            }
            None => merged.push(DiagnosisHypothesis {
                label,
                raw_label: hypothesis.raw_label.clone(),
                probability,
                urgency: hypothesis.urgency,
            }),
        }
    }
    // probabilities are finite here, so partial_cmp never fails
    merged.sort_by(|a, b| b.probability.partial_cmp(&a.probability).unwrap_or(core::cmp::Ordering::Equal));

    match (candidate.status, merged.is_empty()) {
        (AgentStatus::Ok, true) => return Err(CoreError::EmptyDifferential),
        (status, false) if status != AgentStatus::Ok => return Err(CoreError::UnexpectedHypotheses(status)),
        _ => {}
    }
    Ok(AgentResponse { hypotheses: merged, ..candidate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RubricFeature {
    DiagnosticAccuracy,
    TreatmentAdvice,
    ImageInterpretation,
    UrgencyDetection,
    AlternativeDiagnoses,
}

/// The physician-confirmed diagnosis for an inquiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmedDiagnosis {
    pub inquiry_id: InquiryId,
    pub label: Label,
    pub confirmed_by: String,
    pub confirmed_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric: Option<BTreeMap<RubricFeature, f64>>,
}

impl ConfirmedDiagnosis {
    pub fn new(
        inquiry_id: InquiryId,
        label: Label,
        confirmed_by: impl Into<String>,
        confirmed_at: DateTime<Utc>,
        rubric: Option<BTreeMap<RubricFeature, f64>>,
    ) -> Result<Self, CoreError> {
        if let Some(scores) = &rubric {
            for &score in scores.values() {
                if !(0.0..=4.0).contains(&score) {
                    return Err(CoreError::InvalidRubricScore(score));
                }
            }
        }
        Ok(Self { inquiry_id, label, confirmed_by: confirmed_by.into(), confirmed_at, rubric })
    }
}

/// The gathered response vector for one inquiry, one entry per configured
/// agent in configuration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchResult {
    pub inquiry_id: InquiryId,
    pub responses: Vec<AgentResponse>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub deadline_ms: u64,
}

impl DispatchResult {
    pub fn ok_responses(&self) -> impl Iterator<Item = &AgentResponse> {
        self.responses.iter().filter(|r| r.is_ok())
    }

    pub fn ok_count(&self) -> usize {
        self.ok_responses().count()
    }

    pub fn statuses(&self) -> Vec<(AgentId, AgentStatus)> {
        self.responses.iter().map(|r| (r.agent_id.clone(), r.status)).collect()
    }
}
