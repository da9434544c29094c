//! Extraction of a differential from free-form agent output.
//!
//! Agents are asked for a JSON array of `{diagnosis, probability, urgency}`
//! objects, but replies are often wrapped in prose or code fences. The parser
//! scans for the first JSON array whose elements carry those fields and keeps
//! the entries that validate. Failure is reported as
//! [`AgentStatus::Unparseable`], never as an error.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::{Map, Value};

use crate::ids::{AgentId, InquiryId};
use crate::label::SynonymTable;
use crate::model::{validate_response, AgentResponse, AgentStatus, DiagnosisHypothesis, Urgency, PROBABILITY_SLACK};

fn field<'a>(object: &'a Map<String, Value>, name: &str) -> Option<&'a Value> {
    object.get(name).or_else(|| object.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v))
}

fn probability(value: &Value) -> Option<f64> {
    let p = match value {
        Value::Number(n) => n.as_f64()?,
        Value::String(s) => s.trim().parse::<f64>().ok()?,
        _ => return None,
    };
    (-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p).then_some(p)
}

fn urgency(value: &Value) -> Option<Urgency> {
    match value {
        Value::String(s) => s.parse().ok(),
        Value::Number(n) => Urgency::from_level(u8::try_from(n.as_u64()?).ok()?),
        _ => None,
    }
}

fn entry(value: &Value, synonyms: &SynonymTable) -> Option<DiagnosisHypothesis> {
    let object = value.as_object()?;
    let raw_label = field(object, "diagnosis")?.as_str()?;
    let p = probability(field(object, "probability")?)?;
    let u = urgency(field(object, "urgency")?)?;
    DiagnosisHypothesis::from_raw(raw_label, p, u, synonyms).ok()
}

fn looks_like_differential(items: &[Value]) -> bool {
    !items.is_empty()
        && items.iter().all(Value::is_object)
        && items.iter().any(|v| v.as_object().is_some_and(|o| field(o, "diagnosis").is_some()))
}

/// Candidate JSON arrays in order of their opening bracket.
fn arrays(raw: &str) -> impl Iterator<Item = Vec<Value>> + '_ {
    raw.match_indices('[').filter_map(move |(start, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Array(items))) => Some(items),
            _ => None,
        }
    })
}

/// Parses one complete agent reply. `latency_ms` is left at zero for the
/// caller to fill in.
pub fn parse_agent_output(
    raw: &str,
    agent_id: &AgentId,
    inquiry_id: &InquiryId,
    synonyms: &SynonymTable,
) -> AgentResponse {
    for items in arrays(raw).filter(|items| looks_like_differential(items)) {
        let hypotheses: Vec<_> = items.iter().filter_map(|v| entry(v, synonyms)).collect();
        if hypotheses.is_empty() {
            continue;
        }
        let candidate = AgentResponse {
            agent_id: agent_id.clone(),
            inquiry_id: inquiry_id.clone(),
            hypotheses,
            status: AgentStatus::Ok,
            latency_ms: 0,
            raw_output: raw.to_string(),
            reason: None,
        };
        if let Ok(response) = validate_response(candidate, synonyms) {
            return response;
        }
    }
    AgentResponse {
        raw_output: raw.to_string(),
        ..AgentResponse::failed(
            agent_id.clone(),
            inquiry_id.clone(),
            AgentStatus::Unparseable,
            "no differential array found",
            0,
        )
    }
}
