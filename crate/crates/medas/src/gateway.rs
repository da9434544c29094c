//! Uniform invocation of live, stub and replay agents.

use std::sync::Arc;
use std::time::{Duration, Instant};

use medas_core::eval::ReplayLog;
use medas_core::parse::parse_agent_output;
use medas_core::stub::StubProfile;
use medas_core::{AgentResponse, AgentStatus, CaseInquiry, InquiryId, Label, SynonymTable};
use serde_json::Value;

use crate::config::{AgentDescriptor, Config, Transport};

pub const REPLAY_MISS: &str = "replay_miss";

/// Everything needed to call the configured agents. Read-only after
/// construction and cheap to share behind an `Arc`.
#[derive(Debug)]
pub struct Gateway {
    config: Arc<Config>,
    http: reqwest::Client,
}

impl Gateway {
    pub fn new(config: Arc<Config>) -> Self {
        Self { config, http: reqwest::Client::new() }
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn agents(&self) -> &[AgentDescriptor] {
        &self.config.agents
    }

    pub fn synonyms(&self) -> &SynonymTable {
        &self.config.synonyms
    }

    pub fn render_prompt(&self, agent: &AgentDescriptor, case: &CaseInquiry) -> Result<String, medas_core::CoreError> {
        let template = self
            .config
            .templates
            .get(&agent.prompt_template_id)
            .expect("validated at config load");
        template.render(case, self.config.max_hypotheses)
    }

    /// Calls one agent, bounded by `min(agent timeout, budget)`.
    ///
    /// `ground_truth` is only consulted by stub agents; the evaluation
    /// harness attaches it so stubs can hit their configured accuracy.
    pub async fn invoke(
        &self,
        agent: &AgentDescriptor,
        case: &CaseInquiry,
        ground_truth: Option<&Label>,
        budget: Duration,
    ) -> AgentResponse {
        let started = Instant::now();
        let limit = budget.min(Duration::from_millis(agent.timeout_ms()));
        let call = self.call(agent, case, ground_truth);
        let mut response = match tokio::time::timeout(limit, call).await {
            Ok(response) => response,
            Err(_) => AgentResponse::failed(
                agent.agent_id.clone(),
                case.inquiry_id.clone(),
                AgentStatus::Timeout,
                format!("no answer within {} ms", limit.as_millis()),
                0,
            ),
        };
        if !matches!(agent.transport, Transport::Replay { .. }) {
            response.latency_ms = started.elapsed().as_millis() as u64;
        }
        response
    }

    async fn call(&self, agent: &AgentDescriptor, case: &CaseInquiry, ground_truth: Option<&Label>) -> AgentResponse {
        let id = &agent.agent_id;
        match &agent.transport {
            Transport::Stub { delay_ms, fail_with, .. } => {
                if *delay_ms > 0 {
                    tokio::time::sleep(Duration::from_millis(*delay_ms)).await;
                }
                if let Some(status) = fail_with {
                    return AgentResponse::failed(id.clone(), case.inquiry_id.clone(), *status, "configured failure", 0);
                }
                let profile: &StubProfile = &self.config.stubs[id];
                let raw = profile.render_output(&case.inquiry_id, ground_truth, self.config.max_hypotheses);
                parse_agent_output(&raw, id, &case.inquiry_id, &self.config.synonyms)
            }
            Transport::Replay { .. } => {
                let log: &ReplayLog = &self.config.replay_logs[id];
                replay_response(log, agent, &case.inquiry_id, &self.config.synonyms)
            }
            Transport::HttpLlm { endpoint, token_env, model, retries, .. } => {
                let prompt = match self.render_prompt(agent, case) {
                    Ok(p) => p,
                    Err(e) => {
                        return AgentResponse::failed(
                            id.clone(),
                            case.inquiry_id.clone(),
                            AgentStatus::TransportError,
                            e.to_string(),
                            0,
                        )
                    }
                };
                let Ok(token) = std::env::var(token_env) else {
                    return AgentResponse::failed(
                        id.clone(),
                        case.inquiry_id.clone(),
                        AgentStatus::TransportError,
                        format!("credential variable {token_env} is not set"),
                        0,
                    );
                };
                let mut last_error = String::new();
                for attempt in 0..=*retries {
                    match self.post_completion(endpoint, &token, model, &prompt).await {
                        Ok(text) => return parse_agent_output(&text, id, &case.inquiry_id, &self.config.synonyms),
                        Err(e) => {
                            tracing::warn!(agent = %id, attempt, error = %e, "agent request failed");
                            last_error = e;
                        }
                    }
                }
                AgentResponse::failed(id.clone(), case.inquiry_id.clone(), AgentStatus::TransportError, last_error, 0)
            }
        }
    }

    async fn post_completion(&self, endpoint: &str, token: &str, model: &str, prompt: &str) -> Result<String, String> {
        let body = serde_json::json!({
            "model": model,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let response = self
            .http
            .post(endpoint)
            .bearer_auth(token)
            .json(&body)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        let status = response.status();
        let text = response.text().await.map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("http {status}"));
        }
        Ok(completion_text(&text))
    }
}

/// Pulls the assistant message out of common chat-completion response
/// shapes, falling back to the raw body.
pub fn completion_text(body: &str) -> String {
    let Ok(value) = serde_json::from_str::<Value>(body) else {
        return body.to_string();
    };
    let candidates = [
        value.pointer("/choices/0/message/content"),
        value.pointer("/content/0/text"),
        value.pointer("/candidates/0/content/parts/0/text"),
        value.pointer("/message/content"),
    ];
    let text = candidates.into_iter().flatten().find_map(Value::as_str).map(str::to_string);
    text.unwrap_or_else(|| body.to_string())
}

/// Rebuilds a logged reply. Logged ok outputs are re-parsed, so a replay
/// matches what the live run produced.
pub fn replay_response(
    log: &ReplayLog,
    agent: &AgentDescriptor,
    inquiry: &InquiryId,
    synonyms: &SynonymTable,
) -> AgentResponse {
    match log.get(&agent.agent_id, inquiry) {
        None => AgentResponse::failed(agent.agent_id.clone(), inquiry.clone(), AgentStatus::TransportError, REPLAY_MISS, 0),
        Some(record) => {
            let mut response = match record.status {
                AgentStatus::Ok | AgentStatus::Unparseable => {
                    parse_agent_output(&record.raw_output, &agent.agent_id, inquiry, synonyms)
                }
                status => AgentResponse {
                    raw_output: record.raw_output.clone(),
                    ..AgentResponse::failed(agent.agent_id.clone(), inquiry.clone(), status, "replayed failure", 0)
                },
            };
            response.latency_ms = record.latency_ms;
            response
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_common_completion_shapes() {
        assert_eq!(completion_text(r#"{"choices":[{"message":{"role":"assistant","content":"[1]"}}]}"#), "[1]");
        assert_eq!(completion_text(r#"{"content":[{"type":"text","text":"hi"}]}"#), "hi");
        assert_eq!(completion_text(r#"{"candidates":[{"content":{"parts":[{"text":"g"}]}}]}"#), "g");
        assert_eq!(completion_text("plain text"), "plain text");
        assert_eq!(completion_text(r#"{"other":1}"#), r#"{"other":1}"#);
    }
}
