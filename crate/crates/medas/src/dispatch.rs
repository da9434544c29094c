//! Parallel fan-out of one inquiry to every configured agent.

use std::time::Duration;

use chrono::Utc;
use futures::future::join_all;
use medas_core::{AgentId, AgentStatus, CaseInquiry, DispatchResult, Label};
use thiserror::Error;

use crate::gateway::Gateway;

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("no agents configured")]
    NoAgentsConfigured,
    #[error("deadline must be positive")]
    InvalidDeadline,
    #[error("all agents failed: {}", summary(.0))]
    AllAgentsFailed(Box<DispatchResult>),
}

fn summary(result: &DispatchResult) -> String {
    result
        .responses
        .iter()
        .map(|r| format!("{}={}", r.agent_id, r.status))
        .collect::<Vec<_>>()
        .join(", ")
}

impl DispatchError {
    pub fn statuses(&self) -> Vec<(AgentId, AgentStatus)> {
        match self {
            DispatchError::AllAgentsFailed(result) => result.statuses(),
            _ => Vec::new(),
        }
    }
}

/// Sends the case to every agent at once and waits for all of them, each
/// bounded by `min(agent timeout, deadline)`. Responses come back in
/// configuration order whatever order they complete in.
pub async fn dispatch_inquiry(
    gateway: &Gateway,
    case: &CaseInquiry,
    ground_truth: Option<&Label>,
    deadline_ms: u64,
) -> Result<DispatchResult, DispatchError> {
    if gateway.agents().is_empty() {
        return Err(DispatchError::NoAgentsConfigured);
    }
    if deadline_ms == 0 {
        return Err(DispatchError::InvalidDeadline);
    }
    let budget = Duration::from_millis(deadline_ms);
    let started_at = Utc::now();
    let calls = gateway.agents().iter().map(|agent| gateway.invoke(agent, case, ground_truth, budget));
    let responses = join_all(calls).await;
    let result = DispatchResult {
        inquiry_id: case.inquiry_id.clone(),
        responses,
        started_at,
        finished_at: Utc::now(),
        deadline_ms,
    };
    if result.ok_count() == 0 {
        return Err(DispatchError::AllAgentsFailed(Box::new(result)));
    }
    Ok(result)
}
