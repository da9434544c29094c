//! The advisory service: inquiry lifecycle, journaled state, confirmation
//! feedback and the REST surface.
//!
//! Every state change is first appended to the journal and then applied to
//! the in-memory [`AdvisoryState`] through the same [`AdvisoryState::apply`]
//! used on replay, so a restarted service rebuilds exactly the state the
//! journal describes.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use medas_core::meta::{aggregate, compute_weights, AgentStats, ConsolidatedResponse, StatsLedger, Strategy, WeightVector};
use medas_core::{
    AgentId, AgentStatus, CaseInquiry, ConfirmedDiagnosis, DispatchResult, InquiryId, InquirySource, RubricFeature,
    Urgency,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::RwLock;

use crate::config::{AgentDescriptor, Config};
use crate::dispatch::{dispatch_inquiry, DispatchError};
use crate::gateway::Gateway;
use crate::journal::{Journal, JournalError, JournalEvent};
use crate::snapshot::{WeightRecord, WeightSnapshot};

pub const DISCLAIMER: &str =
    "Advisory only: the final diagnostic and treatment decision rests with the attending physician.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InquiryState {
    Pending,
    Completed,
    Failed,
    Confirmed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InquiryRecord {
    pub case: CaseInquiry,
    pub deadline_ms: u64,
    pub strategy: Strategy,
    pub dispatch: Option<DispatchResult>,
    pub consolidated: Option<ConsolidatedResponse>,
    pub confirmation: Option<ConfirmedDiagnosis>,
    pub failure: Option<String>,
    pub state: InquiryState,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("inquiry {0} already exists")]
    Duplicate(InquiryId),
    #[error("inquiry {0} not found")]
    NotFound(InquiryId),
    #[error("inquiry {id} is {state:?}; cannot apply {event}")]
    InvalidTransition { id: InquiryId, state: InquiryState, event: &'static str },
}

/// Records and tallies, rebuilt from the journal on startup.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvisoryState {
    records: BTreeMap<InquiryId, InquiryRecord>,
    /// Submission order.
    order: Vec<InquiryId>,
    ledger: StatsLedger,
    agents: Vec<AgentId>,
    alpha: f64,
}

impl AdvisoryState {
    pub fn new(agents: Vec<AgentId>, alpha: f64) -> Self {
        Self { records: BTreeMap::new(), order: Vec::new(), ledger: StatsLedger::new(&agents), agents, alpha }
    }

    pub fn from_events<'a>(
        agents: Vec<AgentId>,
        alpha: f64,
        events: impl IntoIterator<Item = &'a JournalEvent>,
    ) -> Result<Self, StateError> {
        let mut state = Self::new(agents, alpha);
        for event in events {
            state.apply(event)?;
        }
        Ok(state)
    }

    pub fn record(&self, id: &InquiryId) -> Option<&InquiryRecord> {
        self.records.get(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &InquiryRecord> {
        self.order.iter().map(|id| &self.records[id])
    }

    pub fn ledger(&self) -> &StatsLedger {
        &self.ledger
    }

    /// Tallies of the configured agents, in configuration order.
    pub fn stats(&self) -> Vec<AgentStats> {
        self.agents
            .iter()
            .map(|a| self.ledger.get(a).cloned().unwrap_or_else(|| AgentStats::new(a.clone())))
            .collect()
    }

    pub fn weights(&self) -> WeightVector {
        compute_weights(&self.stats(), self.alpha).unwrap_or_else(|_| WeightVector::uniform(&self.agents))
    }

    pub fn weight_snapshot(&self) -> WeightSnapshot {
        WeightSnapshot::from_stats(&self.stats(), self.alpha)
            .unwrap_or(WeightSnapshot { alpha: self.alpha, records: Vec::new() })
    }

    fn expect_state(&self, id: &InquiryId, allowed: &[InquiryState], event: &'static str) -> Result<&InquiryRecord, StateError> {
        let record = self.records.get(id).ok_or_else(|| StateError::NotFound(id.clone()))?;
        if allowed.contains(&record.state) {
            Ok(record)
        } else {
            Err(StateError::InvalidTransition { id: id.clone(), state: record.state, event })
        }
    }

    /// Checks whether `event` is a legal next step without changing anything.
    pub fn validate(&self, event: &JournalEvent) -> Result<(), StateError> {
        use InquiryState::*;
        match event {
            JournalEvent::InquirySubmitted { case, .. } => {
                if self.records.contains_key(&case.inquiry_id) {
                    return Err(StateError::Duplicate(case.inquiry_id.clone()));
                }
            }
            JournalEvent::DispatchCompleted { dispatch } => {
                let r = self.expect_state(&dispatch.inquiry_id, &[Pending], "dispatch_completed")?;
                if r.dispatch.is_some() {
                    return Err(StateError::InvalidTransition {
                        id: dispatch.inquiry_id.clone(),
                        state: r.state,
                        event: "dispatch_completed",
                    });
                }
            }
            JournalEvent::DispatchFailed { inquiry_id, .. } => {
                self.expect_state(inquiry_id, &[Pending], "dispatch_failed")?;
            }
            JournalEvent::Consolidated { consolidated } => {
                let id = &consolidated.inquiry_id;
                let r = self.expect_state(id, &[Pending], "consolidated")?;
                if r.dispatch.is_none() {
                    return Err(StateError::InvalidTransition { id: id.clone(), state: r.state, event: "consolidated" });
                }
            }
            JournalEvent::Confirmed { confirmation } => {
                self.expect_state(&confirmation.inquiry_id, &[Completed, Confirmed], "confirmed")?;
            }
            JournalEvent::WeightsUpdated { .. } => {}
        }
        Ok(())
    }

    /// Applies one event, leaving the state untouched if it is not legal.
    pub fn apply(&mut self, event: &JournalEvent) -> Result<(), StateError> {
        self.validate(event)?;
        match event {
            JournalEvent::InquirySubmitted { case, deadline_ms, strategy } => {
                self.order.push(case.inquiry_id.clone());
                self.records.insert(
                    case.inquiry_id.clone(),
                    InquiryRecord {
                        case: case.clone(),
                        deadline_ms: *deadline_ms,
                        strategy: *strategy,
                        dispatch: None,
                        consolidated: None,
                        confirmation: None,
                        failure: None,
                        state: InquiryState::Pending,
                    },
                );
            }
            JournalEvent::DispatchCompleted { dispatch } => {
                let r = self.records.get_mut(&dispatch.inquiry_id).expect("validated");
                r.dispatch = Some(dispatch.clone());
            }
            JournalEvent::DispatchFailed { inquiry_id, reason, dispatch } => {
                let r = self.records.get_mut(inquiry_id).expect("validated");
                if dispatch.is_some() {
                    r.dispatch = dispatch.clone();
                }
                r.failure = Some(reason.clone());
                r.state = InquiryState::Failed;
            }
            JournalEvent::Consolidated { consolidated } => {
                let r = self.records.get_mut(&consolidated.inquiry_id).expect("validated");
                r.consolidated = Some(consolidated.clone());
                r.state = InquiryState::Completed;
            }
            JournalEvent::Confirmed { confirmation } => {
                let r = self.records.get_mut(&confirmation.inquiry_id).expect("validated");
                let dispatch = r.dispatch.as_ref().expect("completed implies dispatched");
                self.ledger
                    .record_confirmation(dispatch, confirmation)
                    .expect("dispatch and confirmation share the inquiry id");
                r.confirmation = Some(confirmation.clone());
                r.state = InquiryState::Confirmed;
            }
            JournalEvent::WeightsUpdated { stats, .. } => {
                let current = self.stats();
                if &current != stats {
                    tracing::warn!("journaled weights snapshot differs from recomputed tallies");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    Validation(String),
    #[error("inquiry {0} not found")]
    NotFound(InquiryId),
    #[error("{0}")]
    Conflict(String),
    #[error("missing or wrong API token")]
    Unauthorized,
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error(transparent)]
    State(StateError),
}

impl From<StateError> for ServiceError {
    fn from(e: StateError) -> Self {
        match e {
            StateError::NotFound(id) => ServiceError::NotFound(id),
            e @ StateError::InvalidTransition { .. } => ServiceError::Conflict(e.to_string()),
            e => ServiceError::State(e),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Journal(_) | ServiceError::State(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct SubmitOptions {
    pub deadline_ms: Option<u64>,
    pub strategy: Option<Strategy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentialRow {
    pub label: String,
    pub score: f64,
    pub urgency: Urgency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRow {
    pub label: String,
    pub probability: f64,
    pub urgency: Urgency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRow {
    pub agent_id: AgentId,
    pub status: AgentStatus,
    pub latency_ms: u64,
    pub top1: Option<String>,
    pub hypotheses: Vec<HypothesisRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Response body of `GET /api/v1/inquiries/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InquiryView {
    pub inquiry_id: InquiryId,
    pub state: InquiryState,
    pub created_at: DateTime<Utc>,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub differential: Option<Vec<DifferentialRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_agent: Option<Vec<AgentRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<AgentId, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub responders: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirmed_label: Option<String>,
    pub disclaimer: String,
}

impl InquiryView {
    pub fn from_record(record: &InquiryRecord) -> Self {
        let per_agent = record.dispatch.as_ref().map(|d| {
            d.responses
                .iter()
                .map(|r| AgentRow {
                    agent_id: r.agent_id.clone(),
                    status: r.status,
                    latency_ms: r.latency_ms,
                    top1: r.top1().map(|l| l.to_string()),
                    hypotheses: r
                        .hypotheses
                        .iter()
                        .map(|h| HypothesisRow { label: h.label.to_string(), probability: h.probability, urgency: h.urgency })
                        .collect(),
                    reason: r.reason.clone(),
                })
                .collect()
        });
        let consolidated = record.consolidated.as_ref();
        Self {
            inquiry_id: record.case.inquiry_id.clone(),
            state: record.state,
            created_at: record.case.created_at,
            strategy: record.strategy,
            top1: consolidated.map(|c| c.top1.to_string()),
            differential: consolidated.map(|c| {
                c.differential
                    .iter()
                    .map(|e| DifferentialRow { label: e.label.to_string(), score: e.score, urgency: e.urgency })
                    .collect()
            }),
            per_agent,
            weights: consolidated.map(|c| c.weight_snapshot.weights.clone()),
            responders: consolidated.map(|c| c.responders),
            failure: record.failure.clone(),
            confirmed_label: record.confirmation.as_ref().map(|c| c.label.to_string()),
            disclaimer: DISCLAIMER.to_string(),
        }
    }
}

/// Response body of `GET /api/v1/weights` and of a confirmation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsView {
    pub alpha: f64,
    pub agents: Vec<WeightRecord>,
}

impl From<WeightSnapshot> for WeightsView {
    fn from(s: WeightSnapshot) -> Self {
        Self { alpha: s.alpha, agents: s.records }
    }
}

pub struct AdvisoryService {
    gateway: Arc<Gateway>,
    journal: Journal,
    state: RwLock<AdvisoryState>,
    api_token: Option<String>,
}

impl AdvisoryService {
    /// Opens the journal, replays it and returns the service. Call
    /// [`AdvisoryService::resume_pending`] to finish inquiries that were in
    /// flight at the last shutdown.
    pub fn open(config: Arc<Config>, journal_path: &Path) -> Result<Arc<Self>, ServiceError> {
        let (journal, replayed) = Journal::open(journal_path)?;
        let state = AdvisoryState::from_events(
            config.agent_ids(),
            config.smoothing,
            replayed.entries.iter().map(|e| &e.event),
        )
        .map_err(|e| {
            ServiceError::Journal(JournalError::Corrupt { offset: replayed.valid_len, reason: e.to_string() })
        })?;
        let api_token = config
            .api_token_env
            .as_ref()
            .and_then(|name| std::env::var(name).ok())
            .filter(|t| !t.is_empty());
        Ok(Arc::new(Self { gateway: Arc::new(Gateway::new(config)), journal, state: RwLock::new(state), api_token }))
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub async fn state(&self) -> tokio::sync::RwLockReadGuard<'_, AdvisoryState> {
        self.state.read().await
    }

    async fn commit(&self, events: Vec<JournalEvent>) -> Result<(), ServiceError> {
        let mut state = self.state.write().await;
        let mut staged = state.clone();
        for event in &events {
            staged.apply(event)?;
        }
        for event in events {
            self.journal.append(event)?;
        }
        *state = staged;
        Ok(())
    }

    /// Journals a new pending inquiry and returns its id. Processing is
    /// started separately with [`AdvisoryService::spawn_processing`].
    pub async fn submit(&self, text: &str, options: SubmitOptions) -> Result<InquiryId, ServiceError> {
        let id = InquiryId::from(uuid::Uuid::new_v4().to_string());
        let case = CaseInquiry::new(id.clone(), text, Utc::now(), InquirySource::Api)
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        let deadline_ms = options.deadline_ms.unwrap_or(self.gateway.config().deadline_ms);
        if deadline_ms == 0 {
            return Err(ServiceError::Validation("deadline_ms must be positive".into()));
        }
        let strategy = options.strategy.unwrap_or(self.gateway.config().default_strategy);
        self.commit(vec![JournalEvent::InquirySubmitted { case, deadline_ms, strategy }]).await?;
        Ok(id)
    }

    pub fn spawn_processing(self: &Arc<Self>, id: InquiryId) {
        let service = self.clone();
        tokio::spawn(async move {
            if let Err(e) = service.process(&id).await {
                tracing::error!(inquiry = %id, error = %e, "processing failed");
            }
        });
    }

    /// Dispatches (unless already dispatched) and consolidates one pending
    /// inquiry, using the weights current when processing starts.
    pub async fn process(&self, id: &InquiryId) -> Result<(), ServiceError> {
        let (case, deadline_ms, strategy, dispatched, weights) = {
            let state = self.state.read().await;
            let r = state.record(id).ok_or_else(|| ServiceError::NotFound(id.clone()))?;
            if r.state != InquiryState::Pending {
                return Ok(());
            }
            (r.case.clone(), r.deadline_ms, r.strategy, r.dispatch.clone(), state.weights())
        };
        let dispatch = match dispatched {
            Some(d) => d,
            None => match dispatch_inquiry(&self.gateway, &case, None, deadline_ms).await {
                Ok(d) => {
                    self.commit(vec![JournalEvent::DispatchCompleted { dispatch: d.clone() }]).await?;
                    d
                }
                Err(e) => {
                    let dispatch = match &e {
                        DispatchError::AllAgentsFailed(d) => Some((**d).clone()),
                        _ => None,
                    };
                    let reason = e.to_string();
                    self.commit(vec![JournalEvent::DispatchFailed { inquiry_id: id.clone(), reason, dispatch }]).await?;
                    return Ok(());
                }
            },
        };
        let event = match aggregate(&dispatch, &weights, strategy) {
            Ok(consolidated) => JournalEvent::Consolidated { consolidated },
            Err(e) => JournalEvent::DispatchFailed { inquiry_id: id.clone(), reason: e.to_string(), dispatch: None },
        };
        self.commit(vec![event]).await
    }

    /// Restarts processing for every inquiry still pending.
    pub async fn resume_pending(self: &Arc<Self>) -> usize {
        let pending: Vec<InquiryId> = self
            .state
            .read()
            .await
            .records()
            .filter(|r| r.state == InquiryState::Pending)
            .map(|r| r.case.inquiry_id.clone())
            .collect();
        for id in &pending {
            self.spawn_processing(id.clone());
        }
        pending.len()
    }

    pub async fn view(&self, id: &InquiryId) -> Result<InquiryView, ServiceError> {
        let state = self.state.read().await;
        state.record(id).map(InquiryView::from_record).ok_or_else(|| ServiceError::NotFound(id.clone()))
    }

    pub async fn confirm(
        &self,
        id: &InquiryId,
        label: &str,
        confirmed_by: &str,
        rubric: Option<BTreeMap<RubricFeature, f64>>,
    ) -> Result<WeightsView, ServiceError> {
        let label = self.gateway.synonyms().canonicalize(label).map_err(|e| ServiceError::Validation(e.to_string()))?;
        let confirmation = ConfirmedDiagnosis::new(id.clone(), label, confirmed_by, Utc::now(), rubric)
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        let mut state = self.state.write().await;
        let mut staged = state.clone();
        let confirmed = JournalEvent::Confirmed { confirmation };
        staged.apply(&confirmed)?;
        let updated = JournalEvent::WeightsUpdated { stats: staged.stats(), weights: staged.weights() };
        staged.apply(&updated)?;
        self.journal.append(confirmed)?;
        self.journal.append(updated)?;
        *state = staged;
        Ok(state.weight_snapshot().into())
    }

    pub async fn weights_view(&self) -> WeightsView {
        self.state.read().await.weight_snapshot().into()
    }

    pub fn agents(&self) -> &[AgentDescriptor] {
        self.gateway.agents()
    }
}

#[derive(Debug, Deserialize)]
struct SubmitBody {
    text: String,
    #[serde(default)]
    deadline_ms: Option<u64>,
    #[serde(default)]
    strategy: Option<Strategy>,
}

#[derive(Debug, Deserialize)]
struct ConfirmBody {
    label: String,
    confirmed_by: String,
    #[serde(default)]
    rubric: Option<BTreeMap<RubricFeature, f64>>,
}

type Shared = Arc<AdvisoryService>;

fn parse_body<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::Validation(format!("invalid request body: {e}")))
}

async fn submit_handler(State(service): State<Shared>, body: axum::body::Bytes) -> Result<Response, ServiceError> {
    let body: SubmitBody = parse_body(&body)?;
    let id = service
        .submit(&body.text, SubmitOptions { deadline_ms: body.deadline_ms, strategy: body.strategy })
        .await?;
    service.spawn_processing(id.clone());
    Ok((StatusCode::ACCEPTED, Json(serde_json::json!({ "inquiry_id": id }))).into_response())
}

async fn get_handler(State(service): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<InquiryView>, ServiceError> {
    Ok(Json(service.view(&InquiryId::from(id)).await?))
}

async fn confirm_handler(
    State(service): State<Shared>,
    UrlPath(id): UrlPath<String>,
    body: axum::body::Bytes,
) -> Result<Json<serde_json::Value>, ServiceError> {
    let body: ConfirmBody = parse_body(&body)?;
    let weights = service.confirm(&InquiryId::from(id), &body.label, &body.confirmed_by, body.rubric).await?;
    Ok(Json(serde_json::json!({ "weights": weights })))
}

async fn weights_handler(State(service): State<Shared>) -> Json<WeightsView> {
    Json(service.weights_view().await)
}

async fn agents_handler(State(service): State<Shared>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "agents": service.agents() }))
}

async fn health_handler() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn require_token(State(service): State<Shared>, request: Request, next: Next) -> Response {
    if let Some(expected) = &service.api_token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(expected.as_str()) {
            return ServiceError::Unauthorized.into_response();
        }
    }
    next.run(request).await
}

pub fn router(service: Shared) -> Router {
    let protected = Router::new()
        .route("/api/v1/inquiries", post(submit_handler))
        .route("/api/v1/inquiries/{id}", get(get_handler))
        .route("/api/v1/inquiries/{id}/confirmation", post(confirm_handler))
        .route("/api/v1/weights", get(weights_handler))
        .route("/api/v1/agents", get(agents_handler))
        .route_layer(middleware::from_fn_with_state(service.clone(), require_token));
    Router::new()
        .route("/api/v1/health", get(health_handler))
        .merge(protected)
        .with_state(service)
}

/// Serves the API on `listener` until `shutdown` resolves.
pub async fn serve(
    service: Shared,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let resumed = service.resume_pending().await;
    if resumed > 0 {
        tracing::info!(resumed, "resumed pending inquiries");
    }
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}
