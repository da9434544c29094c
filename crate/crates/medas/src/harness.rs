//! Replay-based evaluation over labeled datasets.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use medas_core::eval::{parse_dataset, score_case, DatasetError, EvalCase, EvalReport, EvalTally, ReplayRecord};
use medas_core::meta::{StatsLedger, Strategy, WeightVector};
use medas_core::{CaseInquiry, ConfirmedDiagnosis, DispatchResult, InquirySource, MetaError, SynonymTable};
use thiserror::Error;

use crate::dispatch::{dispatch_inquiry, DispatchError};
use crate::gateway::Gateway;
use crate::snapshot::{SnapshotError, WeightSnapshot};

/// Cases dispatched at the same time during an evaluation run.
pub const CASE_CONCURRENCY: usize = 8;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Dataset { path: PathBuf, source: DatasetError },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error("weights file has no entry for agent {0}")]
    MissingWeight(String),
}

pub fn load_dataset(path: &Path, synonyms: &SynonymTable) -> Result<Vec<EvalCase>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })?;
    parse_dataset(&text, synonyms).map_err(|source| HarnessError::Dataset { path: path.into(), source })
}

/// File name without extension, used as the report's dataset id.
pub fn dataset_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Uniform,
    /// Smoothed accuracies measured on the evaluated dataset itself.
    Learned,
    File(PathBuf),
    Given(WeightVector),
}

fn eval_inquiry(case: &EvalCase) -> CaseInquiry {
    CaseInquiry {
        inquiry_id: case.inquiry_id.clone(),
        text: case.case_text.clone(),
        created_at: DateTime::<Utc>::UNIX_EPOCH,
        source: InquirySource::EvalReplay,
    }
}

/// Dispatches every case with its label attached as ground truth. Results
/// are in dataset order; cases where every agent failed keep their
/// per-agent statuses.
pub async fn gather(gateway: &Gateway, cases: &[EvalCase], deadline_ms: u64) -> Result<Vec<DispatchResult>, HarnessError> {
    let results: Vec<Result<DispatchResult, DispatchError>> = stream::iter(cases)
        .map(|case| async move {
            let inquiry = eval_inquiry(case);
            dispatch_inquiry(gateway, &inquiry, Some(&case.confirmed_label), deadline_ms).await
        })
        .buffered(CASE_CONCURRENCY)
        .collect()
        .await;
    results
        .into_iter()
        .map(|r| match r {
            Ok(d) => Ok(d),
            Err(DispatchError::AllAgentsFailed(d)) => Ok(*d),
            Err(e) => Err(HarnessError::Dispatch(e)),
        })
        .collect()
}

/// Tallies every dispatched case against its confirmed label.
pub fn learn_stats(gateway: &Gateway, cases: &[EvalCase], dispatches: &[DispatchResult]) -> Result<StatsLedger, HarnessError> {
    let agents = gateway.config().agent_ids();
    let mut ledger = StatsLedger::new(&agents);
    for (case, dispatch) in cases.iter().zip(dispatches) {
        let confirmed = ConfirmedDiagnosis {
            inquiry_id: case.inquiry_id.clone(),
            label: case.confirmed_label.clone(),
            confirmed_by: "dataset".into(),
            confirmed_at: DateTime::<Utc>::UNIX_EPOCH,
            rubric: None,
        };
        ledger.record_confirmation(dispatch, &confirmed)?;
    }
    Ok(ledger)
}

fn resolve_weights(
    gateway: &Gateway,
    source: &WeightSource,
    cases: &[EvalCase],
    dispatches: &[DispatchResult],
) -> Result<WeightVector, HarnessError> {
    let agents = gateway.config().agent_ids();
    match source {
        WeightSource::Uniform => Ok(WeightVector::uniform(&agents)),
        WeightSource::Given(w) => Ok(w.clone()),
        WeightSource::Learned => Ok(learn_stats(gateway, cases, dispatches)?.weights(gateway.config().smoothing)?),
        WeightSource::File(path) => {
            let weights = WeightSnapshot::read(path)?.weight_vector();
            if let Some(missing) = agents.iter().find(|a| weights.get(a).is_none()) {
                return Err(HarnessError::MissingWeight(missing.to_string()));
            }
            Ok(weights)
        }
    }
}

/// Evaluates per-agent Pass@1, consolidated Pass@1 for each strategy, and
/// at-least-one coverage.
pub async fn run_eval(
    gateway: &Gateway,
    cases: &[EvalCase],
    weights: &WeightSource,
    strategies: &[Strategy],
    dataset_id: &str,
) -> Result<EvalReport, HarnessError> {
    if cases.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    let dispatches = gather(gateway, cases, gateway.config().deadline_ms).await?;
    let weights = resolve_weights(gateway, weights, cases, &dispatches)?;
    let agents = gateway.config().agent_ids();
    let mut tally = EvalTally::new(&agents, strategies);
    for (case, dispatch) in cases.iter().zip(&dispatches) {
        tally.add(&score_case(case, dispatch, &weights, strategies));
    }
    Ok(tally.finish(dataset_id, weights, Utc::now()))
}

/// Captures one replay record per (case, agent).
pub async fn record(gateway: &Gateway, cases: &[EvalCase]) -> Result<Vec<ReplayRecord>, HarnessError> {
    if cases.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    let dispatches = gather(gateway, cases, gateway.config().deadline_ms).await?;
    Ok(dispatches
        .into_iter()
        .flat_map(|d| d.responses)
        .map(|r| ReplayRecord {
            inquiry_id: r.inquiry_id,
            agent_id: r.agent_id,
            raw_output: r.raw_output,
            status: r.status,
            latency_ms: r.latency_ms,
        })
        .collect())
}

pub fn write_replay_log(path: &Path, records: &[ReplayRecord]) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io { path: path.into(), source };
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("replay record serializes");
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(io)?;
    file.write_all(&out).map_err(io)?;
    file.sync_all().map_err(io)
}
