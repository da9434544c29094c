//! Pass@1 scoring of agents and of the consolidated answer over a labeled
//! dataset, the at-least-one coverage ceiling, and report rendering.
//!
//! This module only reduces already-gathered responses; dispatching the
//! cases is the caller's job. Reduction is plain counting merged in dataset
//! order, so the caller may evaluate cases in any order or concurrently.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AgentId, InquiryId};
use crate::label::{Label, SynonymTable};
use crate::meta::{aggregate, Strategy, WeightVector};
use crate::model::{AgentStatus, DispatchResult};

/// Human-physician diagnostic accuracy figures from the clinical literature,
/// printed for context only.
pub const LITERATURE_REFERENCES: [(&str, f64); 4] = [
    ("general medicine physicians, delayed diagnoses counted as failures", 0.18),
    ("general medicine physicians, second estimate", 0.20),
    ("emergency physicians, in-house estimate", 0.41),
    ("emergency department systematic review", 0.43),
];

/// One labeled case of an evaluation dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub inquiry_id: InquiryId,
    pub case_text: String,
    pub confirmed_label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: duplicate case {inquiry_id}")]
    DuplicateCase { line: usize, inquiry_id: InquiryId },
    #[error("dataset is empty")]
    EmptyDataset,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetRecord {
    inquiry_id: String,
    case_text: String,
    confirmed_label: String,
}

/// Parses a newline-delimited dataset of
/// `{inquiry_id, case_text, confirmed_label}` objects. Blank lines are
/// skipped; line numbers in errors are 1-based.
pub fn parse_dataset(text: &str, synonyms: &SynonymTable) -> Result<Vec<EvalCase>, DatasetError> {
    let mut cases = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(line)
            .map_err(|e| DatasetError::Parse { line: line_no, reason: format!("{e}") })?;
        if record.inquiry_id.trim().is_empty() {
            return Err(DatasetError::Parse { line: line_no, reason: "empty inquiry_id".into() });
        }
        if record.case_text.trim().is_empty() {
            return Err(DatasetError::Parse { line: line_no, reason: "empty case_text".into() });
        }
        let confirmed_label = synonyms
            .canonicalize(&record.confirmed_label)
            .map_err(|e| DatasetError::Parse { line: line_no, reason: format!("confirmed_label: {e}") })?;
        let inquiry_id = InquiryId::from(record.inquiry_id);
        if !seen.insert(inquiry_id.clone()) {
            return Err(DatasetError::DuplicateCase { line: line_no, inquiry_id });
        }
        cases.push(EvalCase { inquiry_id, case_text: record.case_text, confirmed_label });
    }
    Ok(cases)
}

/// Exact match of canonical labels; partial overlaps do not count.
pub fn pass_at_1(top1: &Label, confirmed: &Label) -> bool {
    top1.as_str().as_bytes() == confirmed.as_str().as_bytes()
}

/// One captured agent reply, the unit of the replay log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub inquiry_id: InquiryId,
    pub agent_id: AgentId,
    pub raw_output: String,
    pub status: AgentStatus,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayLogError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: duplicate record for agent {agent_id} on {inquiry_id}")]
    Duplicate { line: usize, agent_id: AgentId, inquiry_id: InquiryId },
}

/// Replay records keyed by `(agent_id, inquiry_id)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayLog {
    records: BTreeMap<(AgentId, InquiryId), ReplayRecord>,
}

impl ReplayLog {
    pub fn parse(text: &str) -> Result<Self, ReplayLogError> {
        let mut log = Self::default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: ReplayRecord = serde_json::from_str(line)
                .map_err(|e| ReplayLogError::Parse { line: idx + 1, reason: format!("{e}") })?;
            let key = (record.agent_id.clone(), record.inquiry_id.clone());
            if log.records.contains_key(&key) {
                return Err(ReplayLogError::Duplicate { line: idx + 1, agent_id: key.0, inquiry_id: key.1 });
            }
            log.records.insert(key, record);
        }
        Ok(log)
    }

    pub fn insert(&mut self, record: ReplayRecord) {
        self.records.insert((record.agent_id.clone(), record.inquiry_id.clone()), record);
    }

    pub fn get(&self, agent: &AgentId, inquiry: &InquiryId) -> Option<&ReplayRecord> {
        self.records.get(&(agent.clone(), inquiry.clone()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ReplayRecord> {
        self.records.values()
    }
}

/// What one case contributed to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    /// `None` for agents that did not answer with status ok.
    pub per_agent: Vec<(AgentId, Option<bool>)>,
    /// `None` when no agent answered.
    pub ensemble: Vec<(Strategy, Option<bool>)>,
    pub covered: bool,
}

/// Scores one case. Agents are taken from the dispatch in its order.
pub fn score_case(
    case: &EvalCase,
    dispatch: &DispatchResult,
    weights: &WeightVector,
    strategies: &[Strategy],
) -> CaseOutcome {
    let per_agent: Vec<(AgentId, Option<bool>)> = dispatch
        .responses
        .iter()
        .map(|r| (r.agent_id.clone(), r.top1().map(|t| pass_at_1(t, &case.confirmed_label))))
        .collect();
    let covered = per_agent.iter().any(|(_, hit)| *hit == Some(true));
    let ensemble = strategies
        .iter()
        .map(|&s| (s, aggregate(dispatch, weights, s).ok().map(|c| pass_at_1(&c.top1, &case.confirmed_label))))
        .collect();
    CaseOutcome { per_agent, ensemble, covered }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub correct: u64,
    pub scored: u64,
    pub accuracy: f64,
}

impl Score {
    fn new(correct: u64, scored: u64) -> Self {
        let accuracy = if scored == 0 { 0.0 } else { correct as f64 / scored as f64 };
        Self { correct, scored, accuracy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub case_count: u64,
    /// In agent configuration order.
    pub per_agent: Vec<(AgentId, Score)>,
    pub ensemble: Vec<(Strategy, Score)>,
    pub at_least_one: Score,
    pub weights: WeightVector,
    pub created_at: DateTime<Utc>,
}

impl EvalReport {
    pub fn agent(&self, id: &AgentId) -> Option<&Score> {
        self.per_agent.iter().find(|(a, _)| a == id).map(|(_, s)| s)
    }

    pub fn ensemble(&self, strategy: Strategy) -> Option<&Score> {
        self.ensemble.iter().find(|(s, _)| *s == strategy).map(|(_, s)| s)
    }
}

/// Accumulates [`CaseOutcome`]s into an [`EvalReport`].
///
/// Per-agent denominators count only cases the agent answered; ensemble and
/// coverage denominators count every case.
#[derive(Debug, Clone)]
pub struct EvalTally {
    agents: Vec<AgentId>,
    per_agent: BTreeMap<AgentId, (u64, u64)>,
    ensemble: Vec<(Strategy, u64)>,
    covered: u64,
    cases: u64,
}

impl EvalTally {
    pub fn new(agents: &[AgentId], strategies: &[Strategy]) -> Self {
        Self {
            agents: agents.to_vec(),
            per_agent: agents.iter().map(|a| (a.clone(), (0, 0))).collect(),
            ensemble: strategies.iter().map(|&s| (s, 0)).collect(),
            covered: 0,
            cases: 0,
        }
    }

    pub fn add(&mut self, outcome: &CaseOutcome) {
        self.cases += 1;
        self.covered += u64::from(outcome.covered);
        for (agent, hit) in &outcome.per_agent {
            if let Some(hit) = hit {
                let entry = self.per_agent.entry(agent.clone()).or_insert((0, 0));
                entry.0 += u64::from(*hit);
                entry.1 += 1;
            }
        }
        for (strategy, hit) in &outcome.ensemble {
            if let Some((_, count)) = self.ensemble.iter_mut().find(|(s, _)| s == strategy) {
                *count += u64::from(*hit == Some(true));
            }
        }
    }

    pub fn finish(self, dataset_id: impl Into<String>, weights: WeightVector, created_at: DateTime<Utc>) -> EvalReport {
        let per_agent = self
            .agents
            .iter()
            .map(|a| {
                let (c, n) = self.per_agent.get(a).copied().unwrap_or((0, 0));
                (a.clone(), Score::new(c, n))
            })
            .collect();
        EvalReport {
            dataset_id: dataset_id.into(),
            case_count: self.cases,
            per_agent,
            ensemble: self.ensemble.iter().map(|&(s, c)| (s, Score::new(c, self.cases))).collect(),
            at_least_one: Score::new(self.covered, self.cases),
            weights,
            created_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    JsonLines,
}

impl core::str::FromStr for ReportFormat {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "json-lines" | "jsonl" => Ok(ReportFormat::JsonLines),
            _ => Err(()),
        }
    }
}

pub const CSV_HEADER: &str = "row,kind,correct,scored,accuracy";
pub const COVERAGE_ROW: &str = "at_least_one";

struct Row<'a> {
    name: String,
    kind: &'static str,
    score: &'a Score,
}

fn rows(report: &EvalReport) -> Vec<Row<'_>> {
    let mut rows: Vec<Row<'_>> =
        report.per_agent.iter().map(|(a, s)| Row { name: String::from(a.as_str()), kind: "agent", score: s }).collect();
    rows.extend(report.ensemble.iter().map(|(st, s)| Row { name: String::from(st.as_str()), kind: "ensemble", score: s }));
    rows.push(Row { name: String::from(COVERAGE_ROW), kind: "coverage", score: &report.at_least_one });
    rows
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        String::from(s)
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    row: &'a str,
    kind: &'a str,
    correct: u64,
    scored: u64,
    accuracy: &'a str,
}

#[derive(Serialize)]
struct JsonHeader<'a> {
    dataset_id: &'a str,
    case_count: u64,
    weights: &'a BTreeMap<AgentId, f64>,
}

/// Renders a report. Machine formats exclude the creation timestamp so the
/// same evaluation always produces the same bytes. Every line, including
/// the last, ends in `\n`.
pub fn emit_report(report: &EvalReport, format: ReportFormat, reference_lines: bool) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for row in rows(report) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.4}",
                    csv_field(&row.name),
                    row.kind,
                    row.score.correct,
                    row.score.scored,
                    row.score.accuracy
                );
            }
        }
        ReportFormat::JsonLines => {
            let header = JsonHeader {
                dataset_id: &report.dataset_id,
                case_count: report.case_count,
                weights: &report.weights.weights,
            };
            out.push_str(&serde_json::to_string(&header).expect("header serializes"));
            out.push('\n');
            for row in rows(report) {
                let accuracy = format!("{:.4}", row.score.accuracy);
                let line = JsonRow {
                    row: &row.name,
                    kind: row.kind,
                    correct: row.score.correct,
                    scored: row.score.scored,
                    accuracy: &accuracy,
                };
                out.push_str(&serde_json::to_string(&line).expect("row serializes"));
                out.push('\n');
            }
        }
        ReportFormat::Table => {
            let labelled: Vec<(String, &Score)> = rows(report)
                .into_iter()
                .map(|r| {
                    let name = match r.kind {
                        "ensemble" => format!("super-learner ({})", r.name),
                        "coverage" => String::from("super-learner, at least one agent"),
                        _ => r.name,
                    };
                    (name, r.score)
                })
                .collect();
            let width = labelled.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0).max(10);
            let _ = writeln!(out, "Pass@1 on {} ({} cases)", report.dataset_id, report.case_count);
            let _ = writeln!(out, "{:<width$}  {:>7}  {:>6}  {:>8}", "row", "correct", "scored", "accuracy");
            let _ = writeln!(out, "{}", "-".repeat(width + 27));
            for (name, s) in &labelled {
                let _ = writeln!(out, "{:<width$}  {:>7}  {:>6}  {:>8.4}", name, s.correct, s.scored, s.accuracy);
            }
            if reference_lines {
                let _ = writeln!(out);
                let _ = writeln!(out, "literature values (human physicians, not measured here):");
                for (what, accuracy) in LITERATURE_REFERENCES {
                    let _ = writeln!(out, "  {:.2}  {}", accuracy, what);
                }
            }
        }
    }
    out
}
