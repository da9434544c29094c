//! The meta-learner: accuracy-derived agent weights and consolidation of the
//! gathered responses into one ranked differential.
//!
//! Weights are Laplace-smoothed Pass@1 accuracies, normalized to sum to one:
//! `raw_i = (c_i + α) / (n_i + 2α)`, `w_i = raw_i / Σ raw`.
//!
//! Two consolidation strategies are offered. [`Strategy::Top1WeightedVote`]
//! lets every responding agent cast its weight for its own top-1 label;
//! [`Strategy::WeightedProbSum`] fuses the full probability lists.
//!
//! Scores that differ by no more than [`TIE_TOLERANCE`] times the responders'
//! total weight are treated as tied. The tolerance scales with the weights,
//! so multiplying every weight by a positive constant never changes an
//! ordering.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::MetaError;
use crate::ids::{AgentId, InquiryId};
use crate::label::Label;
use crate::model::{ConfirmedDiagnosis, DispatchResult, Urgency};

pub const DEFAULT_SMOOTHING: f64 = 1.0;

/// Relative tolerance under which two aggregated scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Confirmation tallies for one agent. Invariant: `correct <= scored`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStats {
    pub agent_id: AgentId,
    #[serde(rename = "c")]
    pub correct: u64,
    #[serde(rename = "n")]
    pub scored: u64,
}

impl AgentStats {
    pub fn new(agent_id: AgentId) -> Self {
        Self { agent_id, correct: 0, scored: 0 }
    }

    pub fn smoothed_accuracy(&self, alpha: f64) -> f64 {
        (self.correct as f64 + alpha) / (self.scored as f64 + 2.0 * alpha)
    }
}

/// Per-agent voting weights.
///
/// Weights produced by [`compute_weights`] sum to one. The aggregation
/// functions only require every weight to be positive and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: BTreeMap<AgentId, f64>,
    pub alpha: f64,
}

impl WeightVector {
    /// Equal weights `1/N`, the cold-start state for any α.
    pub fn uniform<'a>(agents: impl IntoIterator<Item = &'a AgentId>) -> Self {
        let ids: Vec<&AgentId> = agents.into_iter().collect();
        let w = 1.0 / ids.len().max(1) as f64;
        Self { weights: ids.into_iter().map(|id| (id.clone(), w)).collect(), alpha: DEFAULT_SMOOTHING }
    }

    pub fn get(&self, agent: &AgentId) -> Option<f64> {
        self.weights.get(agent).copied()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Every weight multiplied by `factor`; the result is not normalized.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|(id, w)| (id.clone(), w * factor)).collect(),
            alpha: self.alpha,
        }
    }
}

pub fn compute_weights<'a>(
    stats: impl IntoIterator<Item = &'a AgentStats>,
    alpha: f64,
) -> Result<WeightVector, MetaError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(MetaError::InvalidSmoothing(alpha));
    }
    let raw: Vec<(AgentId, f64)> = stats.into_iter().map(|s| (s.agent_id.clone(), s.smoothed_accuracy(alpha))).collect();
    if raw.is_empty() {
        return Err(MetaError::NoAgents);
    }
    let total: f64 = raw.iter().map(|(_, r)| r).sum();
    Ok(WeightVector { weights: raw.into_iter().map(|(id, r)| (id, r / total)).collect(), alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Top1WeightedVote,
    WeightedProbSum,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::Top1WeightedVote, Strategy::WeightedProbSum];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Top1WeightedVote => "top1_weighted_vote",
            Strategy::WeightedProbSum => "weighted_prob_sum",
        }
    }
}

impl core::str::FromStr for Strategy {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL.into_iter().find(|st| st.as_str() == s).ok_or(())
    }
}

impl core::fmt::Display for Strategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentialEntry {
    pub label: Label,
    pub score: f64,
    pub urgency: Urgency,
}

/// The super-learner's combined answer for one inquiry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsolidatedResponse {
    pub inquiry_id: InquiryId,
    pub strategy: Strategy,
    pub differential: Vec<DifferentialEntry>,
    pub top1: Label,
    pub per_agent_top1: BTreeMap<AgentId, Option<Label>>,
    pub weight_snapshot: WeightVector,
    pub responders: usize,
}

#[derive(Default)]
struct Tally {
    /// Σ w_i over agents whose top-1 is this label.
    vote: f64,
    /// Σ w_i · p_i(label) over agents listing this label.
    mass: f64,
    urgency: Option<Urgency>,
}

struct Ballot {
    labels: BTreeMap<Label, Tally>,
    total_weight: f64,
    responders: usize,
}

fn collect_ballot(dispatch: &DispatchResult, weights: &WeightVector) -> Result<Ballot, MetaError> {
    let mut labels: BTreeMap<Label, Tally> = BTreeMap::new();
    let mut total_weight = 0.0;
    let mut responders = 0;
    for response in dispatch.ok_responses() {
        let w = weights.get(&response.agent_id).ok_or_else(|| MetaError::UnknownAgent(response.agent_id.clone()))?;
        if !(w.is_finite() && w > 0.0) {
            return Err(MetaError::UnknownAgent(response.agent_id.clone()));
        }
        total_weight += w;
        responders += 1;
        for (rank, h) in response.hypotheses.iter().enumerate() {
            let tally = labels.entry(h.label.clone()).or_default();
            if rank == 0 {
                tally.vote += w;
            }
            tally.mass += w * h.probability;
            tally.urgency = Some(tally.urgency.map_or(h.urgency, |u| u.max(h.urgency)));
        }
    }
    if responders == 0 {
        return Err(MetaError::AllAgentsFailed { statuses: dispatch.statuses() });
    }
    Ok(Ballot { labels, total_weight, responders })
}

/// Rank of each value's tie class, 0 for the highest. Values are walked in
/// descending order; a gap larger than `tolerance` opens a new class.
fn tie_classes(values: &[f64], tolerance: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut classes = alloc::vec![0; values.len()];
    let mut class = 0;
    for pair in order.windows(2) {
        if values[pair[0]] - values[pair[1]] > tolerance {
            class += 1;
        }
        classes[pair[1]] = class;
    }
    classes
}

fn ranked(
    dispatch: &DispatchResult,
    weights: &WeightVector,
    strategy: Strategy,
    entries: Vec<(Label, f64, Urgency)>,
    keys: &[Vec<usize>],
) -> ConsolidatedResponse {
    let mut idx: Vec<usize> = (0..entries.len()).collect();
    idx.sort_by(|&a, &b| {
        keys.iter()
            .map(|k| k[a].cmp(&k[b]))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or_else(|| entries[a].0.cmp(&entries[b].0))
    });
    let total: f64 = entries.iter().map(|e| e.1).sum();
    let uniform = 1.0 / entries.len() as f64;
    let differential: Vec<DifferentialEntry> = idx
        .into_iter()
        .map(|i| {
            let (label, score, urgency) = entries[i].clone();
            let score = if total > 0.0 { score / total } else { uniform };
            DifferentialEntry { label, score, urgency }
        })
        .collect();
    let per_agent_top1 = dispatch.responses.iter().map(|r| (r.agent_id.clone(), r.top1().cloned())).collect();
    ConsolidatedResponse {
        inquiry_id: dispatch.inquiry_id.clone(),
        strategy,
        top1: differential[0].label.clone(),
        differential,
        per_agent_top1,
        weight_snapshot: weights.clone(),
        responders: dispatch.ok_count(),
    }
}

/// Weighted plurality over the responders' top-1 labels.
///
/// Ordering: vote weight, then `Σ w·p` over all responders listing the
/// label, then the label itself. Only labels that received a vote appear in
/// the differential; their scores are the votes renormalized to sum to one.
pub fn aggregate_top1_vote(dispatch: &DispatchResult, weights: &WeightVector) -> Result<ConsolidatedResponse, MetaError> {
    let ballot = collect_ballot(dispatch, weights)?;
    let tolerance = TIE_TOLERANCE * ballot.total_weight;
    let voted: Vec<(Label, &Tally)> = ballot.labels.iter().filter(|(_, t)| t.vote > 0.0).map(|(l, t)| (l.clone(), t)).collect();
    let votes: Vec<f64> = voted.iter().map(|(_, t)| t.vote).collect();
    let masses: Vec<f64> = voted.iter().map(|(_, t)| t.mass).collect();
    let keys = [tie_classes(&votes, tolerance), tie_classes(&masses, tolerance)];
    let entries = voted
        .into_iter()
        .map(|(label, t)| (label, t.vote, t.urgency.unwrap_or(Urgency::Routine)))
        .collect();
    debug_assert!(ballot.responders > 0);
    Ok(ranked(dispatch, weights, Strategy::Top1WeightedVote, entries, &keys))
}

/// Weighted sum of every listed probability, renormalized over all labels.
/// If every listed probability is zero the labels share the mass equally.
pub fn aggregate_prob_sum(dispatch: &DispatchResult, weights: &WeightVector) -> Result<ConsolidatedResponse, MetaError> {
    let ballot = collect_ballot(dispatch, weights)?;
    let tolerance = TIE_TOLERANCE * ballot.total_weight;
    let masses: Vec<f64> = ballot.labels.values().map(|t| t.mass).collect();
    let keys = [tie_classes(&masses, tolerance)];
    let entries = ballot
        .labels
        .into_iter()
        .map(|(label, t)| (label, t.mass, t.urgency.unwrap_or(Urgency::Routine)))
        .collect();
    Ok(ranked(dispatch, weights, Strategy::WeightedProbSum, entries, &keys))
}

pub fn aggregate(
    dispatch: &DispatchResult,
    weights: &WeightVector,
    strategy: Strategy,
) -> Result<ConsolidatedResponse, MetaError> {
    match strategy {
        Strategy::Top1WeightedVote => aggregate_top1_vote(dispatch, weights),
        Strategy::WeightedProbSum => aggregate_prob_sum(dispatch, weights),
    }
}

/// Per-agent tallies plus the contribution each confirmed inquiry made to
/// them, so a re-confirmation can be rolled back exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsLedger {
    stats: BTreeMap<AgentId, AgentStats>,
    applied: BTreeMap<InquiryId, Vec<(AgentId, bool)>>,
}

impl StatsLedger {
    pub fn new<'a>(agents: impl IntoIterator<Item = &'a AgentId>) -> Self {
        let mut ledger = Self::default();
        for id in agents {
            ledger.ensure_agent(id);
        }
        ledger
    }

    pub fn ensure_agent(&mut self, agent: &AgentId) {
        self.stats.entry(agent.clone()).or_insert_with(|| AgentStats::new(agent.clone()));
    }

    pub fn stats(&self) -> impl Iterator<Item = &AgentStats> {
        self.stats.values()
    }

    pub fn get(&self, agent: &AgentId) -> Option<&AgentStats> {
        self.stats.get(agent)
    }

    pub fn confirmed_inquiries(&self) -> usize {
        self.applied.len()
    }

    pub fn weights(&self, alpha: f64) -> Result<WeightVector, MetaError> {
        compute_weights(self.stats.values(), alpha)
    }

    /// Scores every ok responder's top-1 against the confirmed label.
    /// A prior confirmation of the same inquiry is rolled back first.
    pub fn record_confirmation(
        &mut self,
        dispatch: &DispatchResult,
        confirmed: &ConfirmedDiagnosis,
    ) -> Result<(), MetaError> {
        if dispatch.inquiry_id != confirmed.inquiry_id {
            return Err(MetaError::NotFound(confirmed.inquiry_id.clone()));
        }
        if let Some(previous) = self.applied.remove(&confirmed.inquiry_id) {
            for (agent, correct) in previous {
                if let Some(s) = self.stats.get_mut(&agent) {
                    s.scored -= 1;
                    s.correct -= u64::from(correct);
                }
            }
        }
        let mut contribution = Vec::new();
        for response in dispatch.ok_responses() {
            let correct = response.top1() == Some(&confirmed.label);
            self.ensure_agent(&response.agent_id);
            let s = self.stats.get_mut(&response.agent_id).expect("agent just ensured");
            s.scored += 1;
            s.correct += u64::from(correct);
            contribution.push((response.agent_id.clone(), correct));
        }
        self.applied.insert(confirmed.inquiry_id.clone(), contribution);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::{canonicalize_label, SynonymTable};
    use crate::model::{AgentResponse, AgentStatus, DiagnosisHypothesis};
    use alloc::string::String;
    use alloc::vec;
    use chrono::DateTime;

    fn label(s: &str) -> Label {
        canonicalize_label(s).unwrap()
    }

    fn ok(agent: &str, hyps: &[(&str, f64)]) -> AgentResponse {
        AgentResponse {
            agent_id: agent.into(),
            inquiry_id: "q".into(),
            hypotheses: hyps
                .iter()
                .map(|(l, p)| DiagnosisHypothesis::from_raw(*l, *p, Urgency::Urgent, &SynonymTable::empty()).unwrap())
                .collect(),
            status: AgentStatus::Ok,
            latency_ms: 1,
            raw_output: String::new(),
            reason: None,
        }
    }

    fn dispatch(responses: Vec<AgentResponse>) -> DispatchResult {
        let t = DateTime::from_timestamp(0, 0).unwrap();
        DispatchResult { inquiry_id: "q".into(), responses, started_at: t, finished_at: t, deadline_ms: 1000 }
    }

    fn weights(pairs: &[(&str, f64)]) -> WeightVector {
        WeightVector { weights: pairs.iter().map(|(a, w)| (AgentId::from(*a), *w)).collect(), alpha: 1.0 }
    }

    fn stats(agent: &str, c: u64, n: u64) -> AgentStats {
        AgentStats { agent_id: agent.into(), correct: c, scored: n }
    }

    #[test]
    fn cold_start_weights_are_uniform() {
        let s = [stats("a", 0, 0), stats("b", 0, 0), stats("c", 0, 0), stats("d", 0, 0)];
        let w = compute_weights(&s, 1.0).unwrap();
        for s in &s {
            assert_eq!(s.smoothed_accuracy(1.0), 0.5);
            assert!((w.get(&s.agent_id).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn large_panel_counts_give_matching_smoothed_accuracies() {
        let counts = [("gemini", 244), ("llama", 248), ("grok", 252), ("gpt", 273), ("claude", 273)];
        let s: Vec<_> = counts.iter().map(|(a, c)| stats(a, *c, 420)).collect();
        // (c + 1) / 422
        let expected = [245.0 / 422.0, 249.0 / 422.0, 253.0 / 422.0, 274.0 / 422.0, 274.0 / 422.0];
        let rounded_percent = [58, 59, 60, 65, 65];
        for ((s, e), pct) in s.iter().zip(expected).zip(rounded_percent) {
            let raw = s.smoothed_accuracy(1.0);
            assert!((raw - e).abs() < 1e-15);
            assert_eq!((raw * 100.0 + 0.5) as u32, pct);
            assert_eq!((s.correct as f64 / 420.0 * 100.0 + 0.5) as u32, pct);
        }
        assert!((expected[0] - 0.5806).abs() < 5e-5 && (expected[3] - 0.6493).abs() < 5e-5);
        let w = compute_weights(&s, 1.0).unwrap();
        let total: f64 = expected.iter().sum();
        for (s, e) in s.iter().zip(expected) {
            assert!((w.get(&s.agent_id).unwrap() - e / total).abs() < 1e-15);
        }
        assert!((w.weights.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_smoothing_approaches_raw_accuracy() {
        let s = [stats("a", 10, 10), stats("b", 0, 10)];
        assert!((s[0].smoothed_accuracy(1e-9) - 1.0).abs() < 1e-9);
        assert!(s[1].smoothed_accuracy(1e-9) < 1e-9);
        let w = compute_weights(&s, 1e-9).unwrap();
        assert!(w.get(&"b".into()).unwrap() > 0.0);
    }

    #[test]
    fn weight_errors() {
        assert_eq!(compute_weights(&[], 1.0), Err(MetaError::NoAgents));
        assert_eq!(compute_weights(&[stats("a", 0, 0)], 0.0), Err(MetaError::InvalidSmoothing(0.0)));
    }

    #[test]
    fn singleton_ensemble_echoes_the_agent() {
        let d = dispatch(vec![ok("a", &[("Sepsis", 0.6), ("Pneumonia", 0.4)])]);
        let w = weights(&[("a", 1.0)]);
        let vote = aggregate_top1_vote(&d, &w).unwrap();
        assert_eq!(vote.top1, label("sepsis"));
        assert_eq!(vote.differential.len(), 1);
        assert_eq!(vote.differential[0].score, 1.0);
        let sum = aggregate_prob_sum(&d, &w).unwrap();
        assert_eq!(sum.differential.iter().map(|e| e.score).collect::<Vec<_>>(), [0.6, 0.4]);
    }

    #[test]
    fn weighted_vote_counts() {
        let d = dispatch(vec![ok("a", &[("sepsis", 0.7)]), ok("b", &[("sepsis", 0.5)]), ok("c", &[("pneumonia", 0.9)])]);
        let c = aggregate_top1_vote(&d, &weights(&[("a", 0.5), ("b", 0.3), ("c", 0.2)])).unwrap();
        assert_eq!(c.top1, label("sepsis"));
        assert!((c.differential[0].score - 0.8).abs() < 1e-12);
        assert!((c.differential[1].score - 0.2).abs() < 1e-12);
        assert_eq!(c.responders, 3);
    }

    #[test]
    fn vote_tie_breaks_on_probability_mass() {
        let d = dispatch(vec![ok("a", &[("stroke", 0.9)]), ok("b", &[("migraine", 0.6)])]);
        let c = aggregate_top1_vote(&d, &weights(&[("a", 0.5), ("b", 0.5)])).unwrap();
        assert_eq!(c.top1, label("stroke"));
        assert_eq!(c.differential[1].label, label("migraine"));
        // identical mass falls through to the label
        let d = dispatch(vec![ok("a", &[("stroke", 0.6)]), ok("b", &[("migraine", 0.6)])]);
        let c = aggregate_top1_vote(&d, &weights(&[("a", 0.5), ("b", 0.5)])).unwrap();
        assert_eq!(c.top1, label("migraine"));
    }

    #[test]
    fn probability_sum_fuses_full_lists() {
        let d = dispatch(vec![ok("a", &[("x", 0.8), ("y", 0.2)]), ok("b", &[("y", 0.9), ("x", 0.1)])]);
        let c = aggregate_prob_sum(&d, &weights(&[("a", 0.5), ("b", 0.5)])).unwrap();
        assert_eq!(c.top1, label("y"));
        assert!((c.differential[0].score - 0.55).abs() < 1e-12);
        assert!((c.differential[1].score - 0.45).abs() < 1e-12);
    }

    #[test]
    fn all_zero_probabilities_share_mass() {
        let d = dispatch(vec![ok("a", &[("x", 0.0), ("y", 0.0)])]);
        let c = aggregate_prob_sum(&d, &weights(&[("a", 1.0)])).unwrap();
        assert_eq!(c.differential.iter().map(|e| e.score).collect::<Vec<_>>(), [0.5, 0.5]);
    }

    #[test]
    fn urgency_is_the_maximum_reported() {
        let mut a = ok("a", &[("sepsis", 0.8)]);
        a.hypotheses[0].urgency = Urgency::Emergent;
        let mut b = ok("b", &[("pneumonia", 0.7), ("sepsis", 0.3)]);
        b.hypotheses[1].urgency = Urgency::Critical;
        let c = aggregate_top1_vote(&dispatch(vec![a, b]), &weights(&[("a", 0.6), ("b", 0.4)])).unwrap();
        assert_eq!(c.differential[0].urgency, Urgency::Critical);
    }

    #[test]
    fn failed_agents_are_ignored_and_reported() {
        let timeout = AgentResponse::failed("b".into(), "q".into(), AgentStatus::Timeout, "deadline", 20);
        let d = dispatch(vec![ok("a", &[("sepsis", 0.6)]), timeout.clone()]);
        let c = aggregate_top1_vote(&d, &weights(&[("a", 0.4), ("b", 0.6)])).unwrap();
        assert_eq!(c.responders, 1);
        assert_eq!(c.per_agent_top1.get(&AgentId::from("b")), Some(&None));
        let all_failed = dispatch(vec![timeout]);
        assert!(matches!(
            aggregate_top1_vote(&all_failed, &weights(&[("b", 1.0)])),
            Err(MetaError::AllAgentsFailed { .. })
        ));
        assert_eq!(
            aggregate_prob_sum(&d, &weights(&[("b", 1.0)])),
            Err(MetaError::UnknownAgent("a".into()))
        );
    }

    #[test]
    fn lone_proposal_needs_more_weight_than_the_rest() {
        // "rare" is proposed by one agent; it only wins once its weight beats
        // the summed votes of the competing label.
        let d = dispatch(vec![
            ok("a", &[("rare", 0.99)]),
            ok("b", &[("common", 0.5)]),
            ok("c", &[("common", 0.5)]),
        ]);
        let lose = aggregate_top1_vote(&d, &weights(&[("a", 0.45), ("b", 0.3), ("c", 0.25)])).unwrap();
        assert_eq!(lose.top1, label("common"));
        let win = aggregate_top1_vote(&d, &weights(&[("a", 0.56), ("b", 0.22), ("c", 0.22)])).unwrap();
        assert_eq!(win.top1, label("rare"));
    }

    fn confirmation(l: &str) -> ConfirmedDiagnosis {
        ConfirmedDiagnosis::new("q".into(), label(l), "dr. test", DateTime::from_timestamp(0, 0).unwrap(), None).unwrap()
    }

    #[test]
    fn confirmation_tallies() {
        let timeout = AgentResponse::failed("c".into(), "q".into(), AgentStatus::Timeout, "deadline", 20);
        let unparseable = AgentResponse::failed("d".into(), "q".into(), AgentStatus::Unparseable, "prose", 5);
        let d = dispatch(vec![ok("a", &[("sepsis", 0.6)]), ok("b", &[("pneumonia", 0.6)]), timeout, unparseable]);
        let ids: Vec<AgentId> = ["a", "b", "c", "d"].iter().map(|s| AgentId::from(*s)).collect();
        let mut ledger = StatsLedger::new(&ids);
        ledger.record_confirmation(&d, &confirmation("Sepsis")).unwrap();
        let got: Vec<_> = ledger.stats().map(|s| (s.correct, s.scored)).collect();
        assert_eq!(got, [(1, 1), (0, 1), (0, 0), (0, 0)]);

        // re-confirming with another label equals a fresh confirmation
        ledger.record_confirmation(&d, &confirmation("pneumonia")).unwrap();
        let mut fresh = StatsLedger::new(&ids);
        fresh.record_confirmation(&d, &confirmation("pneumonia")).unwrap();
        assert_eq!(ledger, fresh);
        assert_eq!(ledger.confirmed_inquiries(), 1);

        let mut other = confirmation("sepsis");
        other.inquiry_id = "elsewhere".into();
        assert_eq!(ledger.record_confirmation(&d, &other), Err(MetaError::NotFound("elsewhere".into())));
    }
}
