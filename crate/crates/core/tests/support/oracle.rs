//! Reference scorer for weighted top-1 voting, used to check the
//! production aggregator.
//!
//! Everything here is integer arithmetic: weights and probabilities are
//! multiples of 1/1024, so they are stored as their numerators and every
//! comparison is exact. Rankings are built by repeatedly scanning every
//! remaining label for the best one, with no sorting or floating point.

#![allow(dead_code)]

use chrono::{DateTime, Utc};
use medas_core::meta::WeightVector;
use medas_core::{
    canonicalize_label, AgentId, AgentResponse, AgentStatus, DiagnosisHypothesis, DispatchResult, InquiryId, Urgency,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub const SCALE: u64 = 1024;

#[derive(Debug, Clone)]
pub struct OracleAgent {
    /// Weight numerator over [`SCALE`], at least 1.
    pub weight: u64,
    /// `(label, probability numerator)` in descending probability order,
    /// all probabilities distinct. Empty for a failed agent.
    pub hypotheses: Vec<(String, u64)>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub agents: Vec<OracleAgent>,
}

fn label_name(i: usize) -> String {
    format!("dx {i:02}")
}

/// A random instance with 2 to 6 agents and 2 to 8 candidate labels. About
/// a third of instances draw weights from a tiny set so vote ties happen
/// often; a few agents fail.
pub fn generate(rng: &mut StdRng) -> Instance {
    let agent_count = rng.random_range(2..=6);
    let label_count = rng.random_range(2..=8);
    let coarse = rng.random_bool(0.35);
    let mut agents = Vec::with_capacity(agent_count);
    for i in 0..agent_count {
        let weight = if coarse { rng.random_range(1..=3) * 256 } else { rng.random_range(1..=SCALE) };
        let failed = i > 0 && rng.random_bool(0.1);
        let mut hypotheses = Vec::new();
        if !failed {
            let listed = rng.random_range(1..=label_count.min(4));
            let mut labels: Vec<usize> = (0..label_count).collect();
            labels.shuffle(rng);
            let mut probs: Vec<u64> = Vec::new();
            while probs.len() < listed {
                let p = rng.random_range(0..=SCALE);
                if !probs.contains(&p) {
                    probs.push(p);
                }
            }
            probs.sort_unstable_by(|a, b| b.cmp(a));
            hypotheses = labels.into_iter().take(listed).map(label_name).zip(probs).collect();
        }
        agents.push(OracleAgent { weight, hypotheses });
    }
    Instance { agents }
}

fn agent_id(i: usize) -> AgentId {
    AgentId::from(format!("agent-{i}"))
}

impl Instance {
    fn responders(&self) -> impl Iterator<Item = &OracleAgent> {
        self.agents.iter().filter(|a| !a.hypotheses.is_empty())
    }

    fn vote(&self, label: &str) -> u64 {
        self.responders().filter(|a| a.hypotheses[0].0 == label).map(|a| a.weight).sum()
    }

    fn mass(&self, label: &str) -> u64 {
        self.responders()
            .flat_map(|a| a.hypotheses.iter().filter(|h| h.0 == label).map(move |h| a.weight * h.1))
            .sum()
    }

    fn rank_by(&self, mut remaining: Vec<String>, key: impl Fn(&str) -> (u64, u64)) -> Vec<(String, u64)> {
        let mut ranking = Vec::new();
        while !remaining.is_empty() {
            let mut best = 0;
            for i in 1..remaining.len() {
                let (a, b) = (key(&remaining[i]), key(&remaining[best]));
                if a > b || (a == b && remaining[i] < remaining[best]) {
                    best = i;
                }
            }
            let label = remaining.swap_remove(best);
            let score = key(&label).0;
            ranking.push((label, score));
        }
        ranking
    }

    /// Labels that received a top-1 vote, best first, with their vote
    /// numerators.
    pub fn vote_ranking(&self) -> Vec<(String, u64)> {
        let mut voted: Vec<String> = Vec::new();
        for a in self.responders() {
            if !voted.contains(&a.hypotheses[0].0) {
                voted.push(a.hypotheses[0].0.clone());
            }
        }
        self.rank_by(voted, |l| (self.vote(l), self.mass(l)))
    }

    /// Every listed label, best first, with its weighted probability mass.
    pub fn mass_ranking(&self) -> Vec<(String, u64)> {
        let mut listed: Vec<String> = Vec::new();
        for a in self.responders() {
            for h in &a.hypotheses {
                if !listed.contains(&h.0) {
                    listed.push(h.0.clone());
                }
            }
        }
        self.rank_by(listed, |l| (self.mass(l), 0))
    }

    pub fn weights(&self, lambda: f64) -> WeightVector {
        WeightVector {
            weights: self
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| (agent_id(i), lambda * a.weight as f64 / SCALE as f64))
                .collect(),
            alpha: 1.0,
        }
    }

    pub fn dispatch(&self, inquiry: &str) -> DispatchResult {
        let inquiry_id = InquiryId::from(inquiry);
        let responses = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if a.hypotheses.is_empty() {
                    return AgentResponse::failed(agent_id(i), inquiry_id.clone(), AgentStatus::Timeout, "oracle", 0);
                }
                let hypotheses = a
                    .hypotheses
                    .iter()
                    .map(|(label, p)| DiagnosisHypothesis {
                        label: canonicalize_label(label).expect("oracle labels are canonical"),
                        raw_label: label.clone(),
                        probability: *p as f64 / SCALE as f64,
                        urgency: Urgency::Urgent,
                    })
                    .collect();
                AgentResponse {
                    agent_id: agent_id(i),
                    inquiry_id: inquiry_id.clone(),
                    hypotheses,
                    status: AgentStatus::Ok,
                    latency_ms: 0,
                    raw_output: String::new(),
                    reason: None,
                }
            })
            .collect();
        DispatchResult {
            inquiry_id,
            responses,
            started_at: DateTime::<Utc>::UNIX_EPOCH,
            finished_at: DateTime::<Utc>::UNIX_EPOCH,
            deadline_ms: 1000,
        }
    }
}
