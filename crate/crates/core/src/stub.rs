//! Seeded synthetic agents.
//!
//! A stub produces the same wire-format text a compliant LLM would, derived
//! only from its configuration and the inquiry id. When the harness attaches
//! a ground-truth label, the stub's top-1 equals it with probability
//! `target_accuracy`; otherwise the top-1 is a decoy drawn from the pool.

use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::ids::InquiryId;
use crate::label::{canonicalize_label, Label};
use crate::model::Urgency;

/// Decoy used when the pool has nothing but the ground truth in it.
pub const FALLBACK_DECOY: &str = "undifferentiated acute illness";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubProfile {
    pub seed: u64,
    pub target_accuracy: f64,
    pub label_pool: Vec<String>,
}

#[derive(Serialize)]
struct WireEntry<'a> {
    diagnosis: &'a str,
    probability: f64,
    urgency: &'static str,
}

/// 64-bit FNV-1a; used only to fold the inquiry id into the RNG seed.
fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn inquiry_rng(seed: u64, inquiry_id: &InquiryId) -> ChaCha8Rng {
    let hash = fnv1a(inquiry_id.as_str().as_bytes(), fnv1a(&seed.to_le_bytes(), 0xcbf2_9ce4_8422_2325));
    ChaCha8Rng::seed_from_u64(hash)
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> Option<&'a str> {
    if items.is_empty() {
        return None;
    }
    let idx = ((unit(rng) * items.len() as f64) as usize).min(items.len() - 1);
    Some(items[idx])
}

fn same_label(raw: &str, label: &Label) -> bool {
    canonicalize_label(raw).is_ok_and(|l| &l == label)
}

impl StubProfile {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(0.0..=1.0).contains(&self.target_accuracy) {
            return Err("target_accuracy must be in [0, 1]");
        }
        if self.label_pool.iter().any(|l| canonicalize_label(l).is_err()) {
            return Err("label_pool contains an empty label");
        }
        Ok(())
    }

    /// Whether this stub answers `inquiry_id` correctly when a ground truth
    /// is attached. This is the first draw of the inquiry's RNG stream.
    pub fn answers_correctly(&self, inquiry_id: &InquiryId) -> bool {
        let mut rng = inquiry_rng(self.seed, inquiry_id);
        unit(&mut rng) < self.target_accuracy
    }

    /// Renders the stub's reply for one inquiry as a JSON array.
    pub fn render_output(&self, inquiry_id: &InquiryId, ground_truth: Option<&Label>, max_hypotheses: usize) -> String {
        let mut rng = inquiry_rng(self.seed, inquiry_id);
        let correct = unit(&mut rng) < self.target_accuracy;
        let pool: Vec<&str> = self.label_pool.iter().map(String::as_str).collect();

        let top: &str = match ground_truth {
            Some(truth) if correct => truth.as_str(),
            Some(truth) => {
                let decoys: Vec<&str> = pool.iter().copied().filter(|l| !same_label(l, truth)).collect();
                pick(&mut rng, &decoys).unwrap_or(FALLBACK_DECOY)
            }
            None => pick(&mut rng, &pool).unwrap_or(FALLBACK_DECOY),
        };
        let top_label = canonicalize_label(top).ok();

        let top_probability = 0.55 + 0.35 * unit(&mut rng);
        let mut entries = Vec::with_capacity(max_hypotheses);
        entries.push(WireEntry { diagnosis: top, probability: top_probability, urgency: urgency(&mut rng, 2) });

        let mut rest: Vec<&str> = pool
            .iter()
            .copied()
            .filter(|l| top_label.as_ref().is_none_or(|t| !same_label(l, t)))
            .collect();
        let mut remaining = 1.0 - top_probability;
        let mut tail = Vec::new();
        while entries.len() + tail.len() < max_hypotheses.min(3) && !rest.is_empty() {
            let idx = ((unit(&mut rng) * rest.len() as f64) as usize).min(rest.len() - 1);
            let label = rest.swap_remove(idx);
            let share = remaining * (0.3 + 0.4 * unit(&mut rng));
            remaining -= share;
            tail.push(WireEntry { diagnosis: label, probability: share, urgency: urgency(&mut rng, 1) });
        }
        tail.sort_by(|a, b| b.probability.partial_cmp(&a.probability).unwrap_or(core::cmp::Ordering::Equal));
        entries.extend(tail);
        serde_json::to_string(&entries).expect("stub entries serialize")
    }
}

fn urgency(rng: &mut ChaCha8Rng, min_level: u8) -> &'static str {
    let span = 4 - min_level + 1;
    let level = min_level + ((unit(rng) * f64::from(span)) as u8).min(span - 1);
    Urgency::from_level(level).map_or("routine", Urgency::as_str)
}
