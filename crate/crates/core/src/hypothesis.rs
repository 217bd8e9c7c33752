use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// A partial prompt together with its cached scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// LM ids of the prompt, prefix included, chat template excluded.
    pub lm_token_ids: Vec<u32>,
    pub text: String,
    pub lm_logprob_sum: f64,
    pub align_score: f64,
    pub combined_score: f64,
    pub terminated: bool,
    pub clip_token_count: usize,
}

impl Hypothesis {
    pub fn last_token_id(&self) -> Option<u32> {
        self.lm_token_ids.last().copied()
    }
}

/// Best-first order: higher combined score, then lower last token id, then
/// lexicographically smaller id sequence.
pub fn rank_cmp(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.combined_score
        .total_cmp(&a.combined_score)
        .then_with(|| a.last_token_id().cmp(&b.last_token_id()))
        .then_with(|| a.lm_token_ids.cmp(&b.lm_token_ids))
}
