//! The combined decoding objective and the alignment terms it is built from.
//!
//! Everything is carried in natural-log space: the alignment score acts as a
//! log-potential for the image given the text, and the LM term is a sum of
//! next-token log-probabilities weighted by `alpha`.

use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::embedding::EmbeddingVector;
use crate::error::{Result, VgdError};
use crate::target::{TargetKind, TargetSpec};

/// `align_score + alpha * lm_logprob_sum`.
pub fn combined_score(align_score: f64, lm_logprob_sum: f64, alpha: f64) -> Result<f64> {
    check_inputs(align_score, lm_logprob_sum, alpha)?;
    Ok(align_score + alpha * lm_logprob_sum)
}

fn check_inputs(align_score: f64, lm_logprob_sum: f64, alpha: f64) -> Result<()> {
    if !align_score.is_finite() || !lm_logprob_sum.is_finite() || !alpha.is_finite() {
        return Err(VgdError::InvalidScore(format!(
            "non-finite input (align={align_score}, lm={lm_logprob_sum}, alpha={alpha})"
        )));
    }
    if alpha < 0.0 {
        return Err(VgdError::InvalidScore(format!("alpha {alpha} is negative")));
    }
    Ok(())
}

/// The objective a decode run ranks hypotheses by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub alpha: f64,
    pub mode: Mode,
}

impl Objective {
    pub fn new(alpha: f64, mode: Mode) -> Self {
        Self { alpha, mode }
    }

    pub fn score(&self, align_score: f64, lm_logprob_sum: f64) -> Result<f64> {
        check_inputs(align_score, lm_logprob_sum, self.alpha)?;
        Ok(match self.mode {
            Mode::Full => align_score + self.alpha * lm_logprob_sum,
            Mode::LlmOnly => self.alpha * lm_logprob_sum,
            Mode::ClipOnly => align_score,
        })
    }
}

/// Scaled cosine similarity between a text and an image embedding.
pub fn cosine_alignment(
    text_emb: &EmbeddingVector,
    image_emb: &EmbeddingVector,
    scale: f64,
) -> Result<f64> {
    let dot = text_emb.dot(image_emb)?;
    let norms = text_emb.norm() * image_emb.norm();
    if norms == 0.0 {
        return Err(VgdError::DegenerateEmbedding);
    }
    Ok(scale * (dot / norms))
}

/// Alignment of a text embedding with a target. Image sets score the mean
/// over members.
pub fn target_alignment(text_emb: &EmbeddingVector, target: &TargetSpec, scale: f64) -> Result<f64> {
    let members = target.embeddings();
    match target.kind() {
        TargetKind::Image | TargetKind::Text => cosine_alignment(text_emb, &members[0], scale),
        TargetKind::ImageSet => {
            if members.is_empty() {
                return Err(VgdError::InvalidTarget("empty image set".into()));
            }
            let mut sum = 0.0;
            for m in members {
                sum += cosine_alignment(text_emb, m, scale)?;
            }
            Ok(sum / members.len() as f64)
        }
    }
}
