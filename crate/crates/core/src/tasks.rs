//! User-facing tasks built on [`Decoder::decode`].

use serde::{Deserialize, Serialize};

use crate::backends::ScorerSession;
use crate::config::DecodeConfig;
use crate::engine::{DecodeOutput, Decoder};
use crate::error::{Result, VgdError};
use crate::score::cosine_alignment;
use crate::target::TargetSpec;
use crate::templates::Bindings;

pub const FUSE_SEPARATOR: &str = ", ";

/// Finds a prompt for one image.
pub fn invert(decoder: &Decoder, image: &[u8], config: &DecodeConfig) -> Result<DecodeOutput> {
    let embedding = decoder.session().align.embed_image(image)?;
    let target = TargetSpec::image(embedding)?;
    let config = DecodeConfig {
        template_id: "inversion".into(),
        ..config.clone()
    };
    decoder.decode(&target, &config, &Bindings::new())
}

/// Finds one prompt for the style shared by several images.
pub fn style(decoder: &Decoder, images: &[Vec<u8>], config: &DecodeConfig) -> Result<DecodeOutput> {
    if images.len() < 2 {
        return Err(VgdError::InvalidTarget(format!(
            "style needs at least 2 images, got {}",
            images.len()
        )));
    }
    let align = &decoder.session().align;
    let embeddings = images
        .iter()
        .map(|img| align.embed_image(img))
        .collect::<Result<Vec<_>>>()?;
    let target = TargetSpec::image_set(embeddings)?;
    let config = DecodeConfig {
        template_id: "style".into(),
        ..config.clone()
    };
    decoder.decode(&target, &config, &Bindings::new())
}

/// Shortens `long_prompt` to at most `max_tokens` alignment tokens while
/// staying close to it in embedding space.
pub fn distill(
    decoder: &Decoder,
    long_prompt: &str,
    max_tokens: usize,
    config: &DecodeConfig,
) -> Result<DecodeOutput> {
    if long_prompt.trim().is_empty() {
        return Err(VgdError::InvalidInput("prompt to distill is empty".into()));
    }
    let align = &decoder.session().align;
    let texts = [long_prompt.to_string()];
    let source_tokens = align.count_tokens(&texts)?[0];
    if max_tokens >= source_tokens {
        return Err(VgdError::NothingToDistill {
            budget: max_tokens,
            source_tokens,
        });
    }
    let target = TargetSpec::text(align.embed_text(&texts)?.remove(0))?;
    let config = DecodeConfig {
        template_id: "distill".into(),
        max_clip_tokens: max_tokens,
        ..config.clone()
    };
    let bindings = Bindings::from([
        ("max_length".to_string(), max_tokens.to_string()),
        ("target_prompt".to_string(), long_prompt.to_string()),
    ]);
    decoder.decode(&target, &config, &bindings)
}

/// Joins independently found prompts into one multi-concept prompt.
pub fn fuse(prompts: &[String]) -> Result<String> {
    if prompts.len() < 2 {
        return Err(VgdError::InvalidInput(format!(
            "fuse needs at least 2 prompts, got {}",
            prompts.len()
        )));
    }
    Ok(prompts.join(FUSE_SEPARATOR))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub cosine: f64,
    pub scaled: f64,
    pub token_count: usize,
}

/// How well a prompt matches an image under the alignment encoder.
pub fn align_report(session: &ScorerSession, prompt: &str, image: &[u8]) -> Result<AlignReport> {
    let align = &session.align;
    let texts = [prompt.to_string()];
    let token_count = align.count_tokens(&texts)?[0];
    let max = align.max_content_tokens();
    if token_count > max {
        return Err(VgdError::TokenBudget {
            index: 0,
            count: token_count,
            max,
        });
    }
    let text_emb = align.embed_text(&texts)?.remove(0);
    let image_emb = align.embed_image(image)?;
    let cosine = cosine_alignment(&text_emb, &image_emb, 1.0)?;
    Ok(AlignReport {
        cosine,
        scaled: cosine * align.logit_scale(),
        token_count,
    })
}

/// Image-to-image similarity, for scoring an externally generated image
/// against the source.
pub fn image_similarity(session: &ScorerSession, source: &[u8], generated: &[u8]) -> Result<f64> {
    let a = session.align.embed_image(source)?;
    let b = session.align.embed_image(generated)?;
    cosine_alignment(&a, &b, 1.0)
}
