//! Scorer interfaces and their implementations.
//!
//! An [`LmScorer`] supplies next-token log-probabilities and tokenization, an
//! [`AlignScorer`] supplies text and image embeddings. The engine only talks
//! to these traits, so the in-process toy backend and the HTTP gateway client
//! are interchangeable.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::embedding::EmbeddingVector;
use crate::error::Result;
use crate::templates::ChatFormat;

pub mod cache;
pub mod gateway;
pub mod protocol;
pub mod random;
pub mod toy;

pub use cache::{InitIndex, VocabCache, Vocabulary};
pub use gateway::GatewayClient;
pub use toy::{ToyBackend, ToyConfig};

/// Number of marker tokens (start and end) the alignment encoder adds to every text.
pub const ALIGN_SPECIAL_TOKENS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenLogprob {
    pub id: u32,
    pub logprob: f64,
}

pub trait LmScorer: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Special and control ids that must never be appended to a prompt.
    fn banned_token_ids(&self) -> BTreeSet<u32>;

    fn eos_token_id(&self) -> Option<u32>;

    fn chat_format(&self) -> ChatFormat;

    fn tokenize(&self, text: &str) -> Result<Vec<u32>>;

    fn detokenize(&self, ids: &[u32]) -> Result<String>;

    /// The `top_k` most likely next tokens after `context`, sorted by
    /// descending log-probability (ties by ascending id), with every id in
    /// `banned` removed. Zero-probability tokens are never returned.
    fn next_logprobs(
        &self,
        context: &[u32],
        top_k: usize,
        banned: &BTreeSet<u32>,
    ) -> Result<Vec<TokenLogprob>>;
}

pub trait AlignScorer: Send + Sync {
    fn dim(&self) -> usize;

    fn logit_scale(&self) -> f64;

    /// Encoder context length, start and end markers included (77 for CLIP).
    fn max_text_tokens(&self) -> usize;

    /// Largest content-token count a text may have and still be embedded.
    fn max_content_tokens(&self) -> usize {
        self.max_text_tokens().saturating_sub(ALIGN_SPECIAL_TOKENS)
    }

    /// Content-token counts under the alignment tokenizer, markers excluded.
    fn count_tokens(&self, texts: &[String]) -> Result<Vec<usize>>;

    /// Unit-normalized embeddings, one per text, in input order. Texts over
    /// the token cap are rejected, never truncated.
    fn embed_text(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    fn embed_image(&self, image: &[u8]) -> Result<EmbeddingVector>;
}

/// An LM scorer and an alignment scorer used together for one decode.
#[derive(Clone)]
pub struct ScorerSession {
    pub lm: Arc<dyn LmScorer>,
    pub align: Arc<dyn AlignScorer>,
}

impl ScorerSession {
    pub fn new(lm: Arc<dyn LmScorer>, align: Arc<dyn AlignScorer>) -> Self {
        Self { lm, align }
    }

    /// A session where one backend serves both roles.
    pub fn from_backend<B: LmScorer + AlignScorer + 'static>(backend: B) -> Self {
        let shared = Arc::new(backend);
        Self {
            lm: shared.clone(),
            align: shared,
        }
    }
}

impl std::fmt::Debug for ScorerSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScorerSession")
            .field("vocab_size", &self.lm.vocab_size())
            .field("dim", &self.align.dim())
            .finish()
    }
}
