//! A small, fully deterministic backend for tests and demos.
//!
//! The language model is a bigram table and a text embeds as the normalized
//! sum of its tokens' rows in a fixed matrix. Everything comes from one JSON
//! file, so two loads of the same file behave identically.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AlignScorer, LmScorer, TokenLogprob};
use crate::embedding::EmbeddingVector;
use crate::error::{Result, VgdError};
use crate::templates::ChatFormat;

/// Largest regular vocabulary a toy backend accepts.
pub const MAX_TOY_VOCAB: usize = 256;

/// Image blobs of the form `fixture:NAME` resolve to a stored vector.
pub const FIXTURE_PREFIX: &str = "fixture:";

fn default_logit_scale() -> f64 {
    100.0
}

fn default_max_text_tokens() -> usize {
    77
}

fn default_max_context() -> usize {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub backend_id: String,
    /// Regular tokens, ids `0..vocab.len()`. No whitespace inside a token.
    pub vocab: Vec<String>,
    /// Optional unknown-word token, id `vocab.len()`.
    #[serde(default)]
    pub unk_token: Option<String>,
    /// Optional end-of-sequence token, id after the unknown token.
    #[serde(default)]
    pub eos_token: Option<String>,
    /// Regular tokens that may never be generated.
    #[serde(default)]
    pub banned: Vec<String>,
    /// Square table over every id: row = previous token, column = next token.
    /// Rows are normalized on load; entries must be non-negative.
    pub bigram_probs: Vec<Vec<f64>>,
    /// One row per regular token.
    pub embeddings: Vec<Vec<f64>>,
    /// Embedding of the empty string.
    pub empty_text_embedding: Vec<f64>,
    #[serde(default)]
    pub fixtures: BTreeMap<String, Vec<f64>>,
    #[serde(default = "default_logit_scale")]
    pub logit_scale: f64,
    #[serde(default = "default_max_text_tokens")]
    pub max_text_tokens: usize,
    #[serde(default = "default_max_context")]
    pub max_context: usize,
    #[serde(default)]
    pub chat_format: ChatFormat,
}

impl ToyConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn total_ids(&self) -> usize {
        self.vocab.len() + self.unk_token.is_some() as usize + self.eos_token.is_some() as usize
    }
}

/// Counts content tokens the way the toy alignment tokenizer splits text:
/// every maximal alphanumeric run is one token and every other
/// non-whitespace character is a token of its own.
pub fn toy_alignment_token_count(text: &str) -> usize {
    let mut count = 0;
    let mut in_word = false;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if !in_word {
                count += 1;
                in_word = true;
            }
        } else {
            in_word = false;
            if !ch.is_whitespace() {
                count += 1;
            }
        }
    }
    count
}

#[derive(Debug, Clone)]
pub struct ToyBackend {
    config: ToyConfig,
    /// Every id's string, regular tokens first.
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    unk_id: Option<u32>,
    eos_id: Option<u32>,
    banned: BTreeSet<u32>,
    /// Row-normalized natural-log table; zero probabilities are `-inf`.
    logprobs: Vec<Vec<f64>>,
    dim: usize,
}

impl ToyBackend {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config(ToyConfig::load(path)?)
    }

    pub fn from_config(config: ToyConfig) -> Result<Self> {
        let bad = |msg: String| VgdError::InvalidConfig(format!("toy backend: {msg}"));
        let n = config.vocab.len();
        if n == 0 || n > MAX_TOY_VOCAB {
            return Err(bad(format!("vocab size {n} outside [1, {MAX_TOY_VOCAB}]")));
        }

        let mut tokens = config.vocab.clone();
        let unk_id = config.unk_token.as_ref().map(|t| {
            tokens.push(t.clone());
            (tokens.len() - 1) as u32
        });
        let eos_id = config.eos_token.as_ref().map(|t| {
            tokens.push(t.clone());
            (tokens.len() - 1) as u32
        });

        let mut index = HashMap::new();
        for (id, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(bad(format!("token {tok:?} is empty or contains whitespace")));
            }
            if index.insert(tok.clone(), id as u32).is_some() {
                return Err(bad(format!("duplicate token {tok:?}")));
            }
        }

        let mut banned: BTreeSet<u32> = unk_id.into_iter().collect();
        for tok in &config.banned {
            let id = index
                .get(tok)
                .ok_or_else(|| bad(format!("banned token {tok:?} is not in the vocabulary")))?;
            banned.insert(*id);
        }

        let total = tokens.len();
        if config.bigram_probs.len() != total {
            return Err(bad(format!(
                "bigram table has {} rows, expected {total}",
                config.bigram_probs.len()
            )));
        }
        let mut logprobs = Vec::with_capacity(total);
        for (row_id, row) in config.bigram_probs.iter().enumerate() {
            if row.len() != total {
                return Err(bad(format!("bigram row {row_id} has {} entries, expected {total}", row.len())));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(bad(format!("bigram row {row_id} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(bad(format!("bigram row {row_id} has no mass")));
            }
            logprobs.push(
                row.iter()
                    .map(|&p| if p == 0.0 { f64::NEG_INFINITY } else { (p / sum).ln() })
                    .collect(),
            );
        }

        if config.embeddings.len() != n {
            return Err(bad(format!(
                "{} embedding rows for {n} tokens",
                config.embeddings.len()
            )));
        }
        let dim = config.embeddings[0].len();
        if dim == 0 {
            return Err(bad("embedding dim is 0".into()));
        }
        let rows = config
            .embeddings
            .iter()
            .chain(std::iter::once(&config.empty_text_embedding))
            .chain(config.fixtures.values());
        for row in rows {
            if row.len() != dim {
                return Err(VgdError::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(bad("embedding has a non-finite value".into()));
            }
        }
        if !(config.logit_scale.is_finite() && config.logit_scale > 0.0) {
            return Err(bad("logit scale must be positive".into()));
        }
        if config.max_text_tokens < 3 {
            return Err(bad("max_text_tokens must leave room for content".into()));
        }

        Ok(Self {
            config,
            tokens,
            index,
            unk_id,
            eos_id,
            banned,
            logprobs,
            dim,
        })
    }

    pub fn config(&self) -> &ToyConfig {
        &self.config
    }

    pub fn backend_id(&self) -> &str {
        &self.config.backend_id
    }

    pub fn token_str(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Ids of the regular, non-banned tokens with their strings: the
    /// vocabulary that beam initialization may pick from.
    pub fn vocabulary(&self) -> super::Vocabulary {
        let entries = (0..self.config.vocab.len() as u32)
            .filter(|id| !self.banned.contains(id))
            .map(|id| (id, self.tokens[id as usize].clone()))
            .collect();
        super::Vocabulary::new(entries)
    }

    /// The full next-token log-distribution after `prev`.
    pub fn distribution(&self, prev: u32) -> Option<&[f64]> {
        self.logprobs.get(prev as usize).map(Vec::as_slice)
    }

    fn text_embedding(&self, text: &str) -> Result<EmbeddingVector> {
        let mut words = text.split_whitespace().peekable();
        if words.peek().is_none() {
            return EmbeddingVector::normalized_from(self.config.empty_text_embedding.clone());
        }
        let mut sum = vec![0.0; self.dim];
        for word in words {
            let Some(&id) = self.index.get(word) else { continue };
            if let Some(row) = self.config.embeddings.get(id as usize) {
                for (acc, v) in sum.iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        EmbeddingVector::normalized_from(sum)
    }
}

impl LmScorer for ToyBackend {
    fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    fn banned_token_ids(&self) -> BTreeSet<u32> {
        self.banned.clone()
    }

    fn eos_token_id(&self) -> Option<u32> {
        self.eos_id
    }

    fn chat_format(&self) -> ChatFormat {
        self.config.chat_format.clone()
    }

    fn tokenize(&self, text: &str) -> Result<Vec<u32>> {
        text.split_whitespace()
            .map(|w| {
                self.index.get(w).copied().or(self.unk_id).ok_or_else(|| {
                    VgdError::InvalidInput(format!("word {w:?} is not in the toy vocabulary"))
                })
            })
            .collect()
    }

    fn detokenize(&self, ids: &[u32]) -> Result<String> {
        let words = ids
            .iter()
            .map(|&id| {
                self.token_str(id)
                    .ok_or_else(|| VgdError::InvalidInput(format!("token id {id} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(words.join(" "))
    }

    fn next_logprobs(
        &self,
        context: &[u32],
        top_k: usize,
        banned: &BTreeSet<u32>,
    ) -> Result<Vec<TokenLogprob>> {
        if top_k == 0 {
            return Err(VgdError::InvalidInput("top_k must be >= 1".into()));
        }
        if context.len() > self.config.max_context {
            return Err(VgdError::ContextLength {
                len: context.len(),
                max: self.config.max_context,
            });
        }
        let Some(&prev) = context.last() else {
            return Err(VgdError::InvalidInput("context is empty".into()));
        };
        let row = self
            .distribution(prev)
            .ok_or_else(|| VgdError::InvalidInput(format!("token id {prev} out of range")))?;
        let mut out: Vec<TokenLogprob> = row
            .iter()
            .enumerate()
            .filter(|(id, lp)| lp.is_finite() && !banned.contains(&(*id as u32)))
            .map(|(id, &logprob)| TokenLogprob {
                id: id as u32,
                logprob,
            })
            .collect();
        out.sort_by(|a, b| b.logprob.total_cmp(&a.logprob).then(a.id.cmp(&b.id)));
        out.truncate(top_k);
        Ok(out)
    }
}

impl AlignScorer for ToyBackend {
    fn dim(&self) -> usize {
        self.dim
    }

    fn logit_scale(&self) -> f64 {
        self.config.logit_scale
    }

    fn max_text_tokens(&self) -> usize {
        self.config.max_text_tokens
    }

    fn count_tokens(&self, texts: &[String]) -> Result<Vec<usize>> {
        Ok(texts.iter().map(|t| toy_alignment_token_count(t)).collect())
    }

    fn embed_text(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let max = self.max_content_tokens();
        texts
            .iter()
            .enumerate()
            .map(|(index, text)| {
                let count = toy_alignment_token_count(text);
                if count > max {
                    return Err(VgdError::TokenBudget { index, count, max });
                }
                self.text_embedding(text)
            })
            .collect()
    }

    fn embed_image(&self, image: &[u8]) -> Result<EmbeddingVector> {
        let name = std::str::from_utf8(image)
            .ok()
            .map(str::trim)
            .and_then(|s| s.strip_prefix(FIXTURE_PREFIX))
            .ok_or_else(|| VgdError::Media("toy backend only decodes `fixture:NAME` blobs".into()))?;
        let values = self
            .config
            .fixtures
            .get(name)
            .ok_or_else(|| VgdError::Media(format!("unknown fixture {name:?}")))?;
        EmbeddingVector::normalized_from(values.clone())
    }
}
