//! Gradient-free prompt inversion for text-to-image models.
//!
//! A language model proposes prompt continuations and an image-text
//! alignment model ranks them; a beam search over
//! `alignment + alpha * LM log-probability` finds a readable prompt that
//! matches a target image, a set of style images, or a longer prompt.
//!
//! ```
//! use vgd_core::backends::random::{random_toy_config, RandomToyParams};
//! use vgd_core::backends::{InitIndex, ScorerSession, ToyBackend};
//! use vgd_core::{tasks, DecodeConfig, Decoder};
//!
//! let toy = ToyBackend::from_config(random_toy_config(&RandomToyParams::default(), 7)).unwrap();
//! let index = InitIndex::build(&toy, toy.backend_id(), &toy.vocabulary()).unwrap();
//! let decoder = Decoder::new(ScorerSession::from_backend(toy)).with_init_index(index);
//! let config = DecodeConfig { max_clip_tokens: 4, ..Default::default() };
//! let out = tasks::invert(&decoder, b"fixture:target", &config).unwrap();
//! assert!(!out.prompt().is_empty());
//! ```

pub mod backends;
pub mod config;
pub mod embedding;
pub mod engine;
pub mod error;
pub mod hypothesis;
pub mod score;
pub mod target;
pub mod tasks;
pub mod templates;

pub use config::{DecodeConfig, Mode, TieBreak};
pub use embedding::EmbeddingVector;
pub use engine::{DecodeOutput, DecodeTrace, Decoder, TerminationReason};
pub use error::{Result, VgdError};
pub use hypothesis::Hypothesis;
pub use score::{combined_score, cosine_alignment, target_alignment, Objective};
pub use target::{TargetKind, TargetSpec};
