use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VgdError};

pub const DEFAULT_BEAM_WIDTH: usize = 10;
pub const DEFAULT_ALPHA: f64 = 0.67;
pub const DEFAULT_INIT_TOKENS: usize = 1;
pub const DEFAULT_MAX_CLIP_TOKENS: usize = 32;
pub const DEFAULT_LOGIT_SCALE: f64 = 100.0;
/// 77-token encoder context minus the start and end markers.
pub const MAX_CLIP_TOKENS_CAP: usize = 75;

/// Which terms of the objective drive pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Full,
    LlmOnly,
    ClipOnly,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::LlmOnly => "llm-only",
            Mode::ClipOnly => "clip-only",
        })
    }
}

impl FromStr for Mode {
    type Err = VgdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "llm-only" | "llm_only" => Ok(Mode::LlmOnly),
            "clip-only" | "clip_only" => Ok(Mode::ClipOnly),
            other => Err(VgdError::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Equal scores are ordered by the last token id, lowest first.
    #[default]
    LowestTokenId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub beam_width: usize,
    pub init_tokens: usize,
    pub alpha: f64,
    pub max_clip_tokens: usize,
    pub logit_scale: f64,
    pub mode: Mode,
    pub template_id: String,
    /// Extra LM ids to keep out of expansion, on top of the backend's own list.
    pub banned_token_ids: BTreeSet<u32>,
    pub tie_break: TieBreak,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_width: DEFAULT_BEAM_WIDTH,
            init_tokens: DEFAULT_INIT_TOKENS,
            alpha: DEFAULT_ALPHA,
            max_clip_tokens: DEFAULT_MAX_CLIP_TOKENS,
            logit_scale: DEFAULT_LOGIT_SCALE,
            mode: Mode::Full,
            template_id: "inversion".into(),
            banned_token_ids: BTreeSet::new(),
            tie_break: TieBreak::LowestTokenId,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 {
            return Err(VgdError::InvalidConfig("beam width must be >= 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(VgdError::InvalidConfig(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !(1..=MAX_CLIP_TOKENS_CAP).contains(&self.max_clip_tokens) {
            return Err(VgdError::InvalidConfig(format!(
                "max_clip_tokens must be in [1, {MAX_CLIP_TOKENS_CAP}], got {}",
                self.max_clip_tokens
            )));
        }
        if !(self.logit_scale.is_finite() && self.logit_scale > 0.0) {
            return Err(VgdError::InvalidConfig(format!(
                "logit scale must be positive, got {}",
                self.logit_scale
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = DecodeConfig::default();
        assert_eq!(c.beam_width, 10);
        assert_eq!(c.alpha, 0.67);
        assert_eq!(c.init_tokens, 1);
        assert_eq!(c.max_clip_tokens, 32);
        assert_eq!(c.mode, Mode::Full);
        assert_eq!(c.logit_scale, 100.0);
        c.validate().unwrap();
    }

    #[test]
    fn token_budget_capped_at_75() {
        let mut c = DecodeConfig {
            max_clip_tokens: 75,
            ..Default::default()
        };
        c.validate().unwrap();
        c.max_clip_tokens = 76;
        assert!(c.validate().is_err());
        c.max_clip_tokens = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_bad_alpha_and_width() {
        let c = DecodeConfig {
            alpha: -0.1,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = DecodeConfig {
            beam_width: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn mode_parses_both_spellings() {
        assert_eq!("clip-only".parse::<Mode>().unwrap(), Mode::ClipOnly);
        assert_eq!("llm_only".parse::<Mode>().unwrap(), Mode::LlmOnly);
        assert!("greedy".parse::<Mode>().is_err());
    }
}
