//! Wire types of the scorer gateway (JSON over HTTP).

use serde::{Deserialize, Serialize};

use crate::error::VgdError;
use crate::templates::ChatFormat;

pub const META: &str = "/v1/meta";
pub const NEXT_LOGPROBS: &str = "/v1/lm/next_logprobs";
pub const TOKENIZE: &str = "/v1/lm/tokenize";
pub const DETOKENIZE: &str = "/v1/lm/detokenize";
pub const EMBED_TEXT: &str = "/v1/align/embed_text";
pub const EMBED_IMAGE: &str = "/v1/align/embed_image";
pub const COUNT_TOKENS: &str = "/v1/align/count_tokens";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResponse {
    pub lm_name: String,
    pub align_name: String,
    pub vocab_size: u32,
    pub dim: u32,
    pub logit_scale: f64,
    pub max_text_tokens: u32,
    pub banned_token_ids: Vec<u32>,
    /// Extension: id the engine treats as a termination signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eos_token_id: Option<u32>,
    /// Extension: chat role markers of the served LM.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chat_format: Option<ChatFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextLogprobsRequest {
    pub context_ids: Vec<u32>,
    pub top_k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireCandidate {
    pub id: u32,
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextLogprobsResponse {
    pub candidates: Vec<WireCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizeRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizeResponse {
    pub ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetokenizeRequest {
    pub ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetokenizeResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTextResponse {
    pub embeddings: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedImageRequest {
    pub image_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedImageResponse {
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTokensRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTokensResponse {
    pub counts: Vec<u32>,
}

pub mod codes {
    pub const TOKEN_BUDGET: &str = "token_budget";
    pub const CONTEXT_LENGTH: &str = "context_length";
    pub const MEDIA: &str = "media";
    pub const INVALID_REQUEST: &str = "invalid_request";
}

/// Body of every 4xx/5xx reply. The optional fields refine `token_budget`
/// and `context_length` errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error_code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<usize>,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            error_code: code.into(),
            message: message.into(),
            index: None,
            count: None,
            max: None,
        }
    }

    /// Server-side encoding of a typed error.
    pub fn from_error(err: &VgdError) -> Self {
        match err {
            VgdError::TokenBudget { index, count, max } => Self {
                index: Some(*index),
                count: Some(*count),
                max: Some(*max),
                ..Self::new(codes::TOKEN_BUDGET, err.to_string())
            },
            VgdError::ContextLength { len, max } => Self {
                count: Some(*len),
                max: Some(*max),
                ..Self::new(codes::CONTEXT_LENGTH, err.to_string())
            },
            VgdError::Media(_) => Self::new(codes::MEDIA, err.to_string()),
            _ => Self::new(codes::INVALID_REQUEST, err.to_string()),
        }
    }

    /// Client-side mapping back to a typed error.
    pub fn into_error(self) -> VgdError {
        match self.error_code.as_str() {
            codes::TOKEN_BUDGET => VgdError::TokenBudget {
                index: self.index.unwrap_or(0),
                count: self.count.unwrap_or(0),
                max: self.max.unwrap_or(0),
            },
            codes::CONTEXT_LENGTH => VgdError::ContextLength {
                len: self.count.unwrap_or(0),
                max: self.max.unwrap_or(0),
            },
            codes::MEDIA => VgdError::Media(self.message),
            _ => VgdError::Gateway {
                code: self.error_code,
                message: self.message,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_without_extensions_parses() {
        let json = r#"{"lm_name":"l","align_name":"a","vocab_size":10,"dim":4,
            "logit_scale":100.0,"max_text_tokens":77,"banned_token_ids":[0,1]}"#;
        let meta: MetaResponse = serde_json::from_str(json).unwrap();
        assert_eq!(meta.eos_token_id, None);
        assert!(meta.chat_format.is_none());
    }

    #[test]
    fn typed_errors_survive_the_wire() {
        let err = VgdError::TokenBudget {
            index: 3,
            count: 80,
            max: 75,
        };
        let body: ErrorBody =
            serde_json::from_str(&serde_json::to_string(&ErrorBody::from_error(&err)).unwrap())
                .unwrap();
        assert!(matches!(
            body.into_error(),
            VgdError::TokenBudget {
                index: 3,
                count: 80,
                max: 75
            }
        ));
        let other = ErrorBody::new("overloaded", "busy").into_error();
        assert!(matches!(other, VgdError::Gateway { code, .. } if code == "overloaded"));
    }
}
