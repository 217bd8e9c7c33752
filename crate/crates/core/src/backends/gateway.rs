//! Blocking HTTP client for the scorer gateway.

use std::collections::BTreeSet;
use std::time::Duration;

use base64::Engine as _;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::protocol::{self, ErrorBody, MetaResponse};
use super::{AlignScorer, LmScorer, TokenLogprob};
use crate::embedding::EmbeddingVector;
use crate::error::{Result, VgdError};
use crate::templates::ChatFormat;

/// Environment variable naming the default gateway URL.
pub const GATEWAY_URL_ENV: &str = "VGD_GATEWAY_URL";

#[derive(Debug, Clone)]
pub struct GatewayClient {
    base_url: String,
    agent: ureq::Agent,
    meta: MetaResponse,
}

impl GatewayClient {
    /// Connects and fetches `/v1/meta`.
    pub fn connect(base_url: &str) -> Result<Self> {
        Self::connect_with_timeout(base_url, Duration::from_secs(300))
    }

    pub fn connect_with_timeout(base_url: &str, timeout: Duration) -> Result<Self> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        let base_url = base_url.trim_end_matches('/').to_string();
        let mut resp = agent
            .get(format!("{base_url}{}", protocol::META))
            .call()
            .map_err(transport)?;
        let meta: MetaResponse = read_reply(&mut resp)?;
        if meta.dim == 0 {
            return Err(VgdError::Gateway {
                code: "bad_meta".into(),
                message: "gateway reports dim 0".into(),
            });
        }
        Ok(Self {
            base_url,
            agent,
            meta,
        })
    }

    pub fn meta(&self) -> &MetaResponse {
        &self.meta
    }

    pub fn backend_id(&self) -> String {
        format!("{}+{}", self.meta.lm_name, self.meta.align_name)
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp> {
        let mut resp = self
            .agent
            .post(format!("{}{path}", self.base_url))
            .send_json(body)
            .map_err(transport)?;
        read_reply(&mut resp)
    }

    fn to_embedding(&self, values: Vec<f64>) -> Result<EmbeddingVector> {
        let v = EmbeddingVector::new(values)?;
        v.check_dim(self.meta.dim as usize)?;
        // renormalizing a unit vector can move its last bit
        if v.is_normalized() {
            Ok(v)
        } else {
            v.normalized()
        }
    }
}

fn transport(err: ureq::Error) -> VgdError {
    VgdError::Transport(err.to_string())
}

fn read_reply<T: DeserializeOwned>(resp: &mut ureq::http::Response<ureq::Body>) -> Result<T> {
    let status = resp.status();
    let text = resp.body_mut().read_to_string().map_err(transport)?;
    if status.is_success() {
        return serde_json::from_str(&text)
            .map_err(|e| VgdError::Transport(format!("malformed gateway reply: {e}")));
    }
    match serde_json::from_str::<ErrorBody>(&text) {
        Ok(body) => Err(body.into_error()),
        Err(_) => Err(VgdError::Gateway {
            code: format!("http_{}", status.as_u16()),
            message: text,
        }),
    }
}

impl LmScorer for GatewayClient {
    fn vocab_size(&self) -> usize {
        self.meta.vocab_size as usize
    }

    fn banned_token_ids(&self) -> BTreeSet<u32> {
        self.meta.banned_token_ids.iter().copied().collect()
    }

    fn eos_token_id(&self) -> Option<u32> {
        self.meta.eos_token_id
    }

    fn chat_format(&self) -> ChatFormat {
        self.meta.chat_format.clone().unwrap_or_default()
    }

    fn tokenize(&self, text: &str) -> Result<Vec<u32>> {
        let resp: protocol::TokenizeResponse =
            self.post(protocol::TOKENIZE, &protocol::TokenizeRequest { text: text.into() })?;
        Ok(resp.ids)
    }

    fn detokenize(&self, ids: &[u32]) -> Result<String> {
        if ids.is_empty() {
            return Ok(String::new());
        }
        let resp: protocol::DetokenizeResponse =
            self.post(protocol::DETOKENIZE, &protocol::DetokenizeRequest { ids: ids.to_vec() })?;
        Ok(resp.text)
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
        if context.is_empty() {
            return Err(VgdError::InvalidInput("context is empty".into()));
        }
        // over-request so that dropping banned ids still leaves top_k
        let request_k = (top_k + banned.len()).min(self.vocab_size().max(top_k));
        let resp: protocol::NextLogprobsResponse = self.post(
            protocol::NEXT_LOGPROBS,
            &protocol::NextLogprobsRequest {
                context_ids: context.to_vec(),
                top_k: request_k as u32,
            },
        )?;
        let mut out: Vec<TokenLogprob> = resp
            .candidates
            .into_iter()
            .filter(|c| c.logprob.is_finite() && !banned.contains(&c.id))
            .map(|c| TokenLogprob {
                id: c.id,
                logprob: c.logprob,
            })
            .collect();
        out.sort_by(|a, b| b.logprob.total_cmp(&a.logprob).then(a.id.cmp(&b.id)));
        out.truncate(top_k);
        Ok(out)
    }
}

impl AlignScorer for GatewayClient {
    fn dim(&self) -> usize {
        self.meta.dim as usize
    }

    fn logit_scale(&self) -> f64 {
        self.meta.logit_scale
    }

    fn max_text_tokens(&self) -> usize {
        self.meta.max_text_tokens as usize
    }

    fn count_tokens(&self, texts: &[String]) -> Result<Vec<usize>> {
        if texts.is_empty() {
            return Ok(vec![]);
        }
        let resp: protocol::CountTokensResponse = self.post(
            protocol::COUNT_TOKENS,
            &protocol::CountTokensRequest {
                texts: texts.to_vec(),
            },
        )?;
        if resp.counts.len() != texts.len() {
            return Err(VgdError::Transport(format!(
                "asked for {} token counts, got {}",
                texts.len(),
                resp.counts.len()
            )));
        }
        Ok(resp.counts.into_iter().map(|c| c as usize).collect())
    }

    fn embed_text(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Ok(vec![]);
        }
        let resp: protocol::EmbedTextResponse = self.post(
            protocol::EMBED_TEXT,
            &protocol::EmbedTextRequest {
                texts: texts.to_vec(),
            },
        )?;
        if resp.embeddings.len() != texts.len() {
            return Err(VgdError::Transport(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                resp.embeddings.len()
            )));
        }
        resp.embeddings
            .into_iter()
            .map(|v| self.to_embedding(v))
            .collect()
    }

    fn embed_image(&self, image: &[u8]) -> Result<EmbeddingVector> {
        let resp: protocol::EmbedImageResponse = self.post(
            protocol::EMBED_IMAGE,
            &protocol::EmbedImageRequest {
                image_b64: base64::engine::general_purpose::STANDARD.encode(image),
            },
        )?;
        self.to_embedding(resp.embedding)
    }
}
