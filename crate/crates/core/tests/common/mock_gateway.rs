//! In-process gateway serving a toy backend over the wire protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use tokio::sync::oneshot;

use vgd_core::backends::protocol::{self, *};
use vgd_core::backends::{AlignScorer, LmScorer, ToyBackend};
use vgd_core::VgdError;

#[derive(Clone)]
struct AppState {
    toy: Arc<ToyBackend>,
    calls: Arc<Mutex<BTreeMap<&'static str, usize>>>,
}

impl AppState {
    fn hit(&self, path: &'static str) {
        *self.calls.lock().unwrap().entry(path).or_default() += 1;
    }
}

fn fail(err: VgdError) -> Response {
    (StatusCode::BAD_REQUEST, Json(ErrorBody::from_error(&err))).into_response()
}

fn reply<T: serde::Serialize>(r: Result<T, VgdError>) -> Response {
    match r {
        Ok(v) => Json(v).into_response(),
        Err(e) => fail(e),
    }
}

async fn meta(State(s): State<AppState>) -> Json<MetaResponse> {
    s.hit(protocol::META);
    let toy = &s.toy;
    Json(MetaResponse {
        lm_name: "toy-lm".into(),
        align_name: "toy-align".into(),
        vocab_size: toy.vocab_size() as u32,
        dim: toy.dim() as u32,
        logit_scale: toy.logit_scale(),
        max_text_tokens: toy.max_text_tokens() as u32,
        banned_token_ids: toy.banned_token_ids().into_iter().collect(),
        eos_token_id: toy.eos_token_id(),
        chat_format: Some(toy.chat_format()),
    })
}

async fn next_logprobs(State(s): State<AppState>, Json(req): Json<NextLogprobsRequest>) -> Response {
    s.hit(protocol::NEXT_LOGPROBS);
    reply(
        s.toy
            .next_logprobs(&req.context_ids, req.top_k as usize, &BTreeSet::new())
            .map(|c| NextLogprobsResponse {
                candidates: c
                    .into_iter()
                    .map(|t| WireCandidate {
                        id: t.id,
                        logprob: t.logprob,
                    })
                    .collect(),
            }),
    )
}

async fn tokenize(State(s): State<AppState>, Json(req): Json<TokenizeRequest>) -> Response {
    s.hit(protocol::TOKENIZE);
    reply(s.toy.tokenize(&req.text).map(|ids| TokenizeResponse { ids }))
}

async fn detokenize(State(s): State<AppState>, Json(req): Json<DetokenizeRequest>) -> Response {
    s.hit(protocol::DETOKENIZE);
    reply(s.toy.detokenize(&req.ids).map(|text| DetokenizeResponse { text }))
}

async fn embed_text(State(s): State<AppState>, Json(req): Json<EmbedTextRequest>) -> Response {
    s.hit(protocol::EMBED_TEXT);
    reply(s.toy.embed_text(&req.texts).map(|es| EmbedTextResponse {
        embeddings: es.into_iter().map(|e| e.into_values()).collect(),
    }))
}

async fn embed_image(State(s): State<AppState>, Json(req): Json<EmbedImageRequest>) -> Response {
    s.hit(protocol::EMBED_IMAGE);
    let bytes = match base64::engine::general_purpose::STANDARD.decode(&req.image_b64) {
        Ok(b) => b,
        Err(e) => return fail(VgdError::Media(format!("bad base64: {e}"))),
    };
    reply(s.toy.embed_image(&bytes).map(|e| EmbedImageResponse {
        embedding: e.into_values(),
    }))
}

async fn count_tokens(State(s): State<AppState>, Json(req): Json<CountTokensRequest>) -> Response {
    s.hit(protocol::COUNT_TOKENS);
    reply(s.toy.count_tokens(&req.texts).map(|c| CountTokensResponse {
        counts: c.into_iter().map(|n| n as u32).collect(),
    }))
}

pub struct MockGateway {
    pub url: String,
    calls: Arc<Mutex<BTreeMap<&'static str, usize>>>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockGateway {
    pub fn start(toy: ToyBackend) -> Self {
        let calls = Arc::new(Mutex::new(BTreeMap::new()));
        let state = AppState {
            toy: Arc::new(toy),
            calls: calls.clone(),
        };
        let app = Router::new()
            .route(protocol::META, get(meta))
            .route(protocol::NEXT_LOGPROBS, post(next_logprobs))
            .route(protocol::TOKENIZE, post(tokenize))
            .route(protocol::DETOKENIZE, post(detokenize))
            .route(protocol::EMBED_TEXT, post(embed_text))
            .route(protocol::EMBED_IMAGE, post(embed_image))
            .route(protocol::COUNT_TOKENS, post(count_tokens))
            .with_state(state);

        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        listener.set_nonblocking(true).unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).unwrap();
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .unwrap();
            });
        });
        Self {
            url,
            calls,
            shutdown: Some(tx),
            thread: Some(thread),
        }
    }

    pub fn calls(&self, path: &str) -> usize {
        self.calls.lock().unwrap().get(path).copied().unwrap_or(0)
    }

    pub fn reset_calls(&self) {
        self.calls.lock().unwrap().clear();
    }

    pub fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockGateway {
    fn drop(&mut self) {
        self.stop();
    }
}
