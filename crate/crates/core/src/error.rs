use thiserror::Error;

pub type Result<T, E = VgdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VgdError {
    #[error("invalid score: {0}")]
    InvalidScore(String),

    #[error("degenerate embedding: vector has zero norm")]
    DegenerateEmbedding,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("context of {len} tokens exceeds model limit {max}")]
    ContextLength { len: usize, max: usize },

    /// A text handed to the alignment encoder is longer than its token cap.
    #[error("text {index} has {count} alignment tokens, limit is {max}")]
    TokenBudget {
        index: usize,
        count: usize,
        max: usize,
    },

    #[error("media error: {0}")]
    Media(String),

    #[error("gateway error {code}: {message}")]
    Gateway { code: String, message: String },

    #[error("malformed cache file: {0}")]
    CacheFormat(String),

    #[error("no expansion candidates left after banning")]
    ExpansionExhausted,

    #[error("search produced no candidates on its first expansion")]
    EmptySearch,

    #[error("template not found: {0}")]
    TemplateNotFound(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("prompt has {source_tokens} tokens, budget {budget} leaves nothing to distill")]
    NothingToDistill { budget: usize, source_tokens: usize },

    #[error("trace error: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
