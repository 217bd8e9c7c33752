use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
use crate::error::{Result, VgdError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Image,
    ImageSet,
    Text,
}

/// What a decoded prompt has to align with.
///
/// All embeddings are stored unit-normalized and share one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    kind: TargetKind,
    embeddings: Vec<EmbeddingVector>,
}

impl TargetSpec {
    pub fn image(embedding: EmbeddingVector) -> Result<Self> {
        Self::build(TargetKind::Image, vec![embedding])
    }

    pub fn text(embedding: EmbeddingVector) -> Result<Self> {
        Self::build(TargetKind::Text, vec![embedding])
    }

    /// A style target: two or more images whose shared traits the prompt should capture.
    pub fn image_set(embeddings: Vec<EmbeddingVector>) -> Result<Self> {
        if embeddings.len() < 2 {
            return Err(VgdError::InvalidTarget(format!(
                "image set needs at least 2 images, got {}",
                embeddings.len()
            )));
        }
        Self::build(TargetKind::ImageSet, embeddings)
    }

    fn build(kind: TargetKind, embeddings: Vec<EmbeddingVector>) -> Result<Self> {
        let Some(first) = embeddings.first() else {
            return Err(VgdError::InvalidTarget("target has no embeddings".into()));
        };
        let dim = first.dim();
        let embeddings = embeddings
            .iter()
            .map(|e| {
                e.check_dim(dim)?;
                e.normalized()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, embeddings })
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn embeddings(&self) -> &[EmbeddingVector] {
        &self.embeddings
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].dim()
    }
}
