//! Precomputed alignment embeddings for every single-token string.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! b"VGDC" | u32 version = 1 | u32 vocab_size | u32 dim
//! u32 backend_id_len | backend_id (UTF-8)
//! vocab_size x ( u32 token_id | f32 x dim )
//! ```

use std::collections::HashMap;
use std::path::Path;

use super::AlignScorer;
use crate::embedding::EmbeddingVector;
use crate::error::{Result, VgdError};
use crate::score::target_alignment;
use crate::target::TargetSpec;

pub const CACHE_MAGIC: &[u8; 4] = b"VGDC";
pub const CACHE_VERSION: u32 = 1;

const EMBED_BATCH: usize = 256;

/// Token strings keyed by id in the alignment vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<(u32, String)>,
}

impl Vocabulary {
    pub fn new(entries: Vec<(u32, String)>) -> Self {
        Self { entries }
    }

    /// One token per line; the line number is the id. Blank lines keep
    /// their id but are skipped.
    pub fn from_lines(text: &str) -> Self {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| (i as u32, line.trim().to_string()))
            .collect();
        Self { entries }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_lines(&std::fs::read_to_string(path)?))
    }

    pub fn entries(&self) -> &[(u32, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub token_id: u32,
    pub vector: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabCache {
    backend_id: String,
    dim: usize,
    entries: Vec<CacheEntry>,
}

impl VocabCache {
    /// Embeds every vocabulary string with `align`.
    pub fn build(align: &dyn AlignScorer, backend_id: &str, vocab: &Vocabulary) -> Result<Self> {
        if vocab.is_empty() {
            return Err(VgdError::InvalidInput("vocabulary is empty".into()));
        }
        let dim = align.dim();
        let mut entries = Vec::with_capacity(vocab.len());
        for chunk in vocab.entries().chunks(EMBED_BATCH) {
            let texts: Vec<String> = chunk.iter().map(|(_, s)| s.clone()).collect();
            let embedded = align.embed_text(&texts)?;
            for ((token_id, _), emb) in chunk.iter().zip(embedded) {
                emb.check_dim(dim)?;
                entries.push(CacheEntry {
                    token_id: *token_id,
                    vector: emb.values().iter().map(|&v| v as f32).collect(),
                });
            }
        }
        Ok(Self {
            backend_id: backend_id.to_string(),
            dim,
            entries,
        })
    }

    pub fn backend_id(&self) -> &str {
        &self.backend_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let id = self.backend_id.as_bytes();
        let mut out =
            Vec::with_capacity(20 + id.len() + self.entries.len() * (4 + 4 * self.dim));
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id);
        for entry in &self.entries {
            out.extend_from_slice(&entry.token_id.to_le_bytes());
            for v in &entry.vector {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CACHE_MAGIC {
            return Err(VgdError::CacheFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CACHE_VERSION {
            return Err(VgdError::CacheFormat(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(VgdError::CacheFormat("dim is 0".into()));
        }
        let id_len = r.u32()? as usize;
        let backend_id = String::from_utf8(r.take(id_len)?.to_vec())
            .map_err(|_| VgdError::CacheFormat("backend id is not UTF-8".into()))?;
        let record = 4 + 4 * dim;
        if bytes.len() - r.pos != count * record {
            return Err(VgdError::CacheFormat(format!(
                "expected {} record bytes, found {}",
                count * record,
                bytes.len() - r.pos
            )));
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let token_id = r.u32()?;
            let vector = (0..dim)
                .map(|_| r.f32())
                .collect::<Result<Vec<f32>>>()?;
            entries.push(CacheEntry { token_id, vector });
        }
        Ok(Self {
            backend_id,
            dim,
            entries,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// The `m` entries best aligned with `target`, best first. Ties go to the
    /// lower token id.
    pub fn top_m(&self, target: &TargetSpec, scale: f64, m: usize) -> Result<Vec<(u32, f64)>> {
        if target.dim() != self.dim {
            return Err(VgdError::DimensionMismatch {
                expected: self.dim,
                found: target.dim(),
            });
        }
        let mut scored = self
            .entries
            .iter()
            .map(|e| {
                let v = EmbeddingVector::new(e.vector.iter().map(|&x| x as f64).collect())?;
                Ok((e.token_id, target_alignment(&v, target, scale)?))
            })
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(m);
        Ok(scored)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| VgdError::CacheFormat("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// A vocabulary cache paired with the strings of its tokens, ready for beam
/// initialization.
#[derive(Debug, Clone)]
pub struct InitIndex {
    cache: VocabCache,
    strings: HashMap<u32, String>,
}

impl InitIndex {
    pub fn new(cache: VocabCache, vocab: &Vocabulary) -> Result<Self> {
        let strings: HashMap<u32, String> = vocab.entries().iter().cloned().collect();
        if let Some(missing) = cache.entries().iter().find(|e| !strings.contains_key(&e.token_id)) {
            return Err(VgdError::InvalidInput(format!(
                "cache token id {} has no vocabulary string",
                missing.token_id
            )));
        }
        Ok(Self { cache, strings })
    }

    pub fn build(align: &dyn AlignScorer, backend_id: &str, vocab: &Vocabulary) -> Result<Self> {
        Self::new(VocabCache::build(align, backend_id, vocab)?, vocab)
    }

    pub fn cache(&self) -> &VocabCache {
        &self.cache
    }

    pub fn token_str(&self, id: u32) -> Option<&str> {
        self.strings.get(&id).map(String::as_str)
    }

    /// Strings of the `m` best-aligned tokens, best first.
    pub fn top_tokens(&self, target: &TargetSpec, scale: f64, m: usize) -> Result<Vec<String>> {
        self.cache
            .top_m(target, scale, m)?
            .into_iter()
            .map(|(id, _)| Ok(self.strings[&id].clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::random::{random_toy_config, RandomToyParams};
    use crate::backends::ToyBackend;

    fn toy(n: usize, seed: u64) -> ToyBackend {
        let params = RandomToyParams {
            vocab_size: n,
            ..Default::default()
        };
        ToyBackend::from_config(random_toy_config(&params, seed)).unwrap()
    }

    #[test]
    fn builds_one_row_per_token() {
        let toy = toy(8, 1);
        let cache = VocabCache::build(&toy, "toy", &toy.vocabulary()).unwrap();
        assert_eq!(cache.len(), 8);
        assert_eq!(cache.dim(), toy.config().embeddings[0].len());
    }

    #[test]
    fn header_layout() {
        let toy = toy(3, 2);
        let cache = VocabCache::build(&toy, "ab", &toy.vocabulary()).unwrap();
        let bytes = cache.to_bytes();
        assert_eq!(&bytes[0..4], b"VGDC");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &(cache.dim() as u32).to_le_bytes());
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(&bytes[20..22], b"ab");
        assert_eq!(&bytes[22..26], &0u32.to_le_bytes());
        assert_eq!(bytes.len(), 22 + 3 * (4 + 4 * cache.dim()));
    }

    #[test]
    fn file_round_trip_and_idempotent_rebuild() {
        let toy = toy(20, 3);
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.vgdc");
        let b = dir.path().join("b.vgdc");
        let cache = VocabCache::build(&toy, "toy", &toy.vocabulary()).unwrap();
        cache.save(&a).unwrap();
        VocabCache::build(&toy, "toy", &toy.vocabulary()).unwrap().save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(VocabCache::load(&a).unwrap(), cache);
    }

    #[test]
    fn rejects_corrupt_files() {
        let toy = toy(4, 4);
        let bytes = VocabCache::build(&toy, "toy", &toy.vocabulary()).unwrap().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(VocabCache::from_bytes(&bad), Err(VgdError::CacheFormat(_))));
        assert!(VocabCache::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes;
        bad[4] = 2;
        assert!(VocabCache::from_bytes(&bad).is_err());
    }

    #[test]
    fn empty_vocab_rejected() {
        let toy = toy(4, 5);
        assert!(VocabCache::build(&toy, "toy", &Vocabulary::new(vec![])).is_err());
    }

    #[test]
    fn top1_matches_linear_scan() {
        let toy = toy(64, 6);
        let cache = VocabCache::build(&toy, "toy", &toy.vocabulary()).unwrap();
        let target = TargetSpec::image(toy.embed_image(b"fixture:target").unwrap()).unwrap();
        let best = cache.top_m(&target, 100.0, 1).unwrap()[0].0;

        let mut scan_best = (f64::NEG_INFINITY, 0u32);
        for (id, s) in toy.vocabulary().entries() {
            let e = toy.embed_text(std::slice::from_ref(s)).unwrap().remove(0);
            let score = crate::score::cosine_alignment(&e, &target.embeddings()[0], 100.0).unwrap();
            if score > scan_best.0 {
                scan_best = (score, *id);
            }
        }
        assert_eq!(best, scan_best.1);
    }

    #[test]
    fn vocabulary_from_lines() {
        let v = Vocabulary::from_lines("sun\n\ncat\n");
        assert_eq!(v.entries(), &[(0, "sun".to_string()), (2, "cat".to_string())]);
    }
}
