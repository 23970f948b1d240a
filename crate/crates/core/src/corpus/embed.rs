//! Pluggable token-embedding providers and the segment-embed-merge pipeline.
//!
//! The contextual encoder is a replaceable provider. Two implementations:
//!
//! * [`HashEmbedding`] — deterministic pseudo-random vectors keyed by the
//!   token string (FNV-1a hash seeds a ChaCha stream). Identical tokens get
//!   identical vectors; no context. Self-contained and reproducible.
//! * [`FileEmbedding`] — precomputed per-token rows loaded from a JSON file,
//!   for plugging in vectors produced by an external encoder.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::document::Document;
use super::segment::{merge_segments, segment, Segment, SegmenterConfig};
use super::CorpusError;
use crate::tensor::Matrix;

/// Supplies a d-dimensional vector for each segment position.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    /// Validate that this provider can embed the document (e.g. a file-based
    /// provider has rows for it).
    fn check(&self, _doc: &Document) -> Result<(), CorpusError> {
        Ok(())
    }

    /// Vector for one segment position: `text` is the position's token
    /// string, `source` its original token index (`None` for inserted
    /// speaker tokens).
    fn vector(&self, doc: &Document, text: &str, source: Option<usize>) -> Vec<f64>;
}

/// 64-bit FNV-1a over the token bytes. Fixed constants, stable across runs
/// and platforms (the std hasher is randomly keyed, so it cannot be used
/// for reproducible embeddings).
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic token-hash embeddings: N(0, 1/sqrt(d)) entries drawn from a
/// ChaCha stream seeded by `seed ^ fnv1a(token)`.
pub struct HashEmbedding {
    dim: usize,
    seed: u64,
}

impl HashEmbedding {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 1, "embedding width must be at least 1");
        HashEmbedding { dim, seed }
    }
}

impl EmbeddingProvider for HashEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vector(&self, _doc: &Document, text: &str, _source: Option<usize>) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(text.as_bytes()));
        let dist = Normal::new(0.0, 1.0 / (self.dim as f64).sqrt()).unwrap();
        (0..self.dim).map(|_| dist.sample(&mut rng)).collect()
    }
}

/// On-disk format for [`FileEmbedding`]: `{"dim": d, "docs": {doc_key: [[f64]]}}`
/// with one row per original token. Speaker tokens embed as zero vectors.
#[derive(Debug, Serialize, Deserialize)]
pub struct FileEmbeddingData {
    pub dim: usize,
    pub docs: BTreeMap<String, Vec<Vec<f64>>>,
}

pub struct FileEmbedding {
    data: FileEmbeddingData,
}

impl FileEmbedding {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let data: FileEmbeddingData =
            serde_json::from_str(&text).map_err(|e| CorpusError::SchemaError {
                location: path.display().to_string(),
                detail: e.to_string(),
            })?;
        for (key, rows) in &data.docs {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != data.dim {
                    return Err(CorpusError::ProviderDimMismatch {
                        detail: format!(
                            "doc `{}` row {} has width {}, declared dim {}",
                            key,
                            i,
                            row.len(),
                            data.dim
                        ),
                    });
                }
            }
        }
        Ok(FileEmbedding { data })
    }

    pub fn from_data(data: FileEmbeddingData) -> Self {
        FileEmbedding { data }
    }
}

impl EmbeddingProvider for FileEmbedding {
    fn dim(&self) -> usize {
        self.data.dim
    }

    fn check(&self, doc: &Document) -> Result<(), CorpusError> {
        let rows = self.data.docs.get(&doc.doc_key).ok_or_else(|| {
            CorpusError::ProviderDimMismatch {
                detail: format!("no embedding rows for doc `{}`", doc.doc_key),
            }
        })?;
        if rows.len() != doc.n_tokens() {
            return Err(CorpusError::ProviderDimMismatch {
                detail: format!(
                    "doc `{}` has {} tokens but {} embedding rows",
                    doc.doc_key,
                    doc.n_tokens(),
                    rows.len()
                ),
            });
        }
        Ok(())
    }

    fn vector(&self, doc: &Document, _text: &str, source: Option<usize>) -> Vec<f64> {
        match source {
            Some(i) => self.data.docs[&doc.doc_key][i].clone(),
            None => vec![0.0; self.data.dim],
        }
    }
}

/// Embed one segment: one row per position.
pub fn embed_segment(
    provider: &dyn EmbeddingProvider,
    doc: &Document,
    seg: &Segment,
) -> Result<Matrix, CorpusError> {
    let d = provider.dim();
    let mut m = Matrix::zeros(seg.len(), d);
    for pos in 0..seg.len() {
        let v = provider.vector(doc, &seg.tokens[pos], seg.source[pos]);
        if v.len() != d {
            return Err(CorpusError::ProviderDimMismatch {
                detail: format!("provider returned width {}, declared {}", v.len(), d),
            });
        }
        m.row_mut(pos).copy_from_slice(&v);
    }
    Ok(m)
}

/// Full pipeline: segment the document, embed every segment, merge back to
/// one row per original token. Deterministic for deterministic providers.
pub fn embed(
    doc: &Document,
    cfg: &SegmenterConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<Matrix, CorpusError> {
    provider.check(doc)?;
    let segments = segment(doc, cfg)?;
    let embeddings: Vec<Matrix> = segments
        .iter()
        .map(|s| embed_segment(provider, doc, s))
        .collect::<Result<_, _>>()?;
    merge_segments(&segments, &embeddings, doc.n_tokens())
}
