//! Document ingestion: JSONL corpora, PTB constituent trees, sliding-window
//! segmentation with speaker insertion, and pluggable token embeddings.

mod document;
mod embed;
mod ptb;
mod segment;

pub use document::{read_jsonl, write_jsonl, Document, NerSpan, Span};
pub use embed::{
    embed, embed_segment, fnv1a, EmbeddingProvider, FileEmbedding, FileEmbeddingData,
    HashEmbedding,
};
pub use ptb::{parse_ptb, print_ptb, ConstituentTree, TreeNode};
pub use segment::{merge_owners, merge_segments, segment, OverlapMode, Segment, SegmenterConfig};

/// Errors raised while reading, validating, or embedding documents.
#[derive(Debug, Clone, thiserror::Error)]
pub enum CorpusError {
    #[error("unbalanced parentheses in tree")]
    UnbalancedParens,
    #[error("empty tree")]
    EmptyTree,
    #[error("malformed leaf: {detail}")]
    MalformedLeaf { detail: String },
    #[error("{location}: schema error: {detail}")]
    SchemaError { location: String, detail: String },
    #[error("{location}: span ({}, {}) out of range for {n_tokens} tokens", span.0, span.1)]
    SpanOutOfRange { location: String, span: (usize, usize), n_tokens: usize },
    #[error("{location}: sentence {sentence} tree has {tree_tokens} tokens, sentence has {sentence_tokens}")]
    TreeTokenMismatch {
        location: String,
        sentence: usize,
        tree_tokens: usize,
        sentence_tokens: usize,
    },
    #[error("segment length {segment_len} too small (need at least {required}; overlapped mode also requires an even length)")]
    SegmentTooSmall { segment_len: usize, required: usize },
    #[error("no segment covers token {token}")]
    CoverageGap { token: usize },
    #[error("embedding provider mismatch: {detail}")]
    ProviderDimMismatch { detail: String },
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
}
