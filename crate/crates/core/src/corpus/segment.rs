//! Sliding-window segmentation with speaker-token insertion, and the merge
//! of per-segment encodings back into one row per original token.
//!
//! A synthetic speaker token is inserted at the start of every utterance (a
//! maximal same-speaker token run), then fixed-size windows slide over the
//! combined sequence: stride T/2 in overlapped mode (T even), stride T in
//! independent mode. Windows stop at the first start position whose window
//! reaches the end of the sequence.
//!
//! When windows overlap, a token appears in up to two segments; the merge
//! keeps the row from the segment where the token sits farther from a
//! segment boundary (more bidirectional context), breaking ties toward the
//! earlier segment.

use serde::{Deserialize, Serialize};

use super::document::Document;
use super::CorpusError;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    Overlapped,
    Independent,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SegmenterConfig {
    /// Window size in positions (after speaker insertion).
    pub segment_len: usize,
    pub insert_speakers: bool,
    pub overlap_mode: OverlapMode,
}

impl SegmenterConfig {
    /// Window stride: half a window when overlapped, a full window otherwise.
    pub fn stride(&self) -> usize {
        match self.overlap_mode {
            OverlapMode::Overlapped => self.segment_len / 2,
            OverlapMode::Independent => self.segment_len,
        }
    }
}

/// One window over the combined (speaker-inserted) token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Token text at each position (speaker tokens carry the speaker string).
    pub tokens: Vec<String>,
    /// Original flattened token index per position; `None` for inserted
    /// speaker tokens.
    pub source: Vec<Option<usize>>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Cut a document into segments per the config.
pub fn segment(doc: &Document, cfg: &SegmenterConfig) -> Result<Vec<Segment>, CorpusError> {
    let min_len = if cfg.insert_speakers { 2 } else { 1 };
    if cfg.segment_len < min_len {
        return Err(CorpusError::SegmentTooSmall {
            segment_len: cfg.segment_len,
            required: min_len,
        });
    }
    if cfg.overlap_mode == OverlapMode::Overlapped && cfg.segment_len % 2 != 0 {
        return Err(CorpusError::SegmentTooSmall {
            segment_len: cfg.segment_len,
            required: cfg.segment_len + 1,
        });
    }

    // Combined sequence: original tokens with one speaker token inserted at
    // the start of each utterance (speaker-change boundary or document start).
    let speakers = doc.flat_speakers();
    let mut combined_text: Vec<String> = Vec::new();
    let mut combined_src: Vec<Option<usize>> = Vec::new();
    for (i, tok) in doc.tokens().enumerate() {
        if cfg.insert_speakers && (i == 0 || speakers[i] != speakers[i - 1]) {
            combined_text.push(speakers[i].to_string());
            combined_src.push(None);
        }
        combined_text.push(tok.to_string());
        combined_src.push(Some(i));
    }

    let total = combined_text.len();
    let stride = cfg.stride();
    let mut out = Vec::new();
    let mut s = 0usize;
    loop {
        let end = usize::min(s + cfg.segment_len, total);
        out.push(Segment {
            tokens: combined_text[s..end].to_vec(),
            source: combined_src[s..end].to_vec(),
        });
        if s + cfg.segment_len >= total {
            break;
        }
        s += stride;
    }
    Ok(out)
}

/// For each original token, which (segment, position) supplies its row:
/// the occurrence with the largest distance to a segment boundary,
/// ties resolved toward the earlier segment.
pub fn merge_owners(
    segments: &[Segment],
    n_tokens: usize,
) -> Result<Vec<(usize, usize)>, CorpusError> {
    let mut best: Vec<Option<(usize, usize, usize)>> = vec![None; n_tokens]; // (margin, seg, pos)
    for (si, seg) in segments.iter().enumerate() {
        for (pos, src) in seg.source.iter().enumerate() {
            if let Some(tok) = *src {
                let margin = usize::min(pos, seg.len() - 1 - pos);
                let candidate = (margin, si, pos);
                match best[tok] {
                    // Strictly larger margin wins; equal margin keeps the
                    // earlier segment (first writer).
                    Some((m, _, _)) if m >= margin => {}
                    _ => best[tok] = Some(candidate),
                }
            }
        }
    }
    best.iter()
        .enumerate()
        .map(|(tok, b)| match b {
            Some((_, si, pos)) => Ok((*si, *pos)),
            None => Err(CorpusError::CoverageGap { token: tok }),
        })
        .collect()
}

/// Merge per-segment embedding matrices into one row per original token.
pub fn merge_segments(
    segments: &[Segment],
    embeddings: &[Matrix],
    n_tokens: usize,
) -> Result<Matrix, CorpusError> {
    assert_eq!(segments.len(), embeddings.len(), "one embedding matrix per segment");
    if segments.is_empty() {
        return Err(CorpusError::CoverageGap { token: 0 });
    }
    let d = embeddings[0].cols();
    for (seg, emb) in segments.iter().zip(embeddings) {
        assert_eq!(
            emb.rows(),
            seg.len(),
            "segment has {} positions but embedding has {} rows",
            seg.len(),
            emb.rows()
        );
    }
    let owners = merge_owners(segments, n_tokens)?;
    let mut h = Matrix::zeros(n_tokens, d);
    for (tok, &(si, pos)) in owners.iter().enumerate() {
        h.row_mut(tok).copy_from_slice(embeddings[si].row(pos));
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc_with_tokens(n: usize) -> Document {
        Document {
            doc_key: "seg".into(),
            genre: "nw".into(),
            sentences: vec![(0..n).map(|i| format!("t{}", i)).collect()],
            speakers: vec![vec!["s0".into(); n]],
            trees: vec![String::new()], // not used by the segmenter
            clusters: vec![],
            ner: vec![],
        }
    }

    fn no_speakers(len: usize) -> SegmenterConfig {
        SegmenterConfig {
            segment_len: len,
            insert_speakers: false,
            overlap_mode: OverlapMode::Overlapped,
        }
    }

    #[test]
    fn overlapped_windows_match_hand_enumeration() {
        // 10 tokens, window 4, stride 2: [0..3],[2..5],[4..7],[6..9].
        let segs = segment(&doc_with_tokens(10), &no_speakers(4)).unwrap();
        let starts: Vec<Vec<Option<usize>>> =
            segs.iter().map(|s| s.source.clone()).collect();
        assert_eq!(
            starts,
            vec![
                vec![Some(0), Some(1), Some(2), Some(3)],
                vec![Some(2), Some(3), Some(4), Some(5)],
                vec![Some(4), Some(5), Some(6), Some(7)],
                vec![Some(6), Some(7), Some(8), Some(9)],
            ]
        );
    }

    #[test]
    fn independent_windows_chunk_disjointly() {
        let cfg = SegmenterConfig {
            segment_len: 4,
            insert_speakers: false,
            overlap_mode: OverlapMode::Independent,
        };
        let segs = segment(&doc_with_tokens(10), &cfg).unwrap();
        let covered: Vec<Vec<usize>> =
            segs.iter().map(|s| s.source.iter().map(|x| x.unwrap()).collect()).collect();
        assert_eq!(covered, vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![8, 9]]);
    }

    #[test]
    fn single_token_document() {
        let segs = segment(&doc_with_tokens(1), &no_speakers(4)).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].source, vec![Some(0)]);
    }

    #[test]
    fn merge_ownership_matches_margin_rule() {
        // Owners for the 10-token/window-4 example, worked out by hand.
        let segs = segment(&doc_with_tokens(10), &no_speakers(4)).unwrap();
        let owners = merge_owners(&segs, 10).unwrap();
        let owner_segments: Vec<usize> = owners.iter().map(|&(s, _)| s).collect();
        assert_eq!(owner_segments, vec![0, 0, 0, 1, 1, 2, 2, 3, 3, 3]);
    }

    #[test]
    fn interior_tokens_covered_exactly_twice() {
        let segs = segment(&doc_with_tokens(10), &no_speakers(4)).unwrap();
        let mut coverage = vec![0usize; 10];
        for seg in &segs {
            for src in seg.source.iter().flatten() {
                coverage[*src] += 1;
            }
        }
        // Window 4, stride 2, last window starts at 6: tokens in [2, 8)
        // are interior (covered twice); the flanks are covered once.
        assert_eq!(coverage, vec![1, 1, 2, 2, 2, 2, 2, 2, 1, 1]);
    }

    #[test]
    fn speaker_tokens_inserted_at_utterance_starts() {
        let mut doc = doc_with_tokens(4);
        doc.speakers = vec![vec!["alice".into(), "alice".into(), "bob".into(), "bob".into()]];
        let cfg = SegmenterConfig {
            segment_len: 8,
            insert_speakers: true,
            overlap_mode: OverlapMode::Overlapped,
        };
        let segs = segment(&doc, &cfg).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(
            segs[0].tokens,
            vec!["alice", "t0", "t1", "bob", "t2", "t3"]
        );
        assert_eq!(
            segs[0].source,
            vec![None, Some(0), Some(1), None, Some(2), Some(3)]
        );
    }

    #[test]
    fn merge_takes_each_tokens_own_vector_exactly_once() {
        // Identity-style provider: embed position (si, pos) as the original
        // token index it maps to; merged rows must equal each token's index.
        let segs = segment(&doc_with_tokens(10), &no_speakers(4)).unwrap();
        let embs: Vec<Matrix> = segs
            .iter()
            .map(|s| {
                Matrix::from_fn(s.len(), 1, |i, _| s.source[i].map(|t| t as f64).unwrap_or(-1.0))
            })
            .collect();
        let h = merge_segments(&segs, &embs, 10).unwrap();
        for t in 0..10 {
            assert_eq!(h.get(t, 0), t as f64);
        }
    }

    #[test]
    fn zero_segments_is_a_coverage_gap() {
        assert!(matches!(
            merge_segments(&[], &[], 3),
            Err(CorpusError::CoverageGap { .. })
        ));
    }

    #[test]
    fn too_small_window_rejected() {
        let cfg = SegmenterConfig {
            segment_len: 1,
            insert_speakers: true,
            overlap_mode: OverlapMode::Independent,
        };
        assert!(matches!(
            segment(&doc_with_tokens(3), &cfg),
            Err(CorpusError::SegmentTooSmall { .. })
        ));
    }

    #[test]
    fn odd_window_rejected_in_overlapped_mode() {
        assert!(matches!(
            segment(&doc_with_tokens(10), &no_speakers(5)),
            Err(CorpusError::SegmentTooSmall { .. })
        ));
    }
}
