//! Document schema, validation, and JSONL reading/writing.
//!
//! One document per line, as JSON:
//! `{"doc_key": str, "genre": str, "sentences": [[str]], "speakers": [[str]],
//!   "trees": [str], "clusters": [[[int,int]]]}`
//! plus an optional `"ner": [[start, end, label]]` block used by the analysis
//! tooling. Cluster and NER spans are inclusive (start, end) token index
//! pairs over the flattened document.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ptb::parse_ptb;
use super::CorpusError;

/// Inclusive token span over the flattened document.
pub type Span = (usize, usize);

/// A named-entity annotation: span plus entity type.
pub type NerSpan = (usize, usize, String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub doc_key: String,
    pub genre: String,
    pub sentences: Vec<Vec<String>>,
    pub speakers: Vec<Vec<String>>,
    pub trees: Vec<String>,
    pub clusters: Vec<Vec<Span>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ner: Vec<NerSpan>,
}

impl Document {
    /// Total token count over all sentences.
    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Flattened token list.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flatten().map(String::as_str)
    }

    /// Token text at a flattened index.
    pub fn token(&self, mut idx: usize) -> &str {
        for s in &self.sentences {
            if idx < s.len() {
                return &s[idx];
            }
            idx -= s.len();
        }
        panic!("token index out of range");
    }

    /// Flattened speaker list, one entry per token.
    pub fn flat_speakers(&self) -> Vec<&str> {
        self.speakers.iter().flatten().map(String::as_str).collect()
    }

    /// Starting flattened token index of each sentence.
    pub fn sentence_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.sentences.len());
        let mut acc = 0;
        for s in &self.sentences {
            out.push(acc);
            acc += s.len();
        }
        out
    }

    /// Sentence index containing a flattened token index.
    pub fn sentence_of(&self, token: usize) -> usize {
        let mut acc = 0;
        for (i, s) in self.sentences.iter().enumerate() {
            acc += s.len();
            if token < acc {
                return i;
            }
        }
        panic!("token index out of range");
    }

    /// Validate all schema invariants; `where_` names the source for errors.
    pub fn validate(&self, where_: &str) -> Result<(), CorpusError> {
        let schema = |detail: String| CorpusError::SchemaError {
            location: where_.to_string(),
            detail,
        };
        if self.sentences.is_empty() {
            return Err(schema("document has no sentences".into()));
        }
        if self.speakers.len() != self.sentences.len() {
            return Err(schema(format!(
                "speakers has {} sentences, tokens have {}",
                self.speakers.len(),
                self.sentences.len()
            )));
        }
        for (i, (s, sp)) in self.sentences.iter().zip(&self.speakers).enumerate() {
            if s.is_empty() {
                return Err(schema(format!("sentence {} is empty", i)));
            }
            if s.len() != sp.len() {
                return Err(schema(format!(
                    "sentence {}: {} tokens but {} speaker entries",
                    i,
                    s.len(),
                    sp.len()
                )));
            }
        }
        if self.trees.len() != self.sentences.len() {
            return Err(schema(format!(
                "{} trees for {} sentences",
                self.trees.len(),
                self.sentences.len()
            )));
        }
        for (i, (tree_text, sent)) in self.trees.iter().zip(&self.sentences).enumerate() {
            let tree = parse_ptb(tree_text)?;
            if tree.token_count() != sent.len() {
                return Err(CorpusError::TreeTokenMismatch {
                    location: where_.to_string(),
                    sentence: i,
                    tree_tokens: tree.token_count(),
                    sentence_tokens: sent.len(),
                });
            }
        }
        let n = self.n_tokens();
        let mut seen: BTreeSet<Span> = BTreeSet::new();
        for (ci, cluster) in self.clusters.iter().enumerate() {
            if cluster.is_empty() {
                return Err(schema(format!("cluster {} is empty", ci)));
            }
            let mut in_cluster: BTreeSet<Span> = BTreeSet::new();
            for &(start, end) in cluster {
                if start > end || end >= n {
                    return Err(CorpusError::SpanOutOfRange {
                        location: where_.to_string(),
                        span: (start, end),
                        n_tokens: n,
                    });
                }
                if !in_cluster.insert((start, end)) {
                    return Err(schema(format!(
                        "cluster {} repeats span ({}, {})",
                        ci, start, end
                    )));
                }
                if !seen.insert((start, end)) {
                    return Err(schema(format!(
                        "span ({}, {}) appears in more than one cluster",
                        start, end
                    )));
                }
            }
        }
        for &(start, end, ref label) in &self.ner {
            if start > end || end >= n {
                return Err(CorpusError::SpanOutOfRange {
                    location: where_.to_string(),
                    span: (start, end),
                    n_tokens: n,
                });
            }
            if label.is_empty() {
                return Err(schema(format!("ner span ({}, {}) has an empty label", start, end)));
            }
        }
        Ok(())
    }

    /// Text of a mention span, tokens joined by single spaces.
    pub fn span_text(&self, span: Span) -> String {
        (span.0..=span.1).map(|i| self.token(i)).collect::<Vec<_>>().join(" ")
    }
}

/// Read and validate a JSONL corpus.
pub fn read_jsonl(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let reader = std::io::BufReader::new(file);
    let mut docs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let where_ = format!("{}:{}", path.display(), lineno + 1);
        let doc: Document = serde_json::from_str(&line).map_err(|e| CorpusError::SchemaError {
            location: where_.clone(),
            detail: e.to_string(),
        })?;
        doc.validate(&where_)?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Write documents as JSONL (one JSON object per line).
pub fn write_jsonl(path: &Path, docs: &[Document]) -> Result<(), CorpusError> {
    let mut file = std::fs::File::create(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    for doc in docs {
        let line = serde_json::to_string(doc).expect("document serialization cannot fail");
        writeln!(file, "{}", line).map_err(|e| CorpusError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    }
    Ok(())
}
