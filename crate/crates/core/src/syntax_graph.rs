//! Compilation of per-sentence constituent trees into one document-level
//! typed directed graph, plus the initial constituent-node embeddings.
//!
//! Node numbering is global: token nodes occupy `0..n`, constituent nodes
//! `n..n+m` (all tree nodes, preterminals included, across all sentences).
//! Edge types:
//!
//! * `ParentChild` / `ChildParent` — reciprocal pair for every direct tree
//!   link;
//! * `GrandparentGrandchild` / `GrandchildGrandparent` — reciprocal pair for
//!   every 2-hop ancestor path (parent-of-parent), when enabled;
//! * `SelfLoop` — one per constituent node (token nodes get their self-loop
//!   inside the token-update attention instead, so it is not a graph edge);
//! * `ConstituentToken` — unidirectional edges from a constituent to the
//!   first and last token of its yield (one edge when they coincide).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{parse_ptb, CorpusError, Document};
use crate::tensor::{Matrix, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeType {
    ParentChild,
    ChildParent,
    GrandparentGrandchild,
    GrandchildGrandparent,
    SelfLoop,
    ConstituentToken,
}

impl EdgeType {
    /// Constituent-constituent types in canonical order, full graph.
    pub const CC_FULL: [EdgeType; 5] = [
        EdgeType::ParentChild,
        EdgeType::ChildParent,
        EdgeType::GrandparentGrandchild,
        EdgeType::GrandchildGrandparent,
        EdgeType::SelfLoop,
    ];

    /// Constituent-constituent types without the 2-hop pair (the plain-tree
    /// ablation).
    pub const CC_VANILLA: [EdgeType; 3] =
        [EdgeType::ParentChild, EdgeType::ChildParent, EdgeType::SelfLoop];

    /// The reciprocal type, if this type is one of a directed pair.
    pub fn reciprocal(self) -> Option<EdgeType> {
        match self {
            EdgeType::ParentChild => Some(EdgeType::ChildParent),
            EdgeType::ChildParent => Some(EdgeType::ParentChild),
            EdgeType::GrandparentGrandchild => Some(EdgeType::GrandchildGrandparent),
            EdgeType::GrandchildGrandparent => Some(EdgeType::GrandparentGrandchild),
            EdgeType::SelfLoop | EdgeType::ConstituentToken => None,
        }
    }
}

/// One constituent node: label text plus global-token yield boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constituent {
    pub label: String,
    /// Inclusive yield over flattened document token indices.
    pub start: usize,
    pub end: usize,
    pub sentence: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    #[serde(rename = "type")]
    pub ty: EdgeType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node {node} (graph has {node_count} nodes)")]
    UnknownNode { node: usize, node_count: usize },
}

/// Options for graph construction.
#[derive(Debug, Clone, Copy)]
pub struct GraphOptions {
    /// Add the grandparent/grandchild 2-hop edge pair.
    pub use_two_hop: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions { use_two_hop: true }
    }
}

/// Document-level typed syntax graph. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntaxGraph {
    pub n_tokens: usize,
    pub constituents: Vec<Constituent>,
    /// All edges, sorted by (type, src, dst); no duplicates.
    pub edges: Vec<Edge>,
}

impl SyntaxGraph {
    pub fn n_constituents(&self) -> usize {
        self.constituents.len()
    }

    /// Total node count (tokens then constituents).
    pub fn node_count(&self) -> usize {
        self.n_tokens + self.constituents.len()
    }

    /// Global node id of constituent `ci`.
    pub fn constituent_node(&self, ci: usize) -> usize {
        self.n_tokens + ci
    }

    /// Constituent-constituent edges of one type, as constituent-local
    /// (src, dst) pairs in sorted order.
    pub fn cc_edges(&self, ty: EdgeType) -> Vec<(usize, usize)> {
        assert_ne!(ty, EdgeType::ConstituentToken, "cc_edges takes constituent-constituent types");
        self.edges
            .iter()
            .filter(|e| e.ty == ty)
            .map(|e| (e.src - self.n_tokens, e.dst - self.n_tokens))
            .collect()
    }

    /// Constituent→token edges as (constituent-local src, token dst).
    pub fn ct_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| e.ty == EdgeType::ConstituentToken)
            .map(|e| (e.src - self.n_tokens, e.dst))
            .collect()
    }

    /// Neighbors of a node under one edge type: `Forward` returns targets of
    /// outgoing edges, `Backward` returns sources of incoming edges, both in
    /// ascending node order.
    pub fn neighbors(
        &self,
        node: usize,
        ty: EdgeType,
        dir: Direction,
    ) -> Result<Vec<usize>, GraphError> {
        if node >= self.node_count() {
            return Err(GraphError::UnknownNode { node, node_count: self.node_count() });
        }
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter(|e| e.ty == ty)
            .filter_map(|e| match dir {
                Direction::Forward if e.src == node => Some(e.dst),
                Direction::Backward if e.dst == node => Some(e.src),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out
            .windows(2)
            .for_each(|w| debug_assert_ne!(w[0], w[1], "duplicate edge in graph"));
        Ok(out)
    }
}

/// Build the typed graph for a document from its bracketed trees.
pub fn build_graph(doc: &Document, options: GraphOptions) -> Result<SyntaxGraph, CorpusError> {
    let n = doc.n_tokens();
    let offsets = doc.sentence_offsets();
    let mut constituents: Vec<Constituent> = Vec::new();
    let mut edges: BTreeSet<Edge> = BTreeSet::new();

    for (si, tree_text) in doc.trees.iter().enumerate() {
        let tree = parse_ptb(tree_text)?;
        let offset = offsets[si];
        let base = constituents.len(); // constituent-local id of this tree's node 0
        for node in &tree.nodes {
            constituents.push(Constituent {
                label: node.label.clone(),
                start: node.start + offset,
                end: node.end + offset,
                sentence: si,
            });
        }
        let gid = |local: usize| n + base + local;

        for (i, node) in tree.nodes.iter().enumerate() {
            // Rule 1: direct tree links, both directions.
            for &child in &node.children {
                edges.insert(Edge { src: gid(i), dst: gid(child), ty: EdgeType::ParentChild });
                edges.insert(Edge { src: gid(child), dst: gid(i), ty: EdgeType::ChildParent });
            }
            // Rule 2: 2-hop ancestor paths.
            if options.use_two_hop {
                if let Some(parent) = node.parent {
                    if let Some(grand) = tree.nodes[parent].parent {
                        edges.insert(Edge {
                            src: gid(grand),
                            dst: gid(i),
                            ty: EdgeType::GrandparentGrandchild,
                        });
                        edges.insert(Edge {
                            src: gid(i),
                            dst: gid(grand),
                            ty: EdgeType::GrandchildGrandparent,
                        });
                    }
                }
            }
            // Self-loop on every constituent node.
            edges.insert(Edge { src: gid(i), dst: gid(i), ty: EdgeType::SelfLoop });
            // Boundary-token edges (collapsed when the yield is one token).
            edges.insert(Edge {
                src: gid(i),
                dst: node.start + offset,
                ty: EdgeType::ConstituentToken,
            });
            edges.insert(Edge {
                src: gid(i),
                dst: node.end + offset,
                ty: EdgeType::ConstituentToken,
            });
        }
    }

    let mut edges: Vec<Edge> = edges.into_iter().collect();
    edges.sort_by_key(|e| (e.ty, e.src, e.dst));
    Ok(SyntaxGraph { n_tokens: n, constituents, edges })
}

/// Initial constituent embeddings: row i is
/// `[h_START(c_i); h_END(c_i); e_type(c_i)]` (differentiable in both the
/// token matrix and the type table). With `type_embedding_only`, the token
/// halves are zeroed: `[0; 0; e_type(c_i)]`.
pub fn init_constituents<'t>(
    tape: &'t Tape,
    graph: &SyntaxGraph,
    h_w: Var<'t>,
    type_rows: Var<'t>,
    label_ids: &[usize],
    type_embedding_only: bool,
) -> Var<'t> {
    let (n, d) = h_w.shape();
    assert_eq!(n, graph.n_tokens, "token matrix rows must equal document token count");
    assert_eq!(
        label_ids.len(),
        graph.n_constituents(),
        "one label id per constituent"
    );
    let m = graph.n_constituents();
    let e = type_rows.gather_rows(std::rc::Rc::new(label_ids.to_vec()));
    if type_embedding_only {
        let zeros = tape.leaf(Matrix::zeros(m, 2 * d));
        return tape.concat_cols(&[zeros, e]);
    }
    let starts: Vec<usize> = graph.constituents.iter().map(|c| c.start).collect();
    let ends: Vec<usize> = graph.constituents.iter().map(|c| c.end).collect();
    let h_start = h_w.gather_rows(std::rc::Rc::new(starts));
    let h_end = h_w.gather_rows(std::rc::Rc::new(ends));
    tape.concat_cols(&[h_start, h_end, e])
}
