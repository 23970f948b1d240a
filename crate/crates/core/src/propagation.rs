//! Iterated syntax-to-token message propagation.
//!
//! Each layer rebuilds constituent embeddings from the current token matrix
//! (boundary tokens plus a label embedding, projected to the hidden width),
//! runs the typed bidirectional graph attention over constituents, then
//! updates every token by attending over the constituents whose yield it
//! starts or ends — plus a virtual self-edge so a token can keep its own
//! content. After the final layer a learned sigmoid gate blends the
//! syntax-infused token matrix with the original one.

use std::rc::Rc;

use rand::Rng;

use crate::gat::{GatError, MultiBiGat, Probes};
use crate::syntax_graph::{init_constituents, EdgeType, SyntaxGraph};
use crate::tensor::{xavier_uniform, Matrix, ParamId, ParamStore, Tape, Var};

fn type_key(ty: EdgeType) -> &'static str {
    match ty {
        EdgeType::ParentChild => "parent_child",
        EdgeType::ChildParent => "child_parent",
        EdgeType::GrandparentGrandchild => "grandparent_grandchild",
        EdgeType::GrandchildGrandparent => "grandchild_grandparent",
        EdgeType::SelfLoop => "self_loop",
        EdgeType::ConstituentToken => "constituent_token",
    }
}

/// Token update: multi-head attention where each token attends over the
/// constituents it bounds plus itself. Token targets and the virtual
/// self-edge sources share one projection per head; constituent sources get
/// their own (their width differs).
#[derive(Debug, Clone)]
pub struct TokenGat {
    heads: Vec<TokenGatHead>,
    slope: f64,
}

#[derive(Debug, Clone)]
struct TokenGatHead {
    w_tok: ParamId,
    w_cons: ParamId,
    a: ParamId,
    dh: usize,
}

impl TokenGat {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d_tok: usize,
        d_cons: usize,
        n_heads: usize,
        slope: f64,
        rng: &mut impl Rng,
    ) -> TokenGat {
        assert!(n_heads > 0, "need at least one attention head");
        assert_eq!(d_tok % n_heads, 0, "head count must divide the token width");
        let dh = d_tok / n_heads;
        let heads = (0..n_heads)
            .map(|k| TokenGatHead {
                w_tok: store.register(format!("{prefix}.h{k}.w_tok"), xavier_uniform(rng, d_tok, dh)),
                w_cons: store
                    .register(format!("{prefix}.h{k}.w_cons"), xavier_uniform(rng, d_cons, dh)),
                a: store.register(format!("{prefix}.h{k}.a"), xavier_uniform(rng, 2 * dh, 1)),
                dh,
            })
            .collect();
        TokenGat { heads, slope }
    }

    /// `ct_edges` are (constituent-local source, token target) pairs.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        h_tok: Var<'t>,
        h_cons: Var<'t>,
        ct_edges: &[(usize, usize)],
        mut probes: Option<&mut Probes>,
    ) -> Var<'t> {
        let n = h_tok.shape().0;
        let m = h_cons.shape().0;
        // Source indexing inside the stacked [constituents; tokens] matrix:
        // constituent c is row c, token i is row m + i.
        let mut tgt = Vec::with_capacity(ct_edges.len() + n);
        let mut src = Vec::with_capacity(ct_edges.len() + n);
        for &(c, t) in ct_edges {
            tgt.push(t);
            src.push(c);
        }
        for i in 0..n {
            tgt.push(i);
            src.push(m + i);
        }
        let tgt = Rc::new(tgt);
        let src = Rc::new(src);

        let mut outs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let p_tok = h_tok.matmul(tape.param(store, head.w_tok));
            let p_cons = h_cons.matmul(tape.param(store, head.w_cons));
            let p_src = tape.concat_rows(&[p_cons, p_tok]);
            let a = tape.param(store, head.a);
            let a_l = a.gather_rows(Rc::new((0..head.dh).collect()));
            let a_r = a.gather_rows(Rc::new((head.dh..2 * head.dh).collect()));
            let logits = p_tok.matmul(a_l).gather_rows(Rc::clone(&tgt))
                + p_src.matmul(a_r).gather_rows(Rc::clone(&src));
            let alpha = logits.leaky_relu(self.slope).segment_softmax(Rc::clone(&tgt));
            if let Some(pr) = probes.as_deref_mut() {
                pr.record_attention(&alpha.value(), &tgt);
            }
            let messages = p_src.gather_rows(Rc::clone(&src)).scale_rows(alpha);
            outs.push(messages.scatter_add_rows(Rc::clone(&tgt), n).relu());
        }
        tape.concat_cols(&outs)
    }
}

/// Sigmoid gate blending the original token matrix with the syntax-infused
/// one, entrywise: `f ⊙ original + (1 − f) ⊙ infused`.
#[derive(Debug, Clone)]
pub struct GateFusion {
    w: ParamId,
    b: ParamId,
}

impl GateFusion {
    pub fn register(store: &mut ParamStore, prefix: &str, d: usize, rng: &mut impl Rng) -> GateFusion {
        GateFusion {
            w: store.register(format!("{prefix}.w"), xavier_uniform(rng, 2 * d, d)),
            b: store.register(format!("{prefix}.b"), Matrix::zeros(1, d)),
        }
    }

    pub fn fuse<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        original: Var<'t>,
        infused: Var<'t>,
        probes: Option<&mut Probes>,
    ) -> Var<'t> {
        let f = tape
            .concat_cols(&[original, infused])
            .matmul(tape.param(store, self.w))
            .add_row(tape.param(store, self.b))
            .sigmoid();
        let fused = f * original + f.affine(-1.0, 1.0) * infused;
        if let Some(pr) = probes {
            pr.record_gate(&f.value());
            pr.fusions.push((
                original.value().as_ref().clone(),
                infused.value().as_ref().clone(),
                fused.value().as_ref().clone(),
            ));
        }
        fused
    }
}

/// Configuration of the full syntax encoder stack.
#[derive(Debug, Clone)]
pub struct SyntaxEncoderConfig {
    /// Token representation width.
    pub d_token: usize,
    /// Constituent label embedding width.
    pub d_type: usize,
    /// Constituent hidden width used by the graph attention.
    pub d_hidden: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub leaky_slope: f64,
    /// Drop the 2-hop edge types (plain-tree ablation).
    pub vanilla_tree: bool,
    /// Initialize constituents from label embeddings only.
    pub type_embedding_only: bool,
    /// Blend with the original tokens through the sigmoid gate; when false
    /// the infused matrix is returned as-is.
    pub use_gate: bool,
}

#[derive(Debug, Clone)]
struct PropLayer {
    /// (2·d_token + d_type) → d_hidden projection, no bias.
    proj: ParamId,
    cc: MultiBiGat,
    token: TokenGat,
}

/// The full stack: L propagation layers plus the optional fusion gate.
#[derive(Debug, Clone)]
pub struct SyntaxEncoder {
    type_table: ParamId,
    layers: Vec<PropLayer>,
    gate: Option<GateFusion>,
    types: Vec<EdgeType>,
    type_embedding_only: bool,
}

impl SyntaxEncoder {
    /// `n_labels` counts distinct constituent labels; row 0 of the embedding
    /// table is reserved for unknown labels.
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        cfg: &SyntaxEncoderConfig,
        n_labels: usize,
        rng: &mut impl Rng,
    ) -> SyntaxEncoder {
        assert!(cfg.n_layers > 0, "need at least one propagation layer");
        let types: Vec<EdgeType> = if cfg.vanilla_tree {
            EdgeType::CC_VANILLA.to_vec()
        } else {
            EdgeType::CC_FULL.to_vec()
        };
        let type_table = store.register(
            format!("{prefix}.type_table"),
            crate::tensor::normal_init(rng, n_labels + 1, cfg.d_type, 0.1),
        );
        let type_names: Vec<&str> = types.iter().map(|&t| type_key(t)).collect();
        let layers = (0..cfg.n_layers)
            .map(|l| PropLayer {
                proj: store.register(
                    format!("{prefix}.layer{l}.proj"),
                    xavier_uniform(rng, 2 * cfg.d_token + cfg.d_type, cfg.d_hidden),
                ),
                cc: MultiBiGat::register(
                    store,
                    &format!("{prefix}.layer{l}.cc"),
                    cfg.d_hidden,
                    cfg.n_heads,
                    cfg.leaky_slope,
                    &type_names,
                    rng,
                ),
                token: TokenGat::register(
                    store,
                    &format!("{prefix}.layer{l}.tok"),
                    cfg.d_token,
                    cfg.d_hidden,
                    cfg.n_heads,
                    cfg.leaky_slope,
                    rng,
                ),
            })
            .collect();
        let gate = cfg
            .use_gate
            .then(|| GateFusion::register(store, &format!("{prefix}.gate"), cfg.d_token, rng));
        SyntaxEncoder {
            type_table,
            layers,
            gate,
            types,
            type_embedding_only: cfg.type_embedding_only,
        }
    }

    /// Edge types this encoder integrates, in registration order.
    pub fn edge_types(&self) -> &[EdgeType] {
        &self.types
    }

    /// Run the stack over one document's tokens. `label_ids` maps each
    /// constituent to its row in the label embedding table (0 = unknown).
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        h_w: Var<'t>,
        graph: &SyntaxGraph,
        label_ids: &[usize],
        mut probes: Option<&mut Probes>,
    ) -> Result<Var<'t>, GatError> {
        let edge_lists: Vec<Vec<(usize, usize)>> =
            self.types.iter().map(|&t| graph.cc_edges(t)).collect();
        let ct = graph.ct_edges();
        let mut h_tok = h_w;
        for layer in &self.layers {
            let init = init_constituents(
                tape,
                graph,
                h_tok,
                tape.param(store, self.type_table),
                label_ids,
                self.type_embedding_only,
            );
            let h_c = init.matmul(tape.param(store, layer.proj));
            let h_c = layer.cc.forward(tape, store, h_c, &edge_lists, probes.as_deref_mut())?;
            h_tok = layer.token.forward(tape, store, h_tok, h_c, &ct, probes.as_deref_mut());
        }
        Ok(match &self.gate {
            Some(g) => g.fuse(tape, store, h_w, h_tok, probes),
            None => h_tok,
        })
    }
}
