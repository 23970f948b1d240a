//! Multi-head graph attention over the typed syntax graph.
//!
//! Each edge type gets its own bidirectional attention layer: a forward pass
//! where every node attends over the targets of its outgoing edges, and a
//! backward pass where it attends over the sources of its incoming edges.
//! The per-type results are combined by a learned soft selection (a shared
//! scorer produces one weight per type per node, normalized across types).
//!
//! Within one attention head the same projection matrix is used both to
//! score an edge and to build the message that is aggregated, and attention
//! logits pass through a LeakyReLU before the per-target softmax.

use std::rc::Rc;

use rand::Rng;

use crate::tensor::{xavier_uniform, Matrix, ParamId, ParamStore, Tape, Var};

/// Default negative slope for attention-logit LeakyReLU.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, thiserror::Error)]
pub enum GatError {
    #[error("expected {expected} edge-type inputs, got {got}")]
    TypeCountMismatch { expected: usize, got: usize },
}

/// Inspection sink threaded through forward passes. Every recorded quantity
/// is a plain number so downstream checks stay simple.
#[derive(Debug, Clone, Default)]
pub struct Probes {
    /// One entry per attention target that has at least one incident edge:
    /// the sum of its attention weights (1 up to rounding).
    pub attention_sums: Vec<f64>,
    /// One entry per node row in each type-integration call: the sum of its
    /// per-type weights (1 up to rounding).
    pub type_weight_sums: Vec<f64>,
    /// Per fusion-gate call: (min, mean, max) of the gate activations.
    pub gate_values: Vec<(f64, f64, f64)>,
    /// Per fusion-gate call: the full (original, infused, fused) matrices,
    /// for checking that fusion stays elementwise between its inputs.
    pub fusions: Vec<(Matrix, Matrix, Matrix)>,
    /// One entry per scored span: total probability mass of its antecedent
    /// distribution including the null option (1 up to rounding).
    pub antecedent_sums: Vec<f64>,
}

impl Probes {
    pub fn record_attention(&mut self, alpha: &Matrix, seg: &[usize]) {
        let groups = seg.iter().copied().max().map_or(0, |x| x + 1);
        let mut sums = vec![0.0; groups];
        let mut seen = vec![false; groups];
        for (k, &g) in seg.iter().enumerate() {
            sums[g] += alpha.get(k, 0);
            seen[g] = true;
        }
        for (g, s) in sums.into_iter().enumerate() {
            if seen[g] {
                self.attention_sums.push(s);
            }
        }
    }

    pub fn record_gate(&mut self, gate: &Matrix) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut total = 0.0;
        let count = (gate.rows() * gate.cols()) as f64;
        for i in 0..gate.rows() {
            for &v in gate.row(i) {
                min = min.min(v);
                max = max.max(v);
                total += v;
            }
        }
        if count > 0.0 {
            self.gate_values.push((min, total / count, max));
        }
    }
}

/// Two-layer feed-forward block with a ReLU between the layers.
#[derive(Debug, Clone)]
pub struct Ffnn {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl Ffnn {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_hidden: usize,
        d_out: usize,
        rng: &mut impl Rng,
    ) -> Ffnn {
        Ffnn {
            w1: store.register(format!("{prefix}.w1"), xavier_uniform(rng, d_in, d_hidden)),
            b1: store.register(format!("{prefix}.b1"), Matrix::zeros(1, d_hidden)),
            w2: store.register(format!("{prefix}.w2"), xavier_uniform(rng, d_hidden, d_out)),
            b2: store.register(format!("{prefix}.b2"), Matrix::zeros(1, d_out)),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Var<'t> {
        let h = x
            .matmul(tape.param(store, self.w1))
            .add_row(tape.param(store, self.b1))
            .relu();
        h.matmul(tape.param(store, self.w2)).add_row(tape.param(store, self.b2))
    }
}

#[derive(Debug, Clone)]
struct GatHead {
    /// Shared projection: scores and messages both use it.
    w: ParamId,
    /// Attention vector of shape (2·dh, 1); the first dh rows score the
    /// target side, the last dh rows the source side.
    a: ParamId,
    dh: usize,
}

/// One single-direction attention layer: K heads, each projecting to
/// `d_out / K` columns, outputs concatenated.
#[derive(Debug, Clone)]
pub struct GatLayer {
    heads: Vec<GatHead>,
    slope: f64,
    d_out: usize,
}

impl GatLayer {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_out: usize,
        n_heads: usize,
        slope: f64,
        rng: &mut impl Rng,
    ) -> GatLayer {
        assert!(n_heads > 0, "need at least one attention head");
        assert_eq!(d_out % n_heads, 0, "head count must divide the output width");
        let dh = d_out / n_heads;
        let heads = (0..n_heads)
            .map(|k| GatHead {
                w: store.register(format!("{prefix}.h{k}.w"), xavier_uniform(rng, d_in, dh)),
                a: store.register(format!("{prefix}.h{k}.a"), xavier_uniform(rng, 2 * dh, 1)),
                dh,
            })
            .collect();
        GatLayer { heads, slope, d_out }
    }

    pub fn output_width(&self) -> usize {
        self.d_out
    }

    /// Aggregation over edges (tgt[k] ← src[k]) within one node matrix:
    /// each target row attends over its incident source rows. Targets with
    /// no edges produce zero rows.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        h: Var<'t>,
        tgt: &Rc<Vec<usize>>,
        src: &Rc<Vec<usize>>,
        mut probes: Option<&mut Probes>,
    ) -> Var<'t> {
        assert_eq!(tgt.len(), src.len(), "edge lists must pair up");
        let n = h.shape().0;
        let mut outs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let p = h.matmul(tape.param(store, head.w));
            let a = tape.param(store, head.a);
            let a_l = a.gather_rows(Rc::new((0..head.dh).collect()));
            let a_r = a.gather_rows(Rc::new((head.dh..2 * head.dh).collect()));
            let score_t = p.matmul(a_l);
            let score_s = p.matmul(a_r);
            let logits = score_t.gather_rows(Rc::clone(tgt)) + score_s.gather_rows(Rc::clone(src));
            let alpha = logits.leaky_relu(self.slope).segment_softmax(Rc::clone(tgt));
            if let Some(pr) = probes.as_deref_mut() {
                pr.record_attention(&alpha.value(), tgt);
            }
            let messages = p.gather_rows(Rc::clone(src)).scale_rows(alpha);
            outs.push(messages.scatter_add_rows(Rc::clone(tgt), n).relu());
        }
        tape.concat_cols(&outs)
    }
}

/// Bidirectional attention for one edge type: a forward layer where node u
/// of edge (u, v) attends over its outgoing targets, and a backward layer
/// where node v attends over its incoming sources. The two results are
/// summed.
#[derive(Debug, Clone)]
pub struct BiGatLayer {
    pub fwd: GatLayer,
    pub bwd: GatLayer,
}

impl BiGatLayer {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d: usize,
        n_heads: usize,
        slope: f64,
        rng: &mut impl Rng,
    ) -> BiGatLayer {
        BiGatLayer {
            fwd: GatLayer::register(store, &format!("{prefix}.fwd"), d, d, n_heads, slope, rng),
            bwd: GatLayer::register(store, &format!("{prefix}.bwd"), d, d, n_heads, slope, rng),
        }
    }

    /// `edges` are graph-direction pairs (u, v).
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        h: Var<'t>,
        edges: &[(usize, usize)],
        mut probes: Option<&mut Probes>,
    ) -> Var<'t> {
        let us: Rc<Vec<usize>> = Rc::new(edges.iter().map(|e| e.0).collect());
        let vs: Rc<Vec<usize>> = Rc::new(edges.iter().map(|e| e.1).collect());
        let hf = self.fwd.forward(tape, store, h, &us, &vs, probes.as_deref_mut());
        let hb = self.bwd.forward(tape, store, h, &vs, &us, probes);
        hf + hb
    }
}

/// Learned soft selection over per-type node representations: a shared
/// two-layer scorer maps each representation to one logit per node, logits
/// are normalized across types per node, and representations are summed
/// under those weights.
#[derive(Debug, Clone)]
pub struct MultiTypeIntegrator {
    score: Ffnn,
    n_types: usize,
}

impl MultiTypeIntegrator {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d: usize,
        n_types: usize,
        rng: &mut impl Rng,
    ) -> MultiTypeIntegrator {
        MultiTypeIntegrator {
            score: Ffnn::register(store, &format!("{prefix}.score"), d, d, 1, rng),
            n_types,
        }
    }

    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        reps: &[Var<'t>],
        probes: Option<&mut Probes>,
    ) -> Result<Var<'t>, GatError> {
        if reps.len() != self.n_types {
            return Err(GatError::TypeCountMismatch { expected: self.n_types, got: reps.len() });
        }
        let logits: Vec<Var<'t>> =
            reps.iter().map(|&r| self.score.forward(tape, store, r)).collect();
        let weights = tape.concat_cols(&logits).row_softmax();
        if let Some(pr) = probes {
            let w = weights.value();
            for i in 0..w.rows() {
                pr.type_weight_sums.push(w.row(i).iter().sum());
            }
        }
        let mut out = reps[0].scale_rows(weights.slice_cols(0, 1));
        for (t, &rep) in reps.iter().enumerate().skip(1) {
            out = out + rep.scale_rows(weights.slice_cols(t, 1));
        }
        Ok(out)
    }
}

/// The full constituent-side update: one bidirectional attention layer per
/// edge type plus the type integrator.
#[derive(Debug, Clone)]
pub struct MultiBiGat {
    pub layers: Vec<BiGatLayer>,
    pub integrator: MultiTypeIntegrator,
}

impl MultiBiGat {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d: usize,
        n_heads: usize,
        slope: f64,
        type_names: &[&str],
        rng: &mut impl Rng,
    ) -> MultiBiGat {
        let layers = type_names
            .iter()
            .map(|name| BiGatLayer::register(store, &format!("{prefix}.{name}"), d, n_heads, slope, rng))
            .collect();
        let integrator =
            MultiTypeIntegrator::register(store, &format!("{prefix}.mix"), d, type_names.len(), rng);
        MultiBiGat { layers, integrator }
    }

    /// `edge_lists[t]` holds the (u, v) pairs for type t, aligned with the
    /// registered type order.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        h_c: Var<'t>,
        edge_lists: &[Vec<(usize, usize)>],
        mut probes: Option<&mut Probes>,
    ) -> Result<Var<'t>, GatError> {
        if edge_lists.len() != self.layers.len() {
            return Err(GatError::TypeCountMismatch {
                expected: self.layers.len(),
                got: edge_lists.len(),
            });
        }
        let reps: Vec<Var<'t>> = self
            .layers
            .iter()
            .zip(edge_lists)
            .map(|(layer, edges)| layer.forward(tape, store, h_c, edges, probes.as_deref_mut()))
            .collect();
        self.integrator.forward(tape, store, &reps, probes)
    }
}
