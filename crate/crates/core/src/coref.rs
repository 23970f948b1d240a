//! Span-ranking coreference head: span enumeration, mention scoring,
//! aggressive pruning, coarse-to-fine antecedent filtering, pairwise
//! scoring, the marginal log-likelihood training loss, and greedy cluster
//! decoding.
//!
//! Every span receives a representation `g = [h_start; h_end; ĥ; w]` where
//! `ĥ` is an attention-weighted sum of the span's token vectors (scores from
//! a learned projection, softmaxed within the span) and `w` embeds the
//! bucketed span width. A two-layer scorer turns `g` into a mention score
//! `s_m`; the top ⌈λn⌉ spans survive. For a kept span i and candidate
//! antecedent j, the final score is `s(i,j) = s_m(i) + s_m(j) + s_c(i,j)`
//! with `s_c` a two-layer scorer over `[g_i, g_j, g_i⊙g_j, φ(i,j)]`, and the
//! dummy antecedent ε is pinned at score 0. Candidate lists can first be cut
//! to the top-c by the cheap score `s_m(i) + s_m(j) + g_i·W_c·g_j`.

use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng;

use crate::corpus::Document;
use crate::gat::{Ffnn, Probes};
use crate::tensor::{xavier_uniform, Matrix, ParamId, ParamStore, Tape, Var};

#[derive(Debug, Clone, thiserror::Error)]
pub enum CorefError {
    #[error("candidate antecedent {j} does not precede span {i}")]
    OrderViolation { i: usize, j: usize },
}

/// A candidate mention span, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SpanCandidate {
    pub start: usize,
    pub end: usize,
}

impl SpanCandidate {
    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Width bucket: widths 1..=9 get their own rows, 10 and above share the
/// last of the 10 rows.
pub fn width_bucket(width: usize) -> usize {
    assert!(width >= 1, "span width is at least one token");
    width.min(10) - 1
}

pub const N_WIDTH_BUCKETS: usize = 10;

/// Distance bucket over kept-span index distance (≥ 1):
/// {1, 2, 3, 4, 5–7, 8–15, 16–31, 32–63, 64+} → 0..=8.
pub fn distance_bucket(distance: usize) -> usize {
    match distance {
        0 => panic!("antecedent distance is at least one"),
        1 => 0,
        2 => 1,
        3 => 2,
        4 => 3,
        5..=7 => 4,
        8..=15 => 5,
        16..=31 => 6,
        32..=63 => 7,
        _ => 8,
    }
}

pub const N_DISTANCE_BUCKETS: usize = 9;

/// Enumerate all spans up to `max_width` tokens, ordered by (start, end).
/// With `within_sentences` spans never cross a sentence boundary.
pub fn enumerate_spans(
    doc: &Document,
    max_width: usize,
    within_sentences: bool,
) -> Vec<SpanCandidate> {
    assert!(max_width >= 1, "max span width is at least one");
    let n = doc.n_tokens();
    let mut out = Vec::new();
    for start in 0..n {
        let sentence = doc.sentence_of(start);
        for end in start..n.min(start + max_width) {
            if within_sentences && doc.sentence_of(end) != sentence {
                break;
            }
            out.push(SpanCandidate { start, end });
        }
    }
    out
}

/// Keep the top ⌈λn⌉ spans by mention score (ties broken toward the earlier
/// (start, end)), returning their indices re-sorted into (start, end) order.
pub fn prune(spans: &[SpanCandidate], s_m: &[f64], lambda: f64, n_tokens: usize) -> Vec<usize> {
    assert!(lambda > 0.0 && lambda <= 1.0, "prune ratio must lie in (0, 1]");
    assert_eq!(spans.len(), s_m.len(), "one score per span");
    let keep = ((lambda * n_tokens as f64).ceil() as usize).min(spans.len());
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by(|&a, &b| {
        s_m[b]
            .partial_cmp(&s_m[a])
            .expect("mention scores are finite")
            .then_with(|| (spans[a].start, spans[a].end).cmp(&(spans[b].start, spans[b].end)))
    });
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_by_key(|&k| (spans[k].start, spans[k].end));
    kept
}

/// Per-pair feature rows, parallel to a pair list.
#[derive(Debug, Clone, Default)]
pub struct PairFeatureIds {
    pub distance: Vec<usize>,
    pub genre: Vec<usize>,
    pub same_speaker: Vec<usize>,
}

impl PairFeatureIds {
    /// Features for kept-index pairs (i, j): bucketed kept-index distance,
    /// the document genre, and whether the two spans' start tokens share a
    /// speaker.
    pub fn build(
        spans: &[SpanCandidate],
        pairs: &[(usize, usize)],
        speakers: &[&str],
        genre_id: usize,
    ) -> PairFeatureIds {
        let mut out = PairFeatureIds::default();
        for &(i, j) in pairs {
            out.distance.push(distance_bucket(i - j));
            out.genre.push(genre_id);
            let same = speakers[spans[i].start] == speakers[spans[j].start];
            out.same_speaker.push(usize::from(same));
        }
        out
    }
}

/// Scores and distributions for every kept span. Distributions list the
/// dummy antecedent first: `distribution[i][0]` is P(ε), and
/// `distribution[i][1 + k]` pairs with `candidates[i][k]`.
#[derive(Debug, Clone)]
pub struct AntecedentTable {
    pub spans: Vec<SpanCandidate>,
    pub candidates: Vec<Vec<usize>>,
    pub scores: Vec<Vec<f64>>,
    pub distribution: Vec<Vec<f64>>,
}

impl AntecedentTable {
    /// Softmax over [ε = 0, scores...] with max subtraction.
    fn softmax_with_dummy(scores: &[f64]) -> Vec<f64> {
        let max = scores.iter().copied().fold(0.0f64, f64::max);
        let mut out = Vec::with_capacity(scores.len() + 1);
        out.push((0.0 - max).exp());
        out.extend(scores.iter().map(|s| (s - max).exp()));
        let total: f64 = out.iter().sum();
        for v in &mut out {
            *v /= total;
        }
        out
    }

    /// The argmax antecedent of span i, or None when ε wins. The dummy wins
    /// all ties, including exact zeros.
    pub fn best_antecedent(&self, i: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &s) in self.scores[i].iter().enumerate() {
            let better = match best {
                None => s > 0.0,
                Some((_, bs)) => s > bs,
            };
            if better {
                best = Some((self.candidates[i][k], s));
            }
        }
        best.map(|(j, _)| j)
    }
}

/// Greedy decoding: link every span to its best-scoring antecedent when that
/// beats the dummy, take connected components, and drop singletons. Clusters
/// come out sorted by first mention, mentions by (start, end).
pub fn decode(table: &AntecedentTable) -> Vec<Vec<(usize, usize)>> {
    let n = table.spans.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut linked = vec![false; n];
    for i in 0..n {
        if let Some(j) = table.best_antecedent(i) {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a] = b;
            }
            linked[i] = true;
            linked[j] = true;
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..n {
        if linked[i] {
            groups.entry(find(&mut parent, i)).or_default().push(i);
        }
    }
    let mut clusters: Vec<Vec<(usize, usize)>> = groups
        .into_values()
        .filter(|g| g.len() >= 2)
        .map(|mut g| {
            g.sort();
            g.into_iter().map(|i| (table.spans[i].start, table.spans[i].end)).collect()
        })
        .collect();
    clusters.sort();
    clusters
}

/// Configuration of the span-ranking head.
#[derive(Debug, Clone)]
pub struct CorefHeadConfig {
    /// Token representation width feeding the head.
    pub d_token: usize,
    /// Width of each feature embedding (span width, distance, genre,
    /// speaker).
    pub feature_width: usize,
    /// Hidden width of the two-layer scorers.
    pub hidden: usize,
    pub max_span_width: usize,
    /// λ: keep ⌈λn⌉ spans.
    pub prune_ratio: f64,
    /// c: candidate antecedents surviving the coarse filter.
    pub coarse_top_c: usize,
    pub spans_within_sentences: bool,
    /// Distinct genres (row 0 of the genre table is reserved for unknown).
    pub n_genres: usize,
}

/// The trainable head. The coarse bilinear matrix participates only in
/// candidate filtering (computed from values, so it receives no gradient);
/// with the default c it is effectively inactive at desk scale.
#[derive(Debug, Clone)]
pub struct CorefHead {
    cfg: CorefHeadConfig,
    head_score: ParamId,
    width_table: ParamId,
    distance_table: ParamId,
    genre_table: ParamId,
    speaker_table: ParamId,
    mention_ffnn: Ffnn,
    pair_ffnn: Ffnn,
    coarse_w: ParamId,
}

/// Everything the head produces for one document.
pub struct CorefOutput<'t> {
    pub loss: Var<'t>,
    pub table: AntecedentTable,
}

impl CorefHead {
    pub fn span_width(cfg: &CorefHeadConfig) -> usize {
        3 * cfg.d_token + cfg.feature_width
    }

    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        cfg: &CorefHeadConfig,
        rng: &mut impl Rng,
    ) -> CorefHead {
        assert!(cfg.max_span_width >= 1);
        let d_g = Self::span_width(cfg);
        let f = cfg.feature_width;
        CorefHead {
            head_score: store
                .register(format!("{prefix}.head_score"), xavier_uniform(rng, cfg.d_token, 1)),
            width_table: store.register(
                format!("{prefix}.width_table"),
                crate::tensor::normal_init(rng, N_WIDTH_BUCKETS, f, 0.1),
            ),
            distance_table: store.register(
                format!("{prefix}.distance_table"),
                crate::tensor::normal_init(rng, N_DISTANCE_BUCKETS, f, 0.1),
            ),
            genre_table: store.register(
                format!("{prefix}.genre_table"),
                crate::tensor::normal_init(rng, cfg.n_genres + 1, f, 0.1),
            ),
            speaker_table: store.register(
                format!("{prefix}.speaker_table"),
                crate::tensor::normal_init(rng, 2, f, 0.1),
            ),
            mention_ffnn: Ffnn::register(store, &format!("{prefix}.mention"), d_g, cfg.hidden, 1, rng),
            pair_ffnn: Ffnn::register(
                store,
                &format!("{prefix}.pair"),
                3 * d_g + 3 * f,
                cfg.hidden,
                1,
                rng,
            ),
            coarse_w: store.register(format!("{prefix}.coarse_w"), xavier_uniform(rng, d_g, d_g)),
            cfg: cfg.clone(),
        }
    }

    pub fn config(&self) -> &CorefHeadConfig {
        &self.cfg
    }

    /// Build span representations `[h_start; h_end; ĥ; width]` for the given
    /// spans from the token matrix.
    pub fn span_representations<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        h: Var<'t>,
        spans: &[SpanCandidate],
    ) -> Var<'t> {
        let k = spans.len();
        let starts: Rc<Vec<usize>> = Rc::new(spans.iter().map(|s| s.start).collect());
        let ends: Rc<Vec<usize>> = Rc::new(spans.iter().map(|s| s.end).collect());

        // Flatten (span, member-token) pairs for one segmented softmax.
        let mut member_tok = Vec::new();
        let mut member_span = Vec::new();
        for (si, s) in spans.iter().enumerate() {
            for t in s.start..=s.end {
                member_tok.push(t);
                member_span.push(si);
            }
        }
        let member_tok = Rc::new(member_tok);
        let member_span = Rc::new(member_span);

        let token_scores = h.matmul(tape.param(store, self.head_score));
        let attn = token_scores
            .gather_rows(Rc::clone(&member_tok))
            .segment_softmax(Rc::clone(&member_span));
        let head_vec = h
            .gather_rows(Rc::clone(&member_tok))
            .scale_rows(attn)
            .scatter_add_rows(Rc::clone(&member_span), k);

        let width_ids: Rc<Vec<usize>> =
            Rc::new(spans.iter().map(|s| width_bucket(s.width())).collect());
        let widths = tape.param(store, self.width_table).gather_rows(width_ids);

        let h_start = h.gather_rows(starts);
        let h_end = h.gather_rows(ends);
        tape.concat_cols(&[h_start, h_end, head_vec, widths])
    }

    /// Mention scores, one per row of `g`.
    pub fn mention_scores<'t>(&self, tape: &'t Tape, store: &ParamStore, g: Var<'t>) -> Var<'t> {
        self.mention_ffnn.forward(tape, store, g)
    }

    /// Coarse candidate filter: for each kept span i, keep the top-c earlier
    /// spans j ranked by `s_m(i) + s_m(j) + g_i·W_c·g_j` (computed from
    /// values only). Ties prefer the nearer antecedent. Results come back
    /// sorted ascending.
    pub fn coarse_candidates(
        &self,
        store: &ParamStore,
        g: &Matrix,
        s_m: &[f64],
    ) -> Vec<Vec<usize>> {
        let k = g.rows();
        let w = store.value(self.coarse_w);
        // gw[j] = W_c · g_j, reused across i.
        let gw = g.matmul(&w.transpose());
        (0..k)
            .map(|i| {
                let mut scored: Vec<(f64, usize)> = (0..i)
                    .map(|j| {
                        let bilinear: f64 =
                            (0..g.cols()).map(|d| g.get(i, d) * gw.get(j, d)).sum();
                        (s_m[i] + s_m[j] + bilinear, j)
                    })
                    .collect();
                scored.sort_by(|a, b| {
                    b.0.partial_cmp(&a.0).expect("finite coarse scores").then(b.1.cmp(&a.1))
                });
                let mut kept: Vec<usize> =
                    scored.into_iter().take(self.cfg.coarse_top_c).map(|(_, j)| j).collect();
                kept.sort_unstable();
                kept
            })
            .collect()
    }

    /// Pairwise scores `s(i,j) = s_m(i) + s_m(j) + s_c(i,j)` for an explicit
    /// pair list, as one (pairs × 1) column. Every pair must satisfy j < i.
    pub fn score_pairs<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        g: Var<'t>,
        s_m: Var<'t>,
        pairs: &[(usize, usize)],
        features: &PairFeatureIds,
    ) -> Result<Var<'t>, CorefError> {
        for &(i, j) in pairs {
            if j >= i {
                return Err(CorefError::OrderViolation { i, j });
            }
        }
        assert_eq!(features.distance.len(), pairs.len(), "one feature row per pair");
        let is: Rc<Vec<usize>> = Rc::new(pairs.iter().map(|p| p.0).collect());
        let js: Rc<Vec<usize>> = Rc::new(pairs.iter().map(|p| p.1).collect());
        let gi = g.gather_rows(Rc::clone(&is));
        let gj = g.gather_rows(Rc::clone(&js));
        let product = gi * gj;
        let dist = tape
            .param(store, self.distance_table)
            .gather_rows(Rc::new(features.distance.clone()));
        let genre =
            tape.param(store, self.genre_table).gather_rows(Rc::new(features.genre.clone()));
        let spk = tape
            .param(store, self.speaker_table)
            .gather_rows(Rc::new(features.same_speaker.clone()));
        let input = tape.concat_cols(&[gi, gj, product, dist, genre, spk]);
        let s_c = self.pair_ffnn.forward(tape, store, input);
        Ok(s_c + s_m.gather_rows(is) + s_m.gather_rows(js))
    }

    /// Full forward pass for one document: enumerate, represent, score,
    /// prune, filter, score pairs, and assemble the loss and the antecedent
    /// table.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        h: Var<'t>,
        doc: &Document,
        genre_id: usize,
        probes: Option<&mut Probes>,
    ) -> CorefOutput<'t> {
        let n = doc.n_tokens();
        assert_eq!(h.shape().0, n, "token matrix rows must match the document");
        let all_spans =
            enumerate_spans(doc, self.cfg.max_span_width, self.cfg.spans_within_sentences);
        let g_all = self.span_representations(tape, store, h, &all_spans);
        let s_m_all = self.mention_scores(tape, store, g_all);

        let s_m_values: Vec<f64> = (0..all_spans.len()).map(|r| s_m_all.value().get(r, 0)).collect();
        let kept = prune(&all_spans, &s_m_values, self.cfg.prune_ratio, n);
        let spans: Vec<SpanCandidate> = kept.iter().map(|&k| all_spans[k]).collect();
        let g = g_all.gather_rows(Rc::new(kept.clone()));
        let s_m = s_m_all.gather_rows(Rc::new(kept.clone()));

        let kept_scores: Vec<f64> = kept.iter().map(|&k| s_m_values[k]).collect();
        let candidates = self.coarse_candidates(store, &g.value(), &kept_scores);

        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut pair_seg: Vec<usize> = Vec::new();
        for (i, cands) in candidates.iter().enumerate() {
            for &j in cands {
                pairs.push((i, j));
                pair_seg.push(i);
            }
        }
        let speakers = doc.flat_speakers();
        let features = PairFeatureIds::build(&spans, &pairs, &speakers, genre_id);
        let pair_scores = self
            .score_pairs(tape, store, g, s_m, &pairs, &features)
            .expect("internally generated pairs precede their spans");

        // Stack the dummy scores (pinned at 0) above the pair scores; row i
        // is span i's dummy, row k + p is pair p.
        let k = spans.len();
        let dummy = tape.leaf(Matrix::zeros(k, 1));
        let all_scores = tape.concat_rows(&[dummy, pair_scores]);
        let mut seg_all: Vec<usize> = (0..k).collect();
        seg_all.extend(&pair_seg);
        let seg_all = Rc::new(seg_all);

        // Gold antecedent rows: for span i, every candidate j in the same
        // gold cluster; the dummy row when there are none.
        let cluster_of = gold_cluster_ids(doc, &spans);
        let mut gold_rows: Vec<usize> = Vec::new();
        let mut gold_seg: Vec<usize> = Vec::new();
        let mut has_gold = vec![false; k];
        for (p, &(i, j)) in pairs.iter().enumerate() {
            if let (Some(a), Some(b)) = (cluster_of[i], cluster_of[j]) {
                if a == b {
                    gold_rows.push(k + p);
                    gold_seg.push(i);
                    has_gold[i] = true;
                }
            }
        }
        for (i, &hg) in has_gold.iter().enumerate() {
            if !hg {
                gold_rows.push(i);
                gold_seg.push(i);
            }
        }

        let lse_all = all_scores.segment_log_sum_exp(Rc::clone(&seg_all), k);
        let lse_gold = all_scores
            .gather_rows(Rc::new(gold_rows))
            .segment_log_sum_exp(Rc::new(gold_seg), k);
        let loss = (lse_all - lse_gold).sum();

        // Assemble the value-level table.
        let pair_values = pair_scores.value();
        let mut scores: Vec<Vec<f64>> = vec![Vec::new(); k];
        for (p, &(i, _)) in pairs.iter().enumerate() {
            scores[i].push(pair_values.get(p, 0));
        }
        let distribution: Vec<Vec<f64>> =
            scores.iter().map(|row| AntecedentTable::softmax_with_dummy(row)).collect();
        if let Some(pr) = probes {
            for row in &distribution {
                pr.antecedent_sums.push(row.iter().sum());
            }
        }
        CorefOutput {
            loss,
            table: AntecedentTable { spans, candidates, scores, distribution },
        }
    }
}

/// For each span, the index of the gold cluster it exactly matches, if any.
pub fn gold_cluster_ids(doc: &Document, spans: &[SpanCandidate]) -> Vec<Option<usize>> {
    let mut map: HashMap<(usize, usize), usize> = HashMap::new();
    for (ci, cluster) in doc.clusters.iter().enumerate() {
        for &(s, e) in cluster {
            map.insert((s, e), ci);
        }
    }
    spans.iter().map(|s| map.get(&(s.start, s.end)).copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{check_all_params, normal_init};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_doc() -> Document {
        Document {
            doc_key: "t".into(),
            genre: "nw".into(),
            sentences: vec![
                vec!["Alice".into(), "ran".into()],
                vec!["She".into(), "won".into(), "today".into()],
            ],
            speakers: vec![
                vec!["a".into(), "a".into()],
                vec!["b".into(), "b".into(), "b".into()],
            ],
            trees: vec![
                "(S (NP (NNP Alice)) (VP (VBD ran)))".into(),
                "(S (NP (PRP She)) (VP (VBD won) (NN today)))".into(),
            ],
            clusters: vec![vec![(0, 0), (2, 2)]],
            ner: vec![],
        }
    }

    fn head_cfg() -> CorefHeadConfig {
        CorefHeadConfig {
            d_token: 4,
            feature_width: 3,
            hidden: 5,
            max_span_width: 3,
            prune_ratio: 1.0,
            coarse_top_c: 50,
            spans_within_sentences: true,
            n_genres: 2,
        }
    }

    #[test]
    fn enumeration_matches_the_worked_examples() {
        let mut doc = tiny_doc();
        doc.sentences = vec![vec!["a".into(), "b".into(), "c".into()]];
        doc.speakers = vec![vec!["s".into(); 3]];
        doc.trees = vec!["(S (NN a) (NN b) (NN c))".into()];
        doc.clusters.clear();
        let got: Vec<(usize, usize)> =
            enumerate_spans(&doc, 2, false).iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(got, vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)]);

        doc.sentences = vec![vec!["a".into()]];
        doc.speakers = vec![vec!["s".into()]];
        let got: Vec<(usize, usize)> =
            enumerate_spans(&doc, 2, false).iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(got, vec![(0, 0)]);
    }

    #[test]
    fn enumeration_respects_sentence_boundaries_and_width_one() {
        let doc = tiny_doc(); // sentences of 2 and 3 tokens
        let spans = enumerate_spans(&doc, 4, true);
        assert!(spans.iter().all(|s| doc.sentence_of(s.start) == doc.sentence_of(s.end)));
        assert!(!spans.iter().any(|s| (s.start, s.end) == (1, 2)));
        let unrestricted = enumerate_spans(&doc, 4, false);
        assert!(unrestricted.iter().any(|s| (s.start, s.end) == (1, 2)));
        // Width 1 gives exactly n singletons.
        let singles = enumerate_spans(&doc, 1, true);
        assert_eq!(singles.len(), doc.n_tokens());
    }

    #[test]
    fn bucket_tables_are_exact() {
        let widths: Vec<usize> = (1..=12).map(width_bucket).collect();
        assert_eq!(widths, vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9]);
        let cases = [
            (1, 0),
            (2, 1),
            (3, 2),
            (4, 3),
            (5, 4),
            (7, 4),
            (8, 5),
            (15, 5),
            (16, 6),
            (31, 6),
            (32, 7),
            (63, 7),
            (64, 8),
            (500, 8),
        ];
        for (d, want) in cases {
            assert_eq!(distance_bucket(d), want, "distance {d}");
        }
    }

    #[test]
    fn prune_keeps_ceil_lambda_n_with_stable_ties() {
        let spans: Vec<SpanCandidate> =
            (0..10).map(|i| SpanCandidate { start: i, end: i }).collect();
        // λ=1 keeps all.
        let all = prune(&spans, &vec![0.0; 10], 1.0, 10);
        assert_eq!(all.len(), 10);
        // ⌈0.4 · 10⌉ = 4.
        let scores = vec![0.9, 0.1, 0.5, 0.5, 0.2, 0.8, 0.5, 0.0, 0.3, 0.7];
        let kept = prune(&spans, &scores, 0.4, 10);
        assert_eq!(kept.len(), 4);
        // Top scores are 0.9, 0.8, 0.7, then a three-way tie at 0.5 where the
        // earliest span (index 2) wins the final slot.
        assert_eq!(kept, vec![0, 2, 5, 9]); // re-sorted by (start, end)

        // Monotonicity: min kept ≥ max dropped.
        let kept_min = kept.iter().map(|&k| scores[k]).fold(f64::INFINITY, f64::min);
        let dropped_max = (0..10)
            .filter(|i| !kept.contains(i))
            .map(|i| scores[i])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(kept_min >= dropped_max);
    }

    #[test]
    fn uniform_attention_makes_head_vector_the_span_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let cfg = head_cfg();
        let head = CorefHead::register(&mut store, "c", &cfg, &mut rng);
        // Zero the attention projection: every member token gets equal
        // weight, so ĥ is the plain average.
        *store.value_mut(store.id_of("c.head_score").unwrap()) = Matrix::zeros(4, 1);
        let tape = Tape::new();
        let h = tape.leaf(Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0, 4.0],
            vec![5.0, 6.0, 7.0, 8.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ]));
        let spans = vec![SpanCandidate { start: 0, end: 1 }];
        let g = head.span_representations(&tape, &store, h, &spans);
        let v = g.value();
        assert_eq!(v.shape(), (1, 3 * 4 + 3));
        // Layout: h_start, h_end, mean, width embedding for width 2.
        assert_eq!(&v.row(0)[0..4], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(&v.row(0)[4..8], &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(&v.row(0)[8..12], &[3.0, 4.0, 5.0, 6.0]);
        let width_row = store.value(store.id_of("c.width_table").unwrap()).row(1).to_vec();
        assert_eq!(&v.row(0)[12..15], width_row.as_slice());
    }

    #[test]
    fn score_pairs_rejects_order_violations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        let head = CorefHead::register(&mut store, "c", &head_cfg(), &mut rng);
        let tape = Tape::new();
        let d_g = CorefHead::span_width(&head_cfg());
        let g = tape.leaf(Matrix::filled(3, d_g, 0.1));
        let s_m = tape.leaf(Matrix::zeros(3, 1));
        let feats = PairFeatureIds {
            distance: vec![0],
            genre: vec![0],
            same_speaker: vec![0],
        };
        let err = head.score_pairs(&tape, &store, g, s_m, &[(1, 1)], &feats);
        assert!(matches!(err, Err(CorefError::OrderViolation { i: 1, j: 1 })));
        let err = head.score_pairs(&tape, &store, g, s_m, &[(0, 2)], &feats);
        assert!(matches!(err, Err(CorefError::OrderViolation { i: 0, j: 2 })));
    }

    #[test]
    fn distributions_sum_to_one_and_handle_extremes() {
        // All-zero scores with three candidates: uniform quarters.
        let p = AntecedentTable::softmax_with_dummy(&[0.0, 0.0, 0.0]);
        assert_eq!(p.len(), 4);
        for v in &p {
            assert!((v - 0.25).abs() < 1e-12);
        }
        // A huge single candidate saturates.
        let p = AntecedentTable::softmax_with_dummy(&[1e4]);
        assert!(p[1] > 0.999999 && p[0] < 1e-6);
        // Stability at ±1e3: finite, sums to one, matches the closed form
        // computed through the max-subtracted expression.
        let p = AntecedentTable::softmax_with_dummy(&[1e3, -1e3]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let expect_eps = (-1e3f64).exp() / ((-1e3f64).exp() + 1.0 + (-2e3f64).exp());
        assert!((p[0] - expect_eps).abs() < 1e-15);
        assert!((p[1] - 1.0 / ((-1e3f64).exp() + 1.0 + (-2e3f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn coarse_filter_equals_brute_force_on_twenty_spans() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut store = ParamStore::new();
        let mut cfg = head_cfg();
        cfg.coarse_top_c = 5;
        let head = CorefHead::register(&mut store, "c", &cfg, &mut rng);
        let d_g = CorefHead::span_width(&cfg);
        let g = normal_init(&mut rng, 20, d_g, 1.0);
        let s_m: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = head.coarse_candidates(&store, &g, &s_m);

        let w = store.value(head.coarse_w).clone();
        for i in 0..20 {
            // Brute force: score every j < i independently, rank, cut.
            let mut scored: Vec<(f64, usize)> = (0..i)
                .map(|j| {
                    let mut bilinear = 0.0;
                    for a in 0..d_g {
                        for b in 0..d_g {
                            bilinear += g.get(i, a) * w.get(a, b) * g.get(j, b);
                        }
                    }
                    (s_m[i] + s_m[j] + bilinear, j)
                })
                .collect();
            scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1)));
            let mut want: Vec<usize> = scored.into_iter().take(5).map(|(_, j)| j).collect();
            want.sort_unstable();
            assert_eq!(got[i], want, "span {i}");
            assert!(got[i].len() <= 5);
        }
    }

    #[test]
    fn forward_distributions_are_normalized_and_probed() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut store = ParamStore::new();
        let head = CorefHead::register(&mut store, "c", &head_cfg(), &mut rng);
        let doc = tiny_doc();
        let tape = Tape::new();
        let h = tape.leaf(normal_init(&mut rng, doc.n_tokens(), 4, 0.5));
        let mut probes = Probes::default();
        let out = head.forward(&tape, &store, h, &doc, 1, Some(&mut probes));
        assert!(!out.table.spans.is_empty());
        for row in &out.table.distribution {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(probes.antecedent_sums.len(), out.table.spans.len());
        assert!(probes.antecedent_sums.iter().all(|s| (s - 1.0).abs() < 1e-12));
        // Candidate lists and scores stay aligned.
        for i in 0..out.table.spans.len() {
            assert_eq!(out.table.candidates[i].len(), out.table.scores[i].len());
            assert_eq!(out.table.distribution[i].len(), out.table.scores[i].len() + 1);
            assert!(out.table.candidates[i].iter().all(|&j| j < i));
        }
        assert!(out.loss.value().get(0, 0) > 0.0);
    }

    #[test]
    fn loss_without_gold_clusters_is_sum_of_dummy_surprisals() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut store = ParamStore::new();
        let head = CorefHead::register(&mut store, "c", &head_cfg(), &mut rng);
        let mut doc = tiny_doc();
        doc.clusters.clear();
        let tape = Tape::new();
        let h = tape.leaf(normal_init(&mut rng, doc.n_tokens(), 4, 0.5));
        let out = head.forward(&tape, &store, h, &doc, 1, None);
        let expected: f64 = out.table.distribution.iter().map(|row| -row[0].ln()).sum();
        assert!((out.loss.value().get(0, 0) - expected).abs() < 1e-9);
    }

    #[test]
    fn perfect_scores_drive_the_loss_to_zero() {
        // Construct the loss pieces directly: one span whose only gold
        // antecedent towers over the alternatives.
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut store = ParamStore::new();
        // Width-1 spans only: ⌈λn⌉ = n keeps every singleton, so both gold
        // mentions are guaranteed to survive pruning.
        let mut cfg = head_cfg();
        cfg.max_span_width = 1;
        let head = CorefHead::register(&mut store, "c", &cfg, &mut rng);
        let doc = tiny_doc();
        let tape = Tape::new();
        // Push the pair scorer's final bias very high: every pair score is
        // huge, so for spans with a gold antecedent the gold mass dominates.
        *store.value_mut(store.id_of("c.pair.b2").unwrap()) = Matrix::filled(1, 1, 50.0);
        let h = tape.leaf(Matrix::zeros(doc.n_tokens(), 4));
        let out = head.forward(&tape, &store, h, &doc, 1, None);
        // Gold pairs exist (Alice/She both kept with λ=1); their loss terms
        // vanish. Non-gold spans pay for the inflated pair scores instead,
        // so we check the gold span specifically.
        let gold_span_idx = out
            .table
            .spans
            .iter()
            .position(|s| (s.start, s.end) == (2, 2))
            .expect("pronoun span kept");
        let row = &out.table.distribution[gold_span_idx];
        let gold_candidate = out.table.candidates[gold_span_idx]
            .iter()
            .position(|&j| {
                let s = out.table.spans[j];
                (s.start, s.end) == (0, 0)
            })
            .expect("name candidate present");
        // Not necessarily the single winner (other pairs share the bias),
        // but the dummy is crushed.
        assert!(row[0] < 1e-6);
        assert!(row[gold_candidate + 1] > 0.0);
    }

    #[test]
    fn decode_handles_chains_ties_and_singletons() {
        let spans: Vec<SpanCandidate> =
            (0..4).map(|i| SpanCandidate { start: i, end: i }).collect();
        // All dummy: empty clustering.
        let table = AntecedentTable {
            spans: spans.clone(),
            candidates: vec![vec![], vec![0], vec![1], vec![2]],
            scores: vec![vec![], vec![-1.0], vec![-0.5], vec![-2.0]],
            distribution: vec![vec![1.0], vec![0.7, 0.3], vec![0.6, 0.4], vec![0.9, 0.1]],
        };
        assert!(decode(&table).is_empty());

        // Chain 1←2, 2←3 (scores > 0): one cluster of three; span 0 stays a
        // singleton and is dropped.
        let table = AntecedentTable {
            spans: spans.clone(),
            candidates: vec![vec![], vec![0], vec![1], vec![2]],
            scores: vec![vec![], vec![-1.0], vec![2.0], vec![1.5]],
            distribution: vec![vec![1.0]; 4],
        };
        assert_eq!(decode(&table), vec![vec![(1, 1), (2, 2), (3, 3)]]);

        // Two disjoint links: two clusters.
        let table = AntecedentTable {
            spans: spans.clone(),
            candidates: vec![vec![], vec![0], vec![], vec![2]],
            scores: vec![vec![], vec![0.8], vec![], vec![0.6]],
            distribution: vec![vec![1.0]; 4],
        };
        assert_eq!(decode(&table), vec![vec![(0, 0), (1, 1)], vec![(2, 2), (3, 3)]]);

        // Exact tie with the dummy (score 0) goes to the dummy.
        let table = AntecedentTable {
            spans,
            candidates: vec![vec![], vec![0], vec![], vec![]],
            scores: vec![vec![], vec![0.0], vec![], vec![]],
            distribution: vec![vec![1.0]; 4],
        };
        assert!(decode(&table).is_empty());
    }

    #[test]
    fn shifting_non_dummy_scores_preserves_the_candidate_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let n = 6;
            let spans: Vec<SpanCandidate> =
                (0..n).map(|i| SpanCandidate { start: i, end: i }).collect();
            let candidates: Vec<Vec<usize>> = (0..n).map(|i| (0..i).collect()).collect();
            let scores: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..i).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let table = AntecedentTable {
                spans: spans.clone(),
                candidates: candidates.clone(),
                scores: scores.clone(),
                distribution: vec![vec![1.0]; n],
            };
            let shift = rng.gen_range(0.5..3.0);
            let shifted = AntecedentTable {
                spans,
                candidates,
                scores: scores
                    .iter()
                    .map(|row| row.iter().map(|s| s + shift).collect())
                    .collect(),
                distribution: vec![vec![1.0]; n],
            };
            for i in 0..n {
                if table.scores[i].is_empty() {
                    continue;
                }
                // Argmax among non-dummy candidates is shift-invariant.
                let argmax = |t: &AntecedentTable| {
                    t.scores[i]
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(k, _)| t.candidates[i][k])
                };
                assert_eq!(argmax(&table), argmax(&shifted));
            }
        }
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut store = ParamStore::new();
        let head = CorefHead::register(&mut store, "c", &head_cfg(), &mut rng);
        let doc = tiny_doc(); // 5 tokens across two sentences
        let h_id = store.register("h", normal_init(&mut rng, doc.n_tokens(), 4, 0.5));
        // Keep ReLU pre-activations off their kinks (see the attention
        // module's gradient test for why).
        let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
        for id in ids {
            let (rows, cols) = store.value(id).shape();
            let noise = normal_init(&mut rng, rows, cols, 0.05);
            store.value_mut(id).add_scaled_assign(&noise, 1.0);
        }
        let f = |store: &ParamStore| {
            let tape = Tape::new();
            let h = tape.param(store, h_id);
            head.forward(&tape, store, h, &doc, 1, None).loss.value().get(0, 0)
        };
        let tape = Tape::new();
        let h = tape.param(&store, h_id);
        let out = head.forward(&tape, &store, h, &doc, 1, None);
        let grads = tape.backward(out.loss).unwrap();
        let gs = tape.param_grads(&grads, &store);
        let report = check_all_params(&store, &gs, 1e-5, f);
        assert!(
            report.max_rel_err < 1e-4,
            "worst {:?} rel err {}",
            report.worst,
            report.max_rel_err
        );
    }
}
