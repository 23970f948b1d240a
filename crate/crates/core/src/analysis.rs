//! Error-analysis tooling: the constituent-tree mention filter, resolution
//! classes for gold mentions, and bucketed detection/resolution breakdowns.
//!
//! The mention filter keeps only spans whose boundaries exactly match the
//! yield of a tree node carrying an allowed phrase or POS label — the
//! "syntax as hard constraint" view of the parse. The resolution classes
//! split gold mentions into proper names, common nominals, and pronouns,
//! each subdivided by how resolvable the mention is from surface strings
//! (exact / partial / no match / non-anaphoric, and pronoun person classes).
//! Breakdown tables report mention-detection recall (MD) and resolution
//! accuracy (RA) per class and per mention-length bucket, plus average F1
//! per document-length bucket.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{parse_ptb, CorpusError, Document, Span};
use crate::metrics::{Cluster, MetricAccumulator};

/// Phrase/POS labels whose exact-yield spans count as plausible mentions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseFilterSet {
    pub language: String,
    pub labels: BTreeSet<String>,
}

impl PhraseFilterSet {
    pub fn new(language: &str, labels: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let labels: BTreeSet<String> =
            labels.into_iter().map(|l| l.into().to_uppercase()).collect();
        assert!(!labels.is_empty(), "a phrase filter needs at least one label");
        PhraseFilterSet { language: language.to_string(), labels }
    }

    pub fn english() -> Self {
        Self::new(
            "en",
            [
                "NP", "NML", "PRP", "PRP$", "WP", "WDT", "WRB", "NNP", "VB", "VBD", "VBN",
                "VBG", "VBZ", "VBP",
            ],
        )
    }

    pub fn chinese() -> Self {
        Self::new("zh", ["VV", "NT", "PN", "DFL", "NR", "NP", "QP", "NN"])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.contains(&label.to_uppercase())
    }
}

/// All (start, end, label) node yields of a document's trees, in global
/// token coordinates.
pub fn node_yields(doc: &Document) -> Result<Vec<(usize, usize, String)>, CorpusError> {
    let offsets = doc.sentence_offsets();
    let mut out = Vec::new();
    for (si, tree_src) in doc.trees.iter().enumerate() {
        let tree = parse_ptb(tree_src)?;
        let base = offsets[si];
        for node in &tree.nodes {
            out.push((node.start + base, node.end + base, node.label.clone()));
        }
    }
    Ok(out)
}

/// Keep spans whose boundaries exactly match a tree node with an allowed
/// label. Order is preserved; filtering is idempotent.
pub fn mention_filter(
    spans: &[Span],
    doc: &Document,
    filter: &PhraseFilterSet,
) -> Result<Vec<Span>, CorpusError> {
    let allowed: HashSet<(usize, usize)> = node_yields(doc)?
        .into_iter()
        .filter(|(_, _, label)| filter.contains(label))
        .map(|(s, e, _)| (s, e))
        .collect();
    Ok(spans.iter().copied().filter(|sp| allowed.contains(sp)).collect())
}

/// Pronoun lists grouped by person/gender class, loaded from editable JSON
/// data files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PronounLexicon {
    pub first_second: BTreeSet<String>,
    pub gendered_third: BTreeSet<String>,
    pub ungendered_third: BTreeSet<String>,
    pub other: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PronounCategory {
    FirstSecond,
    GenderedThird,
    UngenderedThird,
    Other,
}

impl PronounLexicon {
    pub fn english() -> PronounLexicon {
        serde_json::from_str(include_str!("data/pronouns_en.json"))
            .expect("bundled English pronoun lexicon parses")
    }

    pub fn chinese() -> PronounLexicon {
        serde_json::from_str(include_str!("data/pronouns_zh.json"))
            .expect("bundled Chinese pronoun lexicon parses")
    }

    pub fn category(&self, token: &str) -> Option<PronounCategory> {
        let t = token.to_lowercase();
        if self.first_second.contains(&t) {
            Some(PronounCategory::FirstSecond)
        } else if self.gendered_third.contains(&t) {
            Some(PronounCategory::GenderedThird)
        } else if self.ungendered_third.contains(&t) {
            Some(PronounCategory::UngenderedThird)
        } else if self.other.contains(&t) {
            Some(PronounCategory::Other)
        } else {
            None
        }
    }
}

/// POS tags that mark a single token as pronominal even when the token
/// itself is missing from the lexicon.
const PRONOUN_TAGS: [&str; 4] = ["PRP", "PRP$", "WP", "PN"];

/// How resolvable a gold mention is: proper names (PN) and common nominals
/// (CN) split by string relations to preceding cluster mentions, pronouns
/// (PR) by person/gender, each with a non-anaphoric (na) class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum ResolutionClass {
    PN_e,
    PN_p,
    PN_n,
    PN_na,
    CN_e,
    CN_p,
    CN_n,
    CN_na,
    PR_12,
    PR_G3,
    PR_U3,
    PR_oa,
    PR_na,
}

impl ResolutionClass {
    pub const ALL: [ResolutionClass; 13] = [
        ResolutionClass::PN_e,
        ResolutionClass::PN_p,
        ResolutionClass::PN_n,
        ResolutionClass::PN_na,
        ResolutionClass::CN_e,
        ResolutionClass::CN_p,
        ResolutionClass::CN_n,
        ResolutionClass::CN_na,
        ResolutionClass::PR_12,
        ResolutionClass::PR_G3,
        ResolutionClass::PR_U3,
        ResolutionClass::PR_oa,
        ResolutionClass::PR_na,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ResolutionClass::PN_e => "PN-e",
            ResolutionClass::PN_p => "PN-p",
            ResolutionClass::PN_n => "PN-n",
            ResolutionClass::PN_na => "PN-na",
            ResolutionClass::CN_e => "CN-e",
            ResolutionClass::CN_p => "CN-p",
            ResolutionClass::CN_n => "CN-n",
            ResolutionClass::CN_na => "CN-na",
            ResolutionClass::PR_12 => "PR-1/2",
            ResolutionClass::PR_G3 => "PR-G3",
            ResolutionClass::PR_U3 => "PR-U3",
            ResolutionClass::PR_oa => "PR-oa",
            ResolutionClass::PR_na => "PR-na",
        }
    }
}

fn lowered_tokens(doc: &Document, span: Span) -> Vec<String> {
    (span.0..=span.1).map(|t| doc.token(t).to_lowercase()).collect()
}

/// Mentions of `cluster` strictly preceding `mention` in document order.
fn preceding<'a>(cluster: &'a [Span], mention: Span) -> impl Iterator<Item = Span> + 'a {
    cluster.iter().copied().filter(move |&(s, e)| (s, e) < mention)
}

/// Per-token POS tags (preterminal labels), used to spot pronouns whose
/// surface form is missing from the lexicon.
pub fn pos_tags(doc: &Document) -> Result<Vec<String>, CorpusError> {
    let mut tags = vec![String::new(); doc.n_tokens()];
    for (start, end, label) in node_yields(doc)? {
        // Parents precede children in parse order, so the last single-token
        // node written for a position is its preterminal.
        if start == end {
            tags[start] = label;
        }
    }
    Ok(tags)
}

/// Assign a gold mention its resolution class, given the gold cluster it
/// belongs to. Unknown single tokens tagged pronominal fall into the
/// oa/na buckets; everything else is total and exclusive.
pub fn classify_resolution(
    doc: &Document,
    tags: &[String],
    mention: Span,
    cluster: &[Span],
    lexicon: &PronounLexicon,
) -> ResolutionClass {
    let anaphoric = preceding(cluster, mention).next().is_some();
    // Pronouns: single tokens recognized by the lexicon or by POS tag.
    if mention.0 == mention.1 {
        let token = doc.token(mention.0);
        let category = lexicon.category(token);
        let tagged = PRONOUN_TAGS.contains(&tags[mention.0].as_str());
        if category.is_some() || tagged {
            if !anaphoric {
                return ResolutionClass::PR_na;
            }
            return match category {
                Some(PronounCategory::FirstSecond) => ResolutionClass::PR_12,
                Some(PronounCategory::GenderedThird) => ResolutionClass::PR_G3,
                Some(PronounCategory::UngenderedThird) => ResolutionClass::PR_U3,
                Some(PronounCategory::Other) | None => ResolutionClass::PR_oa,
            };
        }
    }
    // Proper names carry a named-entity annotation on exactly this span.
    let is_proper = doc.ner.iter().any(|(s, e, _)| (*s, *e) == mention);
    if !anaphoric {
        return if is_proper { ResolutionClass::PN_na } else { ResolutionClass::CN_na };
    }
    let own = lowered_tokens(doc, mention);
    let own_set: HashSet<&String> = own.iter().collect();
    let mut any_shared = false;
    for prev in preceding(cluster, mention) {
        let theirs = lowered_tokens(doc, prev);
        if theirs == own {
            return if is_proper { ResolutionClass::PN_e } else { ResolutionClass::CN_e };
        }
        if theirs.iter().any(|t| own_set.contains(t)) {
            any_shared = true;
        }
    }
    match (is_proper, any_shared) {
        (true, true) => ResolutionClass::PN_p,
        (true, false) => ResolutionClass::PN_n,
        (false, true) => ResolutionClass::CN_p,
        (false, false) => ResolutionClass::CN_n,
    }
}

/// Mention length bucket: {1–2, 3–4, 5–7, 8–10, 11+} → 0..=4.
pub fn mention_length_bucket(len: usize) -> usize {
    match len {
        0 => panic!("mentions have at least one token"),
        1..=2 => 0,
        3..=4 => 1,
        5..=7 => 2,
        8..=10 => 3,
        _ => 4,
    }
}

pub const MENTION_LENGTH_LABELS: [&str; 5] = ["1-2", "3-4", "5-7", "8-10", "11+"];

/// Document length bucket: {0–128, 129–256, 257–512, 513–768, 769–1152,
/// 1153+} → 0..=5.
pub fn doc_length_bucket(n_tokens: usize) -> usize {
    match n_tokens {
        0..=128 => 0,
        129..=256 => 1,
        257..=512 => 2,
        513..=768 => 3,
        769..=1152 => 4,
        _ => 5,
    }
}

pub const DOC_LENGTH_LABELS: [&str; 6] =
    ["0-128", "129-256", "257-512", "513-768", "769-1152", "1153+"];

/// One row of a detection/resolution table: `size` gold mentions, of which
/// `detected` were produced by the system; `md_recall` = detected/size and
/// `ra` = correctly-resolved/detected (0 with `ra_defined = false` when
/// nothing was detected).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub label: String,
    pub size: usize,
    pub detected: usize,
    pub md_recall: f64,
    pub ra: f64,
    pub ra_defined: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocLengthRow {
    pub label: String,
    pub n_docs: usize,
    pub avg_f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub classes: Vec<BreakdownRow>,
    pub mention_length: Vec<BreakdownRow>,
    pub doc_length: Vec<DocLengthRow>,
}

#[derive(Debug, Clone, Copy, Default)]
struct RowCounts {
    size: usize,
    detected: usize,
    correct: usize,
}

impl RowCounts {
    fn row(&self, label: &str) -> BreakdownRow {
        BreakdownRow {
            label: label.to_string(),
            size: self.size,
            detected: self.detected,
            md_recall: if self.size == 0 { 0.0 } else { self.detected as f64 / self.size as f64 },
            ra: if self.detected == 0 { 0.0 } else { self.correct as f64 / self.detected as f64 },
            ra_defined: self.detected > 0,
        }
    }
}

/// Detection and resolution breakdowns over a document set. `predictions`
/// pairs with `docs`; each entry is the system's cluster set for that
/// document.
pub fn breakdown_report(
    docs: &[Document],
    predictions: &[Vec<Cluster>],
    lexicon: &PronounLexicon,
) -> Result<BreakdownReport, CorpusError> {
    assert_eq!(docs.len(), predictions.len(), "one prediction set per document");
    let mut class_counts: HashMap<ResolutionClass, RowCounts> = HashMap::new();
    let mut length_counts = [RowCounts::default(); 5];
    let mut doc_metrics: Vec<(usize, MetricAccumulator)> =
        (0..6).map(|_| (0, MetricAccumulator::new())).collect();

    for (doc, sys) in docs.iter().zip(predictions) {
        let tags = pos_tags(doc)?;
        // System-side lookups: which cluster holds each predicted mention.
        let mut sys_cluster_of: HashMap<Span, usize> = HashMap::new();
        for (ci, cluster) in sys.iter().enumerate() {
            for &m in cluster {
                sys_cluster_of.insert(m, ci);
            }
        }
        // Gold-side lookup for "correct antecedent" checks.
        let mut gold_cluster_of: HashMap<Span, usize> = HashMap::new();
        for (ci, cluster) in doc.clusters.iter().enumerate() {
            for &m in cluster {
                gold_cluster_of.insert(m, ci);
            }
        }

        for cluster in &doc.clusters {
            for &mention in cluster {
                let class = classify_resolution(doc, &tags, mention, cluster, lexicon);
                let bucket = mention_length_bucket(mention.1 - mention.0 + 1);
                let detected = sys_cluster_of.contains_key(&mention);
                let anaphoric = preceding(cluster, mention).next().is_some();
                let correct = detected && {
                    let sys_members = &sys[sys_cluster_of[&mention]];
                    if anaphoric {
                        // Some earlier mention in the system cluster is truly
                        // coreferent with this one.
                        sys_members.iter().any(|&m| {
                            m < mention
                                && gold_cluster_of.get(&m) == gold_cluster_of.get(&mention)
                                && gold_cluster_of.contains_key(&m)
                        })
                    } else {
                        // Non-anaphoric mentions are resolved correctly when
                        // the system made them cluster-initial.
                        sys_members.iter().all(|&m| m >= mention)
                    }
                };
                for counts in [
                    class_counts.entry(class).or_default(),
                    &mut length_counts[bucket],
                ] {
                    counts.size += 1;
                    counts.detected += usize::from(detected);
                    counts.correct += usize::from(correct);
                }
            }
        }

        let bucket = doc_length_bucket(doc.n_tokens());
        doc_metrics[bucket].0 += 1;
        doc_metrics[bucket].1.add(&doc.clusters, sys);
    }

    Ok(BreakdownReport {
        classes: ResolutionClass::ALL
            .iter()
            .map(|c| class_counts.get(c).copied().unwrap_or_default().row(c.label()))
            .collect(),
        mention_length: length_counts
            .iter()
            .zip(MENTION_LENGTH_LABELS)
            .map(|(c, l)| c.row(l))
            .collect(),
        doc_length: doc_metrics
            .iter()
            .zip(DOC_LENGTH_LABELS)
            .map(|((n, acc), label)| DocLengthRow {
                label: label.to_string(),
                n_docs: *n,
                avg_f1: acc.report().avg_f1,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc_with(
        sentences: Vec<Vec<&str>>,
        trees: Vec<&str>,
        clusters: Vec<Vec<Span>>,
        ner: Vec<(usize, usize, &str)>,
    ) -> Document {
        let speakers = sentences
            .iter()
            .map(|s| s.iter().map(|_| "spk".to_string()).collect())
            .collect();
        Document {
            doc_key: "analysis-test".into(),
            genre: "nw".into(),
            sentences: sentences
                .iter()
                .map(|s| s.iter().map(|t| t.to_string()).collect())
                .collect(),
            speakers,
            trees: trees.into_iter().map(String::from).collect(),
            clusters,
            ner: ner.into_iter().map(|(s, e, t)| (s, e, t.to_string())).collect(),
        }
    }

    #[test]
    fn filter_sets_match_the_published_label_lists() {
        let en = PhraseFilterSet::english();
        let want: BTreeSet<String> = [
            "NP", "NML", "PRP", "PRP$", "WP", "WDT", "WRB", "NNP", "VB", "VBD", "VBN", "VBG",
            "VBZ", "VBP",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        assert_eq!(en.labels, want);
        let zh = PhraseFilterSet::chinese();
        let want: BTreeSet<String> =
            ["VV", "NT", "PN", "DFL", "NR", "NP", "QP", "NN"].into_iter().map(String::from).collect();
        assert_eq!(zh.labels, want);
        assert!(en.contains("np") && en.contains("NP"));
    }

    #[test]
    fn mention_filter_keeps_exact_yields_only() {
        // "Alice saw the cat" — NP(0,0), VP(1,3), NP(2,3) under S(0,3).
        let doc = doc_with(
            vec![vec!["Alice", "saw", "the", "cat"]],
            vec!["(S (NP (NNP Alice)) (VP (VBD saw) (NP (DT the) (NN cat))))"],
            vec![],
            vec![],
        );
        let filter = PhraseFilterSet::english();
        let spans = vec![(0, 0), (2, 3), (1, 2), (0, 3), (3, 3)];
        let kept = mention_filter(&spans, &doc, &filter).unwrap();
        // (0,0) is NP and NNP; (2,3) is NP; (1,2) crosses constituents;
        // (0,3) is S (not allowed); (3,3) is NN (not in the English set).
        assert_eq!(kept, vec![(0, 0), (2, 3)]);
        // Idempotence.
        let again = mention_filter(&kept, &doc, &filter).unwrap();
        assert_eq!(again, kept);
    }

    #[test]
    fn custom_filters_reach_full_or_zero_retention() {
        let doc = doc_with(
            vec![vec!["Alice", "saw", "the", "cat"]],
            vec!["(S (NP (NNP Alice)) (VP (VBD saw) (NP (DT the) (NN cat))))"],
            vec![vec![(0, 0), (2, 3)]],
            vec![],
        );
        let gold: Vec<Span> = doc.clusters.iter().flatten().copied().collect();
        let generous = PhraseFilterSet::new("en", ["NP"]);
        assert_eq!(mention_filter(&gold, &doc, &generous).unwrap().len(), gold.len());
        let hostile = PhraseFilterSet::new("en", ["XX"]);
        assert!(mention_filter(&gold, &doc, &hostile).unwrap().is_empty());
    }

    /// Two-sentence doc exercising every PN/CN relation:
    /// "Barack Obama met Mary ." / "Obama thanked the president ."
    fn pn_cn_doc() -> Document {
        doc_with(
            vec![
                vec!["Barack", "Obama", "met", "Mary", "."],
                vec!["Obama", "thanked", "the", "president", "."],
            ],
            vec![
                "(S (NP (NNP Barack) (NNP Obama)) (VP (VBD met) (NP (NNP Mary))) (. .))",
                "(S (NP (NNP Obama)) (VP (VBD thanked) (NP (DT the) (NN president))) (. .))",
            ],
            vec![
                // {Barack Obama, Obama, the president}
                vec![(0, 1), (5, 5), (7, 8)],
                // {Mary}
                vec![(3, 3)],
            ],
            vec![(0, 1, "PERSON"), (5, 5, "PERSON"), (3, 3, "PERSON")],
        )
    }

    #[test]
    fn classification_covers_the_worked_examples() {
        let doc = pn_cn_doc();
        let tags = pos_tags(&doc).unwrap();
        let lex = PronounLexicon::english();
        let c0 = &doc.clusters[0];
        // Cluster-initial proper name: non-anaphoric.
        assert_eq!(classify_resolution(&doc, &tags, (0, 1), c0, &lex), ResolutionClass::PN_na);
        // "Obama" after "Barack Obama": shares a word, not exact.
        assert_eq!(classify_resolution(&doc, &tags, (5, 5), c0, &lex), ResolutionClass::PN_p);
        // "the president" after the names: common nominal, no shared words.
        assert_eq!(classify_resolution(&doc, &tags, (7, 8), c0, &lex), ResolutionClass::CN_n);
        // Singleton proper name.
        assert_eq!(
            classify_resolution(&doc, &tags, (3, 3), &doc.clusters[1], &lex),
            ResolutionClass::PN_na
        );

        // Exact repeat across distinct spans with equal strings.
        let doc3 = doc_with(
            vec![vec!["Obama", "met", "Obama", "."]],
            vec!["(S (NP (NNP Obama)) (VP (VBD met) (NP (NNP Obama))) (. .))"],
            vec![vec![(0, 0), (2, 2)]],
            vec![(0, 0, "PERSON"), (2, 2, "PERSON")],
        );
        let tags3 = pos_tags(&doc3).unwrap();
        assert_eq!(
            classify_resolution(&doc3, &tags3, (2, 2), &doc3.clusters[0], &lex),
            ResolutionClass::PN_e
        );
        // Without an NE annotation the same relation lands in the CN classes.
        let mut doc4 = doc3.clone();
        doc4.ner.clear();
        let tags4 = pos_tags(&doc4).unwrap();
        assert_eq!(
            classify_resolution(&doc4, &tags4, (2, 2), &doc4.clusters[0], &lex),
            ResolutionClass::CN_e
        );
    }

    #[test]
    fn pronoun_classes_follow_the_lexicon_and_tags() {
        let doc = doc_with(
            vec![vec!["Mary", "said", "you", "saw", "her", ",", "they", "left", ",", "whoever",
                      "knows", "this"]],
            vec!["(S (NP (NNP Mary)) (VP (VBD said) (NP (PRP you)) (VBD saw) (NP (PRP her)) \
                  (, ,) (NP (PRP they)) (VBD left) (, ,) (NP (WP whoever)) (VBZ knows) \
                  (NP (PRP this))) )"],
            vec![],
            vec![(0, 0, "PERSON")],
        );
        let tags = pos_tags(&doc).unwrap();
        let lex = PronounLexicon::english();
        let anaphoric = vec![(0, 0), (2, 2), (4, 4), (6, 6), (9, 9), (11, 11)];
        assert_eq!(
            classify_resolution(&doc, &tags, (2, 2), &anaphoric, &lex),
            ResolutionClass::PR_12
        );
        assert_eq!(
            classify_resolution(&doc, &tags, (4, 4), &anaphoric, &lex),
            ResolutionClass::PR_G3
        );
        assert_eq!(
            classify_resolution(&doc, &tags, (6, 6), &anaphoric, &lex),
            ResolutionClass::PR_U3
        );
        // "whoever" is WP-tagged but absent from the lists: other-anaphoric.
        assert_eq!(
            classify_resolution(&doc, &tags, (9, 9), &anaphoric, &lex),
            ResolutionClass::PR_oa
        );
        // "this" is in the "other" list.
        assert_eq!(
            classify_resolution(&doc, &tags, (11, 11), &anaphoric, &lex),
            ResolutionClass::PR_oa
        );
        // Cluster-initial pronoun: non-anaphoric.
        assert_eq!(
            classify_resolution(&doc, &tags, (2, 2), &[(2, 2), (4, 4)], &lex),
            ResolutionClass::PR_na
        );
    }

    #[test]
    fn every_gold_mention_gets_exactly_one_class() {
        let docs = crate::synth::generate_corpus(&crate::synth::SynthOptions {
            n_docs: 10,
            seed: 99,
            ..Default::default()
        });
        let lex = PronounLexicon::english();
        for doc in &docs {
            let tags = pos_tags(&doc).unwrap();
            for cluster in &doc.clusters {
                for &mention in cluster {
                    // classify_resolution is total: it returns for all inputs.
                    let class = classify_resolution(doc, &tags, mention, cluster, &lex);
                    assert!(ResolutionClass::ALL.contains(&class));
                }
            }
        }
    }

    #[test]
    fn buckets_partition_all_lengths() {
        assert_eq!(mention_length_bucket(1), 0);
        assert_eq!(mention_length_bucket(2), 0);
        assert_eq!(mention_length_bucket(3), 1);
        assert_eq!(mention_length_bucket(4), 1);
        assert_eq!(mention_length_bucket(5), 2);
        assert_eq!(mention_length_bucket(7), 2);
        assert_eq!(mention_length_bucket(8), 3);
        assert_eq!(mention_length_bucket(10), 3);
        assert_eq!(mention_length_bucket(11), 4);
        for len in 1..2000 {
            let b = mention_length_bucket(len);
            assert!(b < 5);
        }
        assert_eq!(doc_length_bucket(0), 0);
        assert_eq!(doc_length_bucket(128), 0);
        assert_eq!(doc_length_bucket(129), 1);
        assert_eq!(doc_length_bucket(256), 1);
        assert_eq!(doc_length_bucket(512), 2);
        assert_eq!(doc_length_bucket(513), 3);
        assert_eq!(doc_length_bucket(768), 3);
        assert_eq!(doc_length_bucket(769), 4);
        assert_eq!(doc_length_bucket(1152), 4);
        assert_eq!(doc_length_bucket(1153), 5);
        for len in 0..5000 {
            assert!(doc_length_bucket(len) < 6);
        }
    }

    #[test]
    fn perfect_predictions_score_perfectly_everywhere() {
        let doc = pn_cn_doc();
        let predictions = vec![doc.clusters.clone()];
        let report = breakdown_report(&[doc], &predictions, &PronounLexicon::english()).unwrap();
        for row in report.classes.iter().chain(&report.mention_length) {
            if row.size > 0 {
                assert_eq!(row.md_recall, 1.0, "{}", row.label);
                assert_eq!(row.ra, 1.0, "{}", row.label);
                assert!(row.ra_defined);
            } else {
                assert!(!row.ra_defined);
            }
        }
        let short = &report.doc_length[0];
        assert_eq!(short.n_docs, 1);
        assert!((short.avg_f1 - 1.0).abs() < 1e-12);
        assert!(report.doc_length.iter().skip(1).all(|r| r.n_docs == 0));
    }

    #[test]
    fn empty_predictions_zero_detection_and_flag_ra() {
        let doc = pn_cn_doc();
        let report =
            breakdown_report(&[doc], &[Vec::new()], &PronounLexicon::english()).unwrap();
        for row in report.classes.iter().chain(&report.mention_length) {
            assert_eq!(row.detected, 0);
            assert_eq!(row.md_recall, 0.0);
            assert_eq!(row.ra, 0.0);
            assert!(!row.ra_defined);
        }
    }

    #[test]
    fn wrong_links_lower_resolution_accuracy_only() {
        let doc = pn_cn_doc();
        // System detects all cluster-0 mentions but wrongly pulls Mary in,
        // splitting nothing: Mary's "antecedent" is not coreferent.
        let sys = vec![vec![(0, 1), (3, 3), (5, 5), (7, 8)]];
        let report = breakdown_report(&[doc], &[sys], &PronounLexicon::english()).unwrap();
        let by_label: HashMap<&str, &BreakdownRow> =
            report.classes.iter().map(|r| (r.label.as_str(), r)).collect();
        // "Obama" (PN-p) still has its true antecedent present: correct.
        assert_eq!(by_label["PN-p"].ra, 1.0);
        // Mary is detected but non-anaphoric in gold and not cluster-initial
        // in the system: one of the two PN-na mentions resolves wrong.
        let pn_na = by_label["PN-na"];
        assert_eq!(pn_na.size, 2);
        assert_eq!(pn_na.detected, 2);
        assert!((pn_na.ra - 0.5).abs() < 1e-12);
    }
}
