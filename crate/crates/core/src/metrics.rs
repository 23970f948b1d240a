//! Coreference evaluation: MUC, B³, and CEAF-φ₄ precision/recall/F1, plus
//! their average, with corpus-level accumulation.
//!
//! Each metric keeps separate numerator/denominator sums so that scores over
//! a corpus aggregate counts across documents rather than averaging per-doc
//! ratios. MUC counts cluster partitions (link-based), B³ scores per-mention
//! overlap, and CEAF-φ₄ aligns gold and system clusters one-to-one to
//! maximize φ₄(g, s) = 2|g∩s| / (|g|+|s|), solved exactly with a Hungarian
//! assignment. Empty sides and 0/0 ratios score zero.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

pub type Mention = (usize, usize);
pub type Cluster = Vec<Mention>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub muc: Score,
    pub b_cubed: Score,
    pub ceaf_phi4: Score,
    pub avg_f1: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Frac {
    num: f64,
    den: f64,
}

impl Frac {
    fn add(&mut self, num: f64, den: f64) {
        self.num += num;
        self.den += den;
    }

    fn ratio(self) -> f64 {
        if self.den == 0.0 {
            0.0
        } else {
            self.num / self.den
        }
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn score(p: Frac, r: Frac) -> Score {
    let (precision, recall) = (p.ratio(), r.ratio());
    Score { precision, recall, f1: f1(precision, recall) }
}

/// Maximum-weight one-to-one assignment between the rows and columns of a
/// (possibly rectangular) score matrix. Returns the optimal total and, per
/// row, the column it was matched to (None when the row is left out).
///
/// Internally the rectangle is padded to a square of zero-score cells and
/// solved as a min-cost perfect matching on negated scores with the O(n³)
/// potential-based Hungarian algorithm.
pub fn max_assignment(scores: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let rows = scores.len();
    let cols = scores.iter().map(Vec::len).max().unwrap_or(0);
    for row in scores {
        assert_eq!(row.len(), cols, "score matrix must be rectangular");
    }
    let n = rows.max(cols);
    if n == 0 {
        return (0.0, Vec::new());
    }
    let cost = |i: usize, j: usize| if i < rows && j < cols { -scores[i][j] } else { 0.0 };

    // Potentials u (rows), v (cols); p[j] = row matched to column j; 1-based
    // with index 0 as the staging slot.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i <= rows && j <= cols {
            assignment[i - 1] = Some(j - 1);
            total += scores[i - 1][j - 1];
        }
    }
    (total, assignment)
}

fn membership(clusters: &[Cluster]) -> HashMap<Mention, usize> {
    let mut map = HashMap::new();
    for (ci, cluster) in clusters.iter().enumerate() {
        for &m in cluster {
            map.insert(m, ci);
        }
    }
    map
}

/// One MUC direction: numerator Σ (|g| − p(g)) and denominator Σ (|g| − 1),
/// where p(g) counts the clusters of `b` that partition g plus one singleton
/// part per unmatched mention.
fn muc_half(a: &[Cluster], b: &[Cluster]) -> (f64, f64) {
    let owner = membership(b);
    let (mut num, mut den) = (0.0, 0.0);
    for cluster in a {
        let mut parts = HashSet::new();
        let mut unmatched = 0usize;
        for m in cluster {
            match owner.get(m) {
                Some(&ci) => {
                    parts.insert(ci);
                }
                None => unmatched += 1,
            }
        }
        num += (cluster.len() - parts.len() - unmatched) as f64;
        den += (cluster.len() - 1) as f64;
    }
    (num, den)
}

/// One B³ direction: per mention of `a`, the fraction of its cluster shared
/// with the owning cluster in `b`; numerator Σ o²/|g| grouped by overlap,
/// denominator = total mentions of `a`.
fn b3_half(a: &[Cluster], b: &[Cluster]) -> (f64, f64) {
    let owner = membership(b);
    let (mut num, mut den) = (0.0, 0.0);
    for cluster in a {
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for m in cluster {
            if let Some(&ci) = owner.get(m) {
                *overlap.entry(ci).or_insert(0) += 1;
            }
        }
        for o in overlap.values() {
            num += (o * o) as f64 / cluster.len() as f64;
        }
        den += cluster.len() as f64;
    }
    (num, den)
}

/// Optimal total φ₄ over one-to-one gold/system cluster alignments.
fn ceaf_total(gold: &[Cluster], sys: &[Cluster]) -> f64 {
    if gold.is_empty() || sys.is_empty() {
        return 0.0;
    }
    let sys_sets: Vec<HashSet<Mention>> = sys.iter().map(|c| c.iter().copied().collect()).collect();
    let phi: Vec<Vec<f64>> = gold
        .iter()
        .map(|g| {
            let g_set: HashSet<Mention> = g.iter().copied().collect();
            sys_sets
                .iter()
                .map(|s| {
                    let inter = g_set.intersection(s).count();
                    2.0 * inter as f64 / (g_set.len() + s.len()) as f64
                })
                .collect()
        })
        .collect();
    max_assignment(&phi).0
}

/// Running numerator/denominator sums for all three metrics over a corpus.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricAccumulator {
    muc_p: Frac,
    muc_r: Frac,
    b3_p: Frac,
    b3_r: Frac,
    ceaf_p: Frac,
    ceaf_r: Frac,
}

impl MetricAccumulator {
    pub fn new() -> MetricAccumulator {
        MetricAccumulator::default()
    }

    /// Fold one document's gold and system cluster sets into the totals.
    pub fn add(&mut self, gold: &[Cluster], sys: &[Cluster]) {
        let (rn, rd) = muc_half(gold, sys);
        self.muc_r.add(rn, rd);
        let (pn, pd) = muc_half(sys, gold);
        self.muc_p.add(pn, pd);

        let (rn, rd) = b3_half(gold, sys);
        self.b3_r.add(rn, rd);
        let (pn, pd) = b3_half(sys, gold);
        self.b3_p.add(pn, pd);

        let total = ceaf_total(gold, sys);
        self.ceaf_r.add(total, gold.len() as f64);
        self.ceaf_p.add(total, sys.len() as f64);
    }

    pub fn report(&self) -> MetricsReport {
        let muc = score(self.muc_p, self.muc_r);
        let b_cubed = score(self.b3_p, self.b3_r);
        let ceaf_phi4 = score(self.ceaf_p, self.ceaf_r);
        let avg_f1 = (muc.f1 + b_cubed.f1 + ceaf_phi4.f1) / 3.0;
        MetricsReport { muc, b_cubed, ceaf_phi4, avg_f1 }
    }
}

/// Scores for a single document.
pub fn evaluate(gold: &[Cluster], sys: &[Cluster]) -> MetricsReport {
    let mut acc = MetricAccumulator::new();
    acc.add(gold, sys);
    acc.report()
}
