//! Probability-estimation classification trees with random feature
//! subsetting at each node.
//!
//! Splits maximize the Gini impurity decrease. Candidate thresholds are the
//! midpoints between consecutive distinct values of a feature inside the
//! node, and rows go left iff `value <= threshold`. Leaves store the raw
//! class-1 proportion of the (multiplicity-weighted) in-sample rows that
//! reach them.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::seq::index;

use crate::dataset::Dataset;
use crate::error::{OteError, Result};
use crate::sampling::{rng, SampleDraw};

#[derive(Clone, Debug, PartialEq)]
pub struct GrowParams {
    /// Features considered per split; `None` means `ceil(sqrt(d))`.
    pub mtry: Option<usize>,
    /// Nodes with this many rows or fewer become leaves.
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
    pub min_impurity_decrease: f64,
}

impl Default for GrowParams {
    fn default() -> Self {
        GrowParams {
            mtry: None,
            min_node_size: 1,
            max_depth: None,
            min_impurity_decrease: 0.0,
        }
    }
}

/// Smallest `k` with `k * k >= d`.
pub fn default_mtry(d: usize) -> usize {
    let mut k = (d as f64).sqrt() as usize;
    while k * k < d {
        k += 1;
    }
    while k > 1 && (k - 1) * (k - 1) >= d {
        k -= 1;
    }
    k.max(1)
}

impl GrowParams {
    pub fn resolved_mtry(&self, d: usize) -> Result<usize> {
        let mtry = self.mtry.unwrap_or_else(|| default_mtry(d));
        if mtry == 0 || mtry > d {
            return Err(OteError::InvalidParameter(format!("mtry {mtry} not in 1..={d}")));
        }
        Ok(mtry)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        self.resolved_mtry(d)?;
        if self.min_node_size == 0 {
            return Err(OteError::InvalidParameter("min_node_size must be at least 1".into()));
        }
        if self.min_impurity_decrease.is_nan() || self.min_impurity_decrease < 0.0 {
            return Err(OteError::InvalidParameter(
                "min_impurity_decrease must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        probability: f64,
        positives: usize,
        count: usize,
    },
}

impl Node {
    pub fn leaf(positives: usize, count: usize) -> Node {
        Node::Leaf {
            probability: positives as f64 / count as f64,
            positives,
            count,
        }
    }
}

/// A grown tree. Nodes are stored in pre-order with the root at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    seed: u64,
}

impl DecisionTree {
    /// Rebuilds a tree from its node array, checking structural invariants.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize, seed: u64) -> Result<Self> {
        let bad = |msg: String| Err(OteError::InvalidParameter(format!("malformed tree: {msg}")));
        if nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features || !threshold.is_finite() {
                        return bad(format!("node {i} has an invalid split"));
                    }
                    for child in [left, right] {
                        if child <= i || child >= nodes.len() {
                            return bad(format!("node {i} points to {child}"));
                        }
                        parents[child] += 1;
                    }
                    if left == right {
                        return bad(format!("node {i} has identical children"));
                    }
                }
                Node::Leaf {
                    probability,
                    positives,
                    count,
                } => {
                    if count == 0 || positives > count || probability != positives as f64 / count as f64 {
                        return bad(format!("leaf {i} has inconsistent counts"));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return bad("nodes do not form a single tree".into());
        }
        Ok(DecisionTree {
            nodes,
            n_features,
            seed,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
                Node::Leaf { .. } => return at,
            }
        }
    }

    /// Class-1 probability without the dimension check.
    #[inline]
    pub(crate) fn proba(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.n_features);
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { probability, .. } => probability,
            Node::Split { .. } => unreachable!(),
        }
    }

    fn check_dim(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features {
            return Err(OteError::DimensionMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        Ok(())
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        self.check_dim(row)?;
        Ok(self.proba(row))
    }

    /// 1 iff the class-1 probability is at least 0.5.
    pub fn predict_label(&self, row: &[f64]) -> Result<u8> {
        Ok(label_from_proba(self.predict_proba(row)?))
    }

    /// Human-readable indented dump, one node per line.
    pub fn dump(&self, feature_names: Option<&[String]>) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((at, depth)) = stack.pop() {
            let pad = "  ".repeat(depth);
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let name = feature_names
                        .and_then(|n| n.get(*feature))
                        .cloned()
                        .unwrap_or_else(|| format!("x[{feature}]"));
                    let _ = writeln!(out, "{pad}{name} <= {threshold}");
                    stack.push((*right, depth + 1));
                    stack.push((*left, depth + 1));
                }
                Node::Leaf {
                    probability,
                    positives,
                    count,
                } => {
                    let _ = writeln!(out, "{pad}leaf p={probability:.4} ({positives}/{count})");
                }
            }
        }
        out
    }
}

#[inline]
pub fn label_from_proba(p: f64) -> u8 {
    u8::from(p >= 0.5)
}

/// Sum of squared class counts over child size, kept as an exact fraction
/// so equal-gain splits compare equal.
#[derive(Clone, Copy, Debug)]
struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    fn children(l1: u64, l0: u64, r1: u64, r0: u64) -> Self {
        let (nl, nr) = ((l1 + l0) as u128, (r1 + r0) as u128);
        let sl = (l1 as u128).pow(2) + (l0 as u128).pow(2);
        let sr = (r1 as u128).pow(2) + (r0 as u128).pow(2);
        SplitScore {
            num: sl * nr + sr * nl,
            den: nl * nr,
        }
    }

    fn parent(p1: u64, p0: u64) -> Self {
        SplitScore {
            num: (p1 as u128).pow(2) + (p0 as u128).pow(2),
            den: (p1 + p0) as u128,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }

    fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: SplitScore,
}

/// Grows a tree on the in-sample rows of `draw`, repeats counted with
/// multiplicity.
pub fn grow(data: &Dataset, draw: &SampleDraw, params: &GrowParams, seed: u64) -> Result<DecisionTree> {
    grow_on(data, &draw.in_indices, params, seed)
}

/// Grows a tree on an explicit row multiset.
pub fn grow_on(data: &Dataset, rows: &[usize], params: &GrowParams, seed: u64) -> Result<DecisionTree> {
    if rows.is_empty() {
        return Err(OteError::Empty("in-sample"));
    }
    let d = data.n_features();
    params.validate(d)?;
    let mtry = params.resolved_mtry(d)?;
    let mut rng = rng(seed);
    let mut rows = rows.to_vec();
    let mut nodes = vec![Node::leaf(0, 1)];
    let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];
    let mut buf: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
    let mut features: Vec<usize> = Vec::with_capacity(mtry);

    while let Some((slot, start, end, depth)) = stack.pop() {
        let node_rows = &mut rows[start..end];
        let count = node_rows.len();
        let positives = node_rows.iter().filter(|&&i| data.label(i) == 1).count();
        let stop = positives == 0
            || positives == count
            || count <= params.min_node_size
            || params.max_depth.is_some_and(|m| depth >= m);
        if stop {
            nodes[slot] = Node::leaf(positives, count);
            continue;
        }

        features.clear();
        features.extend(index::sample(&mut rng, d, mtry).iter());
        features.sort_unstable();

        let parent = SplitScore::parent(positives as u64, (count - positives) as u64);
        let mut best: Option<Candidate> = None;
        for &f in &features {
            buf.clear();
            buf.extend(node_rows.iter().map(|&i| (data.value(i, f), data.label(i))));
            buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let (mut l1, mut l0) = (0u64, 0u64);
            let (p1, p0) = (positives as u64, (count - positives) as u64);
            for k in 0..count - 1 {
                if buf[k].1 == 1 {
                    l1 += 1;
                } else {
                    l0 += 1;
                }
                let (lo, hi) = (buf[k].0, buf[k + 1].0);
                if lo == hi {
                    continue;
                }
                let score = SplitScore::children(l1, l0, p1 - l1, p0 - l0);
                if best.as_ref().is_none_or(|b| score.cmp(&b.score) == Ordering::Greater) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: midpoint(lo, hi),
                        score,
                    });
                }
            }
        }

        let accepted = best.filter(|b| {
            let gain = (b.score.value() - parent.value()) / count as f64;
            b.score.cmp(&parent) == Ordering::Greater && gain >= params.min_impurity_decrease
        });
        let Some(split) = accepted else {
            nodes[slot] = Node::leaf(positives, count);
            continue;
        };

        let mut split_at = 0;
        for k in 0..count {
            if data.value(node_rows[k], split.feature) <= split.threshold {
                node_rows.swap(k, split_at);
                split_at += 1;
            }
        }
        debug_assert!(split_at > 0 && split_at < count);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::leaf(0, 1));
        nodes.push(Node::leaf(0, 1));
        nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        stack.push((right, start + split_at, end, depth + 1));
        stack.push((left, start, start + split_at, depth + 1));
    }

    Ok(DecisionTree {
        nodes: renumber_preorder(nodes),
        n_features: d,
        seed,
    })
}

/// Midpoint of two consecutive distinct values, kept strictly below `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi || mid < lo {
        lo
    } else {
        mid
    }
}

/// Children are allocated breadth-wise while growth is depth-first; rewrite
/// indices so the array is in pre-order.
fn renumber_preorder(nodes: Vec<Node>) -> Vec<Node> {
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![0usize];
    while let Some(at) = stack.pop() {
        order.push(at);
        if let Node::Split { left, right, .. } = nodes[at] {
            stack.push(right);
            stack.push(left);
        }
    }
    let mut new_index = vec![0usize; nodes.len()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    order
        .iter()
        .map(|&old| match nodes[old] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => Node::Split {
                feature,
                threshold,
                left: new_index[left],
                right: new_index[right],
            },
            ref leaf => leaf.clone(),
        })
        .collect()
}
