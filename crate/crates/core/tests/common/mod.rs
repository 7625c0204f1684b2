//! Brute-force reference implementations shared by the integration tests.
//! They deliberately avoid the library's internals: trees are walked by
//! hand, splits are found by enumeration, and ensembles are re-summed from
//! scratch at every step.

#![allow(dead_code)]

use ote::selection::{Forest, GrownForest};
use ote::tree::Node;
use ote::{Dataset, DecisionTree, Method, SelectedEnsemble};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Features drawn from a small grid so ties and repeated values are common.
/// Labels follow a noisy rule on the first feature.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, levels: u32) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| f64::from(rng.gen_range(0..levels)) / f64::from(levels)).collect())
        .collect();
    let labels = rows
        .iter()
        .map(|r| {
            let signal = r[0] + if d > 1 { 0.5 * r[1] } else { 0.0 };
            u8::from(signal + rng.gen_range(-0.3..0.3) > 0.6)
        })
        .collect();
    Dataset::from_rows(&rows, labels).unwrap()
}

/// Class-1 probability by walking the node array directly.
pub fn walk(tree: &DecisionTree, row: &[f64]) -> f64 {
    let nodes = tree.nodes();
    let mut at = 0;
    loop {
        match nodes[at] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => at = if row[feature] <= threshold { left } else { right },
            Node::Leaf { positives, count, .. } => return positives as f64 / count as f64,
        }
    }
}

pub fn walk_label(tree: &DecisionTree, row: &[f64]) -> u8 {
    u8::from(2.0 * walk(tree, row) >= 1.0)
}

/// Number of misclassified held-out rows and the held-out count.
pub fn heldout_counts(tree: &DecisionTree, held_out: &[usize], data: &Dataset) -> (usize, usize) {
    let wrong = held_out
        .iter()
        .filter(|&&i| walk_label(tree, data.row(i)) != data.label(i))
        .count();
    (wrong, held_out.len())
}

/// A split found by exhaustive search: rows with `feature <= lo` go left,
/// rows with `feature >= hi` go right, and nothing lies in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Weighted child Gini impurity `sum_c 2 pos_c neg_c / n_c`, kept as an
/// exact fraction `num / den`.
fn child_impurity(lp: u128, ln: u128, rp: u128, rn: u128) -> (u128, u128) {
    let (l, r) = (lp + ln, rp + rn);
    (2 * lp * ln * r + 2 * rp * rn * l, l * r)
}

fn less(a: (u128, u128), b: (u128, u128)) -> bool {
    a.0 * b.1 < b.0 * a.1
}

/// Best Gini split over every feature and every gap between distinct
/// values, for a multiset of rows. Ties go to the lower feature, then the
/// lower cut. `None` when no split strictly lowers the impurity.
pub fn best_split(data: &Dataset, rows: &[usize]) -> Option<OracleSplit> {
    let pos = rows.iter().filter(|&&i| data.label(i) == 1).count() as u128;
    let neg = rows.len() as u128 - pos;
    let parent = (2 * pos * neg, rows.len() as u128);
    let mut best: Option<((u128, u128), OracleSplit)> = None;
    for f in 0..data.n_features() {
        let mut values: Vec<f64> = rows.iter().map(|&i| data.value(i, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (mut lp, mut ln, mut rp, mut rn) = (0u128, 0u128, 0u128, 0u128);
            for &i in rows {
                let y = data.label(i) == 1;
                match (data.value(i, f) <= lo, y) {
                    (true, true) => lp += 1,
                    (true, false) => ln += 1,
                    (false, true) => rp += 1,
                    (false, false) => rn += 1,
                }
            }
            let score = child_impurity(lp, ln, rp, rn);
            if !less(score, parent) {
                continue;
            }
            let candidate = OracleSplit { feature: f, lo, hi };
            match best {
                Some((s, _)) if !less(score, s) => {}
                _ => best = Some((score, candidate)),
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Replays sequential selection from scratch. Ranking is recomputed from
/// the held-out rows, and every Brier score is re-summed over the
/// currently admitted trees in admission order.
pub struct Replay {
    pub ranked: Vec<usize>,
    pub admitted: Vec<usize>,
    pub steps: Vec<(usize, f64, f64, bool)>,
}

pub fn replay(grown: &GrownForest, data: &Dataset, top: usize) -> Replay {
    let forest: &Forest = &grown.forest;
    let trees = forest.trees();
    let draws = forest.draws();
    let mut scored: Vec<(usize, usize, usize)> = (0..trees.len())
        .filter(|&t| !draws[t].held_out_indices.is_empty())
        .map(|t| {
            let (wrong, n) = heldout_counts(&trees[t], &draws[t].held_out_indices, data);
            (t, wrong, n)
        })
        .collect();
    // Compare wrong_a / n_a with wrong_b / n_b by cross-multiplication;
    // the stable sort keeps lower tree indices first on ties.
    scored.sort_by(|a, b| (a.1 * b.2).cmp(&(b.1 * a.2)));
    let ranked: Vec<usize> = scored.iter().take(top).map(|s| s.0).collect();

    let assessment = |t: usize| -> &[usize] {
        match grown.method {
            Method::Ote => &grown.validation_rows,
            Method::OteOob | Method::OteSub => &draws[t].held_out_indices,
        }
    };
    let mut admitted = vec![ranked[0]];
    let mut steps = Vec::new();
    for &t in &ranked[1..] {
        let rows = assessment(t);
        let k = admitted.len() as f64;
        let (mut before, mut after) = (0.0, 0.0);
        for &i in rows {
            let mut sum = 0.0;
            for &a in &admitted {
                sum += walk(&trees[a], data.row(i));
            }
            let y = f64::from(data.label(i));
            let rb = y - sum / k;
            let ra = y - (sum + walk(&trees[t], data.row(i))) / (k + 1.0);
            before += rb * rb;
            after += ra * ra;
        }
        let n = rows.len() as f64;
        let (before, after) = (before / n, after / n);
        let keep = after < before;
        if keep {
            admitted.push(t);
        }
        steps.push((t, before, after, keep));
    }
    Replay {
        ranked,
        admitted,
        steps,
    }
}

/// Checks one selected ensemble against the replay. Returns a description
/// of the first disagreement.
pub fn check_against_replay(selected: &SelectedEnsemble, replay: &Replay) -> Result<(), String> {
    if selected.tree_ids != replay.admitted {
        return Err(format!(
            "admitted {:?}, replay admitted {:?}",
            selected.tree_ids, replay.admitted
        ));
    }
    if selected.trace.len() != replay.steps.len() {
        return Err(format!("trace has {} steps, replay {}", selected.trace.len(), replay.steps.len()));
    }
    for (s, &(t, before, after, keep)) in selected.trace.iter().zip(&replay.steps) {
        if s.admitted && s.bs_after >= s.bs_before {
            return Err(format!("tree {} admitted without improvement", s.tree_id));
        }
        if s.tree_id != t || s.admitted != keep {
            return Err(format!("step for tree {} disagrees with replay", s.tree_id));
        }
        if (s.bs_before - before).abs() > 1e-12 || (s.bs_after - after).abs() > 1e-12 {
            return Err(format!(
                "tree {}: brier ({}, {}) vs replay ({before}, {after})",
                s.tree_id, s.bs_before, s.bs_after
            ));
        }
    }
    Ok(())
}

/// Exact Bayes error of a scenario by enumerating the leaf reached in
/// every generating tree. Each leaf has probability 1/4 under uniform
/// features, so all `4^T` combinations are equally likely.
pub fn exact_bayes_error(weights: &[[f64; 4]], theta1: f64, theta2: f64) -> f64 {
    let t = weights.len();
    let combos = 4usize.pow(t as u32);
    let mut total = 0.0;
    for c in 0..combos {
        let mut code = c;
        let mut sum = 0.0;
        for w in weights {
            sum += w[code % 4];
            code /= 4;
        }
        let z = theta2 * (sum / t as f64 - theta1);
        let p = z.exp() / (1.0 + z.exp());
        total += p.min(1.0 - p);
    }
    total / combos as f64
}

/// Leaf weights per generating tree for `(scenario, variant)`, read from
/// the golden node-weight table.
pub fn golden_weights(scenario: usize, variant: usize) -> Vec<[f64; 4]> {
    let text = include_str!("../data/node_weights.csv");
    let mut trees: Vec<[f64; 4]> = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (s, t, j, k): (usize, usize, usize, usize) =
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap());
        if s != scenario || k != variant {
            continue;
        }
        if trees.len() < t {
            trees.resize(t, [0.0; 4]);
        }
        trees[t - 1][j - 1] = f[4].parse().unwrap();
    }
    trees
}
