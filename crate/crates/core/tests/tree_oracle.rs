mod common;

use common::{best_split, random_dataset, rng, walk};
use ote::sampling::bootstrap;
use ote::tree::{grow, grow_on, Node};
use ote::{Dataset, DecisionTree, GrowParams};
use proptest::prelude::*;

/// Walks the grown tree alongside the oracle, routing the in-sample
/// multiset down both branches.
fn check_node(tree: &DecisionTree, at: usize, rows: &[usize], data: &Dataset) -> Result<(), String> {
    let pos = rows.iter().filter(|&&i| data.label(i) == 1).count();
    let pure = pos == 0 || pos == rows.len();
    let oracle = if pure || rows.len() <= 1 { None } else { best_split(data, rows) };
    match (&tree.nodes()[at], oracle) {
        (Node::Leaf { positives, count, .. }, None) => {
            if (*positives, *count) != (pos, rows.len()) {
                return Err(format!("leaf {at}: {positives}/{count}, expected {pos}/{}", rows.len()));
            }
            Ok(())
        }
        (
            Node::Split {
                feature,
                threshold,
                left,
                right,
            },
            Some(best),
        ) => {
            if *feature != best.feature || !(*threshold >= best.lo && *threshold < best.hi) {
                return Err(format!(
                    "node {at}: split x{feature} <= {threshold}, oracle x{} in [{}, {})",
                    best.feature, best.lo, best.hi
                ));
            }
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| data.value(i, *feature) <= *threshold);
            check_node(tree, *left, &l, data)?;
            check_node(tree, *right, &r, data)
        }
        (node, oracle) => Err(format!("node {at}: tree has {node:?}, oracle {oracle:?}")),
    }
}

#[test]
fn splits_match_exhaustive_search() {
    let mut r = rng(11);
    for case in 0..60u64 {
        let n = 10 + (case as usize * 7) % 41;
        let d = 1 + (case as usize) % 5;
        let data = random_dataset(&mut r, n, d, 6);
        let params = GrowParams {
            mtry: Some(d),
            ..GrowParams::default()
        };
        let draw = bootstrap(n, case).unwrap();
        let tree = grow(&data, &draw, &params, case).unwrap();
        check_node(&tree, 0, &draw.in_indices, &data).unwrap_or_else(|e| panic!("case {case}: {e}"));
    }
}

#[test]
fn fully_grown_tree_fits_distinct_rows() {
    let mut r = rng(3);
    let data = random_dataset(&mut r, 40, 3, 1000);
    let rows: Vec<usize> = (0..40).collect();
    let params = GrowParams {
        mtry: Some(3),
        ..GrowParams::default()
    };
    let tree = grow_on(&data, &rows, &params, 0).unwrap();
    for i in rows {
        assert_eq!(walk(&tree, data.row(i)), f64::from(data.label(i)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leaves_partition_in_sample_rows(seed in 0u64..10_000, n in 5usize..50, d in 1usize..6) {
        let data = random_dataset(&mut rng(seed), n, d, 5);
        let draw = bootstrap(n, seed).unwrap();
        let tree = grow(&data, &draw, &GrowParams::default(), seed).unwrap();
        let total: usize = tree
            .nodes()
            .iter()
            .map(|node| match node {
                Node::Leaf { count, .. } => *count,
                Node::Split { .. } => 0,
            })
            .sum();
        prop_assert_eq!(total, draw.in_indices.len());
        for i in 0..n {
            let p = tree.predict_proba(data.row(i)).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert_eq!(p, walk(&tree, data.row(i)));
        }
    }

    #[test]
    fn growth_is_reproducible(seed in 0u64..10_000) {
        let data = random_dataset(&mut rng(seed), 30, 4, 5);
        let draw = bootstrap(30, seed).unwrap();
        let a = grow(&data, &draw, &GrowParams::default(), seed).unwrap();
        let b = grow(&data, &draw, &GrowParams::default(), seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
