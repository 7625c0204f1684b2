mod common;

use common::{check_against_replay, random_dataset, replay, rng};
use ote::selection::{grow_for, select_from};
use ote::{Execution, Method, TrainConfig};
use proptest::prelude::*;

fn run_case(seed: u64, n: usize, d: usize, trees: usize, top_fraction: f64, method: Method) -> Result<(), String> {
    let data = random_dataset(&mut rng(seed), n, d, 8);
    let rows: Vec<usize> = (0..n).collect();
    let config = TrainConfig {
        trees,
        top_fraction,
        seed,
        execution: Execution::Sequential,
        ..TrainConfig::default()
    };
    let grown = grow_for(method, &data, &rows, &config).map_err(|e| e.to_string())?;
    let selected = select_from(&grown, &data, &config).map_err(|e| e.to_string())?;
    let oracle = replay(&grown, &data, config.top_count().unwrap());
    check_against_replay(&selected, &oracle)
}

#[test]
fn fixed_cases_match_replay() {
    for method in Method::ALL {
        for seed in 0..10 {
            run_case(seed, 40, 3, 30, 0.5, method).unwrap_or_else(|e| panic!("{method} seed {seed}: {e}"));
        }
    }
}

#[test]
fn full_pool_with_single_candidate() {
    for method in Method::ALL {
        run_case(5, 30, 2, 1, 1.0, method).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_cases_match_replay(
        seed in 0u64..100_000,
        n in 20usize..=60,
        d in 1usize..6,
        trees in 1usize..=40,
        top_fraction in 0.05f64..=1.0,
        m in 0usize..3,
    ) {
        let method = Method::ALL[m];
        prop_assert_eq!(run_case(seed, n, d, trees, top_fraction, method), Ok(()));
    }
}
