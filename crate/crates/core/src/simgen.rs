//! Synthetic binary classification scenarios built from small generating
//! trees.
//!
//! Scenario `s` (1..=4) uses `s + 2` depth-2 generating trees over
//! disjoint triples of `Uniform(0, 1)` features. Tree `t` maps a row to the
//! weight `λ[t][j][k]` of the leaf `j` it reaches, for complexity variant
//! `k`. The class-1 probability is a logistic transform of the mean leaf
//! weight:
//!
//! ```text
//! p(y = 1 | x) = 1 / (1 + exp(-θ₂ · (Σₜ p̂ₜ(x) / T − θ₁)))
//! ```

use crate::dataset::Dataset;
use crate::error::{OteError, Result};
use crate::exec::Execution;
use crate::sampling::{derive_seed, rng};
use rand::Rng;

const STREAM_GENERATE: u64 = 101;
const STREAM_BAYES: u64 = 102;
const CHUNK_ROWS: usize = 4096;

/// Per generating tree: (root feature, feature split under the left
/// branch, feature split under the right branch), 0-based.
const SPLIT_FEATURES: [(usize, usize, usize); 6] = [
    (0, 2, 1),
    (3, 5, 4),
    (6, 7, 8),
    (9, 10, 11),
    (12, 13, 14),
    (15, 16, 17),
];

/// Leaf weights of one generating tree: `[node][variant]`.
type TreeWeights = [[f64; 4]; 4];

const SCENARIO_1: [TreeWeights; 3] = [
    [[0.9, 0.8, 0.7, 0.6], [0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4], [0.9, 0.8, 0.7, 0.6]],
    [[0.9, 0.8, 0.7, 0.6], [0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4], [0.9, 0.8, 0.7, 0.6]],
    [[0.9, 0.8, 0.7, 0.6], [0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4], [0.9, 0.8, 0.7, 0.6]],
];

const SCENARIO_2: [TreeWeights; 4] = [
    [[0.9, 0.8, 0.7, 0.6], [0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4], [0.9, 0.8, 0.7, 0.6]],
    [[0.9, 0.8, 0.7, 0.6], [0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4], [0.9, 0.8, 0.7, 0.6]],
    [[0.9, 0.8, 0.7, 0.6], [0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4], [0.9, 0.8, 0.7, 0.6]],
    [[0.9, 0.8, 0.7, 0.6], [0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4], [0.9, 0.8, 0.7, 0.6]],
];

const SCENARIO_3: [TreeWeights; 5] = [
    [[0.9, 0.9, 0.9, 0.8], [0.1, 0.1, 0.1, 0.2], [0.1, 0.1, 0.1, 0.2], [0.9, 0.9, 0.9, 0.8]],
    [[0.9, 0.9, 0.9, 0.8], [0.1, 0.1, 0.1, 0.2], [0.1, 0.1, 0.1, 0.2], [0.9, 0.9, 0.9, 0.8]],
    [[0.9, 0.8, 0.7, 0.7], [0.1, 0.2, 0.3, 0.3], [0.1, 0.2, 0.3, 0.3], [0.9, 0.8, 0.7, 0.7]],
    [[0.9, 0.8, 0.7, 0.7], [0.1, 0.2, 0.3, 0.3], [0.1, 0.2, 0.3, 0.3], [0.9, 0.8, 0.7, 0.7]],
    [[0.9, 0.8, 0.7, 0.7], [0.1, 0.2, 0.3, 0.3], [0.1, 0.2, 0.3, 0.3], [0.9, 0.8, 0.7, 0.7]],
];

const SCENARIO_4: [TreeWeights; 6] = [
    [[0.9, 0.9, 0.9, 0.8], [0.1, 0.1, 0.1, 0.2], [0.1, 0.1, 0.1, 0.2], [0.9, 0.9, 0.9, 0.8]],
    [[0.9, 0.9, 0.9, 0.8], [0.1, 0.1, 0.1, 0.2], [0.1, 0.1, 0.1, 0.2], [0.9, 0.9, 0.9, 0.8]],
    [[0.9, 0.9, 0.9, 0.8], [0.1, 0.1, 0.1, 0.2], [0.1, 0.1, 0.1, 0.2], [0.9, 0.9, 0.9, 0.8]],
    [[0.9, 0.8, 0.7, 0.7], [0.1, 0.2, 0.3, 0.3], [0.1, 0.2, 0.3, 0.3], [0.9, 0.8, 0.7, 0.7]],
    [[0.9, 0.8, 0.7, 0.6], [0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4], [0.9, 0.8, 0.7, 0.6]],
    [[0.9, 0.8, 0.7, 0.6], [0.1, 0.2, 0.3, 0.4], [0.1, 0.2, 0.3, 0.4], [0.9, 0.8, 0.7, 0.6]],
];

/// Node weights for every scenario, stored per scenario.
#[derive(Clone, Copy, Debug)]
pub struct LambdaTable {
    blocks: [&'static [TreeWeights]; 4],
}

pub fn lambda_table() -> LambdaTable {
    LambdaTable {
        blocks: [&SCENARIO_1, &SCENARIO_2, &SCENARIO_3, &SCENARIO_4],
    }
}

impl LambdaTable {
    /// `λ` for `scenario`, generating `tree`, leaf `node` and `variant`,
    /// all 1-based.
    pub fn weight(&self, scenario: usize, tree: usize, node: usize, variant: usize) -> Result<f64> {
        let block = scenario
            .checked_sub(1)
            .and_then(|s| self.blocks.get(s))
            .ok_or_else(|| OteError::InvalidParameter(format!("scenario {scenario} not in 1..=4")))?;
        let out_of_range = || {
            OteError::InvalidParameter(format!(
                "no weight for scenario {scenario}, tree {tree}, node {node}, variant {variant}"
            ))
        };
        let weights = tree.checked_sub(1).and_then(|t| block.get(t)).ok_or_else(out_of_range)?;
        if !(1..=4).contains(&node) || !(1..=4).contains(&variant) {
            return Err(out_of_range());
        }
        Ok(weights[node - 1][variant - 1])
    }

    pub fn trees_in(&self, scenario: usize) -> usize {
        self.blocks[scenario - 1].len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioSpec {
    scenario: usize,
    variant: usize,
}

impl ScenarioSpec {
    pub fn new(scenario: usize, variant: usize) -> Result<Self> {
        if !(1..=4).contains(&scenario) || !(1..=4).contains(&variant) {
            return Err(OteError::InvalidParameter(format!(
                "scenario {scenario}, variant {variant}: both must be in 1..=4"
            )));
        }
        Ok(ScenarioSpec { scenario, variant })
    }

    pub fn scenario(&self) -> usize {
        self.scenario
    }

    pub fn variant(&self) -> usize {
        self.variant
    }

    /// Number of generating trees (3..=6).
    pub fn components(&self) -> usize {
        self.scenario + 2
    }

    /// Number of features (9, 12, 15 or 18).
    pub fn n_features(&self) -> usize {
        3 * self.components()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub theta1: f64,
    pub theta2: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 1000,
            theta1: 0.5,
            theta2: 15.0,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(OteError::InvalidParameter("n must be at least 1".into()));
        }
        if !self.theta1.is_finite() || !self.theta2.is_finite() || self.theta2 <= 0.0 {
            return Err(OteError::InvalidParameter(format!(
                "theta2 must be positive and finite, got {}",
                self.theta2
            )));
        }
        Ok(())
    }
}

/// Leaf weight of generating tree `t` (1-based) for `row`.
pub fn component_prob(t: usize, row: &[f64], spec: &ScenarioSpec, table: &LambdaTable) -> Result<f64> {
    if t == 0 || t > spec.components() {
        return Err(OteError::InvalidParameter(format!(
            "component {t} not in 1..={}",
            spec.components()
        )));
    }
    if row.len() < spec.n_features() {
        return Err(OteError::DimensionMismatch {
            expected: spec.n_features(),
            found: row.len(),
        });
    }
    table.weight(spec.scenario, t, leaf_of(t, row), spec.variant)
}

/// 1-based leaf reached by `row` in generating tree `t`.
fn leaf_of(t: usize, row: &[f64]) -> usize {
    let (root, left, right) = SPLIT_FEATURES[t - 1];
    match (row[root] <= 0.5, row[left] <= 0.5, row[right] <= 0.5) {
        (true, true, _) => 1,
        (true, false, _) => 2,
        (false, _, true) => 3,
        (false, _, false) => 4,
    }
}

/// `θ₂ · (mean component weight − θ₁)` passed through the logistic function.
pub fn logistic_prob(mean_weight: f64, theta1: f64, theta2: f64) -> f64 {
    1.0 / (1.0 + (-theta2 * (mean_weight - theta1)).exp())
}

/// True class-1 probability of `row` under the scenario.
pub fn class_prob(row: &[f64], spec: &ScenarioSpec, table: &LambdaTable, config: &SimConfig) -> Result<f64> {
    let mut total = 0.0;
    for t in 1..=spec.components() {
        total += component_prob(t, row, spec, table)?;
    }
    Ok(logistic_prob(total / spec.components() as f64, config.theta1, config.theta2))
}

/// Draws `config.n` rows. Rows are produced in fixed-size chunks, each
/// with its own derived RNG, so the output does not depend on threading.
pub fn generate(spec: &ScenarioSpec, config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    let d = spec.n_features();
    let table = lambda_table();
    let chunks = config.n.div_ceil(CHUNK_ROWS);
    let parts = config.execution.try_map(chunks, |c| {
        let rows = CHUNK_ROWS.min(config.n - c * CHUNK_ROWS);
        let mut rng = rng(derive_seed(config.seed, STREAM_GENERATE, c as u64));
        let mut features = Vec::with_capacity(rows * d);
        let mut labels = Vec::with_capacity(rows);
        let mut row = vec![0.0; d];
        for _ in 0..rows {
            row.iter_mut().for_each(|x| *x = rng.gen::<f64>());
            let p = class_prob(&row, spec, &table, config)?;
            labels.push(u8::from(rng.gen::<f64>() < p));
            features.extend_from_slice(&row);
        }
        Ok::<_, OteError>((features, labels))
    })?;
    let (features, labels): (Vec<Vec<f64>>, Vec<Vec<u8>>) = parts.into_iter().unzip();
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    Dataset::new(features.concat(), labels.concat(), names)
}

/// Monte-Carlo estimate of the Bayes error `E[min(p, 1 − p)]` from
/// `mc_rows` uniform draws.
pub fn bayes_error(spec: &ScenarioSpec, config: &SimConfig, mc_rows: usize) -> Result<f64> {
    config.validate()?;
    if mc_rows < 10_000 {
        return Err(OteError::InvalidParameter(format!(
            "need at least 10000 Monte-Carlo rows, got {mc_rows}"
        )));
    }
    let d = spec.n_features();
    let table = lambda_table();
    let chunks = mc_rows.div_ceil(CHUNK_ROWS);
    let sums = config.execution.try_map(chunks, |c| {
        let rows = CHUNK_ROWS.min(mc_rows - c * CHUNK_ROWS);
        let mut rng = rng(derive_seed(config.seed, STREAM_BAYES, c as u64));
        let mut row = vec![0.0; d];
        let mut sum = 0.0;
        for _ in 0..rows {
            row.iter_mut().for_each(|x| *x = rng.gen::<f64>());
            let p = class_prob(&row, spec, &table, config)?;
            sum += p.min(1.0 - p);
        }
        Ok::<_, OteError>(sum)
    })?;
    Ok(sums.iter().sum::<f64>() / mc_rows as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(s: usize, k: usize) -> ScenarioSpec {
        ScenarioSpec::new(s, k).unwrap()
    }

    #[test]
    fn table_lookups() {
        let t = lambda_table();
        assert_eq!(t.weight(1, 1, 1, 1).unwrap(), 0.9);
        assert_eq!(t.weight(1, 1, 2, 4).unwrap(), 0.4);
        assert_eq!(t.weight(2, 1, 2, 4).unwrap(), 0.4);
        assert_eq!(t.weight(4, 6, 1, 2).unwrap(), 0.8);
        assert!(t.weight(1, 4, 1, 1).is_err());
        assert!(t.weight(5, 1, 1, 1).is_err());
        assert!(t.weight(1, 1, 5, 1).is_err());
        for s in 1..=4 {
            assert_eq!(t.trees_in(s), s + 2);
        }
    }

    #[test]
    fn scenario_dimensions() {
        let dims: Vec<(usize, usize)> = (1..=4).map(|s| (spec(s, 1).components(), spec(s, 1).n_features())).collect();
        assert_eq!(dims, vec![(3, 9), (4, 12), (5, 15), (6, 18)]);
        assert!(ScenarioSpec::new(0, 1).is_err());
        assert!(ScenarioSpec::new(1, 5).is_err());
    }

    #[test]
    fn first_component_examples() {
        let t = lambda_table();
        let mut row = vec![0.6; 9];
        row[0] = 0.3;
        row[2] = 0.2;
        assert_eq!(component_prob(1, &row, &spec(1, 1), &t).unwrap(), 0.9);
        row[2] = 0.7;
        assert_eq!(component_prob(1, &row, &spec(1, 1), &t).unwrap(), 0.1);
        assert!(component_prob(4, &row, &spec(1, 1), &t).is_err());
        assert!(component_prob(0, &row, &spec(1, 1), &t).is_err());
        assert!(component_prob(1, &row[..5], &spec(1, 1), &t).is_err());
    }

    #[test]
    fn exactly_one_leaf_fires() {
        for bits in 0u32..(1 << 18) {
            if bits % 997 != 0 {
                continue;
            }
            let row: Vec<f64> = (0..18).map(|j| if bits >> j & 1 == 1 { 0.75 } else { 0.25 }).collect();
            for t in 1..=6 {
                let (root, left, right) = SPLIT_FEATURES[t - 1];
                let fired = [
                    row[root] <= 0.5 && row[left] <= 0.5,
                    row[root] <= 0.5 && row[left] > 0.5,
                    row[root] > 0.5 && row[right] <= 0.5,
                    row[root] > 0.5 && row[right] > 0.5,
                ];
                assert_eq!(fired.iter().filter(|&&f| f).count(), 1);
                assert!(fired[leaf_of(t, &row) - 1]);
            }
        }
    }

    #[test]
    fn logistic_examples() {
        assert_eq!(logistic_prob(0.5, 0.5, 15.0), 0.5);
        let hi = logistic_prob(0.9, 0.5, 15.0);
        assert!((hi - 1.0 / (1.0 + (-6.0f64).exp())).abs() < 1e-15);
        assert!((hi - 0.997_527).abs() < 1e-6);
        let lo = logistic_prob(0.1, 0.5, 15.0);
        assert!((lo - 0.002_473).abs() < 1e-6);
        // All three components on a 0.1 leaf.
        let t = lambda_table();
        let row = [0.3, 0.9, 0.8, 0.3, 0.9, 0.8, 0.3, 0.8, 0.9];
        let p = class_prob(&row, &spec(1, 1), &t, &SimConfig::default()).unwrap();
        assert!((p - lo).abs() < 1e-15);
    }

    #[test]
    fn class_prob_monotone_in_mean_weight() {
        let mut prev = 0.0;
        for i in 0..=100 {
            let p = logistic_prob(i as f64 / 100.0, 0.5, 15.0);
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn generate_shapes_and_determinism() {
        let cfg = SimConfig {
            n: 5000,
            seed: 3,
            ..SimConfig::default()
        };
        let a = generate(&spec(1, 1), &cfg).unwrap();
        assert_eq!(a.n_features(), 9);
        assert_eq!(a.n_rows(), 5000);
        assert!((0..a.n_rows()).all(|i| a.row(i).iter().all(|&x| (0.0..1.0).contains(&x))));
        let seq = SimConfig {
            execution: Execution::Sequential,
            ..cfg.clone()
        };
        assert_eq!(a, generate(&spec(1, 1), &seq).unwrap());
        assert_eq!(generate(&spec(4, 2), &cfg).unwrap().n_features(), 18);
        assert!(generate(&spec(1, 1), &SimConfig { n: 0, ..cfg.clone() }).is_err());
        assert!(generate(&spec(1, 1), &SimConfig { theta2: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn bayes_error_degenerate_and_bounds() {
        let steep = SimConfig {
            theta2: 1e4,
            ..SimConfig::default()
        };
        // Mean weight never equals 0.5 exactly in scenario 1 variant 1.
        let e = bayes_error(&spec(1, 1), &steep, 20_000).unwrap();
        assert!(e < 1e-6, "{e}");
        assert!(bayes_error(&spec(1, 1), &SimConfig::default(), 100).is_err());
        let e = bayes_error(&spec(1, 4), &SimConfig::default(), 20_000).unwrap();
        assert!((0.0..=0.5).contains(&e));
    }
}
