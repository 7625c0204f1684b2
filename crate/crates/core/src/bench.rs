//! Repeated random-split experiments: train every method on the training
//! part of each split, score it on the test part, and summarize.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use crate::dataset::{self, Dataset};
use crate::error::{OteError, Result};
use crate::exec::Execution;
use crate::metrics;
use crate::sampling::derive_seed;
use crate::selection::{self, GrownForest, Method, TrainConfig};
use crate::simgen::{self, ScenarioSpec, SimConfig};
use crate::tree::{label_from_proba, GrowParams};

const STREAM_SIMULATE: u64 = 201;
const STREAM_TRAIN: u64 = 202;

/// Methods the harness can evaluate. `FullForest` is the unselected
/// bootstrap forest `ote_oob` starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvalMethod {
    Ote,
    OteOob,
    OteSub,
    FullForest,
}

impl EvalMethod {
    pub const ALL: [EvalMethod; 4] = [
        EvalMethod::Ote,
        EvalMethod::OteOob,
        EvalMethod::OteSub,
        EvalMethod::FullForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvalMethod::Ote => "ote",
            EvalMethod::OteOob => "ote_oob",
            EvalMethod::OteSub => "ote_sub",
            EvalMethod::FullForest => "full_forest",
        }
    }

    fn selection(self) -> Option<Method> {
        match self {
            EvalMethod::Ote => Some(Method::Ote),
            EvalMethod::OteOob => Some(Method::OteOob),
            EvalMethod::OteSub => Some(Method::OteSub),
            EvalMethod::FullForest => None,
        }
    }
}

impl fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvalMethod {
    type Err = OteError;

    fn from_str(s: &str) -> Result<Self> {
        EvalMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| OteError::InvalidParameter(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Csv {
        path: PathBuf,
        label_column: String,
        positive_label: String,
    },
    /// A fresh realization is drawn for every repetition.
    Scenario { spec: ScenarioSpec, sim: SimConfig },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub source: Source,
    pub methods: Vec<EvalMethod>,
    pub split_fraction: f64,
    pub repetitions: usize,
    pub trees: usize,
    pub top_fraction: f64,
    /// Only meaningful with `ote`; defaults to 0.10.
    pub validation_fraction: Option<f64>,
    /// Only meaningful with `ote_sub`; defaults to 0.90.
    pub subsample_fraction: Option<f64>,
    pub params: GrowParams,
    pub base_seed: u64,
    pub execution: Execution,
    /// Adds a wall-time column to the CSV, which makes it non-reproducible.
    pub record_timing: bool,
}

impl ExperimentConfig {
    /// Simulated sources default to 1000 trees, data files to 1500.
    pub fn new(source: Source) -> Self {
        let trees = match source {
            Source::Scenario { .. } => 1000,
            Source::Csv { .. } => 1500,
        };
        ExperimentConfig {
            source,
            methods: vec![EvalMethod::OteOob, EvalMethod::OteSub, EvalMethod::FullForest],
            split_fraction: 0.7,
            repetitions: 100,
            trees,
            top_fraction: 0.2,
            validation_fraction: None,
            subsample_fraction: None,
            params: GrowParams::default(),
            base_seed: 0,
            execution: Execution::default(),
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(OteError::InvalidParameter("repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(OteError::InvalidParameter("no methods selected".into()));
        }
        if self.trees == 0 {
            return Err(OteError::InvalidParameter("trees must be at least 1".into()));
        }
        let in_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(OteError::InvalidParameter(format!("{name} {v} not in (0, 1)")))
            }
        };
        in_unit("split_fraction", self.split_fraction)?;
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(OteError::InvalidParameter(format!(
                "top_fraction {} not in (0, 1]",
                self.top_fraction
            )));
        }
        if let Some(v) = self.validation_fraction {
            if !self.methods.contains(&EvalMethod::Ote) {
                return Err(OteError::ConfigMismatch(
                    "validation_fraction only applies to ote".into(),
                ));
            }
            in_unit("validation_fraction", v)?;
        }
        if let Some(m) = self.subsample_fraction {
            if !self.methods.contains(&EvalMethod::OteSub) {
                return Err(OteError::ConfigMismatch(
                    "subsample_fraction only applies to ote_sub".into(),
                ));
            }
            in_unit("subsample_fraction", m)?;
        }
        Ok(())
    }

    fn methods_in_order(&self) -> Vec<EvalMethod> {
        let mut m = self.methods.clone();
        m.sort_unstable();
        m.dedup();
        m
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            trees: self.trees,
            top_fraction: self.top_fraction,
            params: self.params.clone(),
            validation_fraction: self.validation_fraction.unwrap_or(0.1),
            subsample_fraction: self.subsample_fraction.unwrap_or(0.9),
            seed,
            execution: self.execution,
        }
    }

    /// Builds a config from `key=value` pairs; later pairs override
    /// earlier ones.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let map: BTreeMap<&str, &str> = pairs.into_iter().collect();
        let get = |k: &str| map.get(k).copied();
        fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| OteError::InvalidParameter(format!("cannot parse {key} = `{v}`")))
        }
        for key in map.keys() {
            if !CONFIG_KEYS.contains(key) {
                return Err(OteError::InvalidParameter(format!("unknown config key `{key}`")));
            }
        }

        let source = match (get("csv"), get("scenario")) {
            (Some(_), Some(_)) => {
                return Err(OteError::ConfigMismatch("give either csv or scenario, not both".into()))
            }
            (Some(path), None) => Source::Csv {
                path: PathBuf::from(path),
                label_column: get("label_column")
                    .ok_or_else(|| OteError::InvalidParameter("csv source needs label_column".into()))?
                    .to_owned(),
                positive_label: get("positive_label")
                    .ok_or_else(|| OteError::InvalidParameter("csv source needs positive_label".into()))?
                    .to_owned(),
            },
            (None, Some(s)) => {
                let variant = get("variant").map_or(Ok(1), |v| parse("variant", v))?;
                let mut sim = SimConfig::default();
                if let Some(v) = get("n") {
                    sim.n = parse("n", v)?;
                }
                if let Some(v) = get("theta1") {
                    sim.theta1 = parse("theta1", v)?;
                }
                if let Some(v) = get("theta2") {
                    sim.theta2 = parse("theta2", v)?;
                }
                Source::Scenario {
                    spec: ScenarioSpec::new(parse("scenario", s)?, variant)?,
                    sim,
                }
            }
            (None, None) => return Err(OteError::InvalidParameter("need a csv or scenario source".into())),
        };
        let mut config = ExperimentConfig::new(source);
        if let Some(v) = get("methods") {
            config.methods = v
                .split(',')
                .map(|m| m.trim().parse())
                .collect::<Result<Vec<EvalMethod>>>()?;
        }
        if let Some(v) = get("split_fraction") {
            config.split_fraction = parse("split_fraction", v)?;
        }
        if let Some(v) = get("repetitions") {
            config.repetitions = parse("repetitions", v)?;
        }
        if let Some(v) = get("trees") {
            config.trees = parse("trees", v)?;
        }
        if let Some(v) = get("top_fraction") {
            config.top_fraction = parse("top_fraction", v)?;
        }
        if let Some(v) = get("validation_fraction") {
            config.validation_fraction = Some(parse("validation_fraction", v)?);
        }
        if let Some(v) = get("subsample_fraction") {
            config.subsample_fraction = Some(parse("subsample_fraction", v)?);
        }
        if let Some(v) = get("mtry") {
            config.params.mtry = if v == "auto" { None } else { Some(parse("mtry", v)?) };
        }
        if let Some(v) = get("min_node_size") {
            config.params.min_node_size = parse("min_node_size", v)?;
        }
        if let Some(v) = get("max_depth") {
            config.params.max_depth = if v == "none" { None } else { Some(parse("max_depth", v)?) };
        }
        if let Some(v) = get("min_impurity_decrease") {
            config.params.min_impurity_decrease = parse("min_impurity_decrease", v)?;
        }
        if let Some(v) = get("seed") {
            config.base_seed = parse("seed", v)?;
        }
        if let Some(v) = get("timing") {
            config.record_timing = parse("timing", v)?;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Keys accepted by [`ExperimentConfig::from_pairs`].
pub const CONFIG_KEYS: &[&str] = &[
    "csv",
    "label_column",
    "positive_label",
    "scenario",
    "variant",
    "n",
    "theta1",
    "theta2",
    "methods",
    "split_fraction",
    "repetitions",
    "trees",
    "top_fraction",
    "validation_fraction",
    "subsample_fraction",
    "mtry",
    "min_node_size",
    "max_depth",
    "min_impurity_decrease",
    "seed",
    "timing",
];

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| OteError::Format {
            line: i + 1,
            reason: "expected key=value".into(),
        })?;
        pairs.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(pairs)
}

/// Test-set scores of one method on one repetition.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: EvalMethod,
    pub repetition: usize,
    pub misclassification: f64,
    pub brier: f64,
    /// `None` when the test part has no positive rows.
    pub sensitivity: Option<f64>,
    /// `None` when chance agreement is 1.
    pub kappa: Option<f64>,
    pub selected_tree_count: usize,
    /// Seconds spent growing, selecting and predicting.
    pub wall_time: f64,
}

/// Runs every repetition; rows come back ordered by method, then
/// repetition.
pub fn run(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let shared = match &config.source {
        Source::Csv {
            path,
            label_column,
            positive_label,
        } => Some(dataset::load_csv(path, label_column, positive_label)?),
        Source::Scenario { .. } => None,
    };
    let methods = config.methods_in_order();
    let per_rep = config.execution.try_map(config.repetitions, |r| {
        let generated;
        let data = match (&shared, &config.source) {
            (Some(d), _) => d,
            (None, Source::Scenario { spec, sim }) => {
                let sim = SimConfig {
                    seed: derive_seed(rep_seed(config, r), STREAM_SIMULATE, 0),
                    execution: config.execution,
                    ..sim.clone()
                };
                generated = simgen::generate(spec, &sim)?;
                &generated
            }
            (None, Source::Csv { .. }) => unreachable!(),
        };
        run_repetition(config, &methods, data, r)
    })?;
    let mut rows: Vec<ResultRow> = per_rep.into_iter().flatten().collect();
    rows.sort_by_key(|row| (row.method, row.repetition));
    Ok(rows)
}

fn rep_seed(config: &ExperimentConfig, r: usize) -> u64 {
    config.base_seed.wrapping_add(r as u64)
}

fn run_repetition(
    config: &ExperimentConfig,
    methods: &[EvalMethod],
    data: &Dataset,
    r: usize,
) -> Result<Vec<ResultRow>> {
    let seed = rep_seed(config, r);
    let split = dataset::random_split(data, config.split_fraction, seed)?;
    let train_cfg = config.train_config(derive_seed(seed, STREAM_TRAIN, 0));
    let test = &split.test_indices;
    let truth: Vec<u8> = test.iter().map(|&i| data.label(i)).collect();

    let needs_bootstrap = methods
        .iter()
        .any(|m| matches!(m, EvalMethod::OteOob | EvalMethod::FullForest));
    let mut bootstrap: Option<(GrownForest, f64)> = None;
    if needs_bootstrap {
        let start = Instant::now();
        let grown = selection::grow_for(Method::OteOob, data, &split.train_indices, &train_cfg)?;
        bootstrap = Some((grown, start.elapsed().as_secs_f64()));
    }

    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let start = Instant::now();
        let mut extra_time = 0.0;
        let fresh;
        let grown = match method {
            EvalMethod::OteOob | EvalMethod::FullForest => {
                let (g, t) = bootstrap.as_ref().expect("bootstrap forest grown above");
                extra_time = *t;
                g
            }
            EvalMethod::Ote | EvalMethod::OteSub => {
                let m = method.selection().expect("selection method");
                fresh = selection::grow_for(m, data, &split.train_indices, &train_cfg)?;
                &fresh
            }
        };
        check_leakage(grown, test, data.n_rows(), r)?;
        let (probas, selected) = match method.selection() {
            Some(_) => {
                let ensemble = selection::select_from(grown, data, &train_cfg)?;
                (ensemble.predict_rows(data, test)?, ensemble.len())
            }
            None => {
                let trees = grown.forest.trees();
                let probas = test
                    .iter()
                    .map(|&i| selection::ensemble_proba(trees, data.row(i)))
                    .collect::<Result<Vec<_>>>()?;
                (probas, trees.len())
            }
        };
        let predicted: Vec<u8> = probas.iter().map(|&p| label_from_proba(p)).collect();
        rows.push(ResultRow {
            method,
            repetition: r,
            misclassification: metrics::misclassification(&predicted, &truth)?,
            brier: metrics::brier_score(&probas, &truth)?,
            sensitivity: undefined_as_none(metrics::sensitivity(&predicted, &truth))?,
            kappa: undefined_as_none(metrics::kappa(&predicted, &truth))?,
            selected_tree_count: selected,
            wall_time: start.elapsed().as_secs_f64() + extra_time,
        });
    }
    Ok(rows)
}

fn undefined_as_none(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(OteError::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Fails if any test row was used for growing, ranking or selection.
pub fn check_leakage(grown: &GrownForest, test: &[usize], n: usize, repetition: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for draw in grown.forest.draws() {
        for &i in draw.in_indices.iter().chain(&draw.held_out_indices) {
            seen[i] = true;
        }
    }
    for &i in &grown.validation_rows {
        seen[i] = true;
    }
    if test.iter().any(|&i| seen[i]) {
        return Err(OteError::Leakage { repetition });
    }
    Ok(())
}

pub const CSV_HEADER: &str = "method,repetition,misclassification,brier,sensitivity,kappa,selected_trees";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |v| v.to_string())
}

/// Writes result rows as CSV with a fixed column order. The wall-time
/// column is appended only when `with_timing` is set.
pub fn write_results_csv(rows: &[ResultRow], mut out: impl Write, with_timing: bool) -> std::io::Result<()> {
    write!(out, "{CSV_HEADER}")?;
    if with_timing {
        write!(out, ",wall_time_s")?;
    }
    writeln!(out)?;
    for row in rows {
        write!(
            out,
            "{},{},{},{},{},{},{}",
            row.method,
            row.repetition,
            row.misclassification,
            row.brier,
            fmt_opt(row.sensitivity),
            fmt_opt(row.kappa),
            row.selected_tree_count
        )?;
        if with_timing {
            write!(out, ",{:.6}", row.wall_time)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stat {
    /// NaN when no value was defined.
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    pub count: usize,
}

impl Stat {
    /// Values are sorted before summing so the result does not depend on
    /// input order.
    fn of(values: impl IntoIterator<Item = f64>) -> Stat {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Stat {
                mean: f64::NAN,
                sd: f64::NAN,
                count: 0,
            };
        }
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        sq.sort_by(f64::total_cmp);
        let sd = if v.len() > 1 {
            (sq.iter().sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat {
            mean,
            sd,
            count: v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: EvalMethod,
    pub rows: usize,
    pub misclassification: Stat,
    pub brier: Stat,
    pub sensitivity: Stat,
    pub kappa: Stat,
    pub selected_trees: Stat,
    pub wall_time: Stat,
}

/// Per-method mean and standard deviation of every metric.
pub fn aggregate(rows: &[ResultRow]) -> Result<Vec<MethodSummary>> {
    if rows.is_empty() {
        return Err(OteError::Empty("result rows"));
    }
    let mut by_method: BTreeMap<EvalMethod, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        by_method.entry(row.method).or_default().push(row);
    }
    Ok(by_method
        .into_iter()
        .map(|(method, rs)| MethodSummary {
            method,
            rows: rs.len(),
            misclassification: Stat::of(rs.iter().map(|r| r.misclassification)),
            brier: Stat::of(rs.iter().map(|r| r.brier)),
            sensitivity: Stat::of(rs.iter().filter_map(|r| r.sensitivity)),
            kappa: Stat::of(rs.iter().filter_map(|r| r.kappa)),
            selected_trees: Stat::of(rs.iter().map(|r| r.selected_tree_count as f64)),
            wall_time: Stat::of(rs.iter().map(|r| r.wall_time)),
        })
        .collect())
}

fn fmt_mean(s: Stat) -> String {
    if s.count == 0 {
        "NA".to_owned()
    } else {
        format!("{:.4}", s.mean)
    }
}

/// Aligned plain-text summary table.
pub fn format_summary(summaries: &[MethodSummary]) -> String {
    let header = [
        "method", "reps", "misclass", "sd", "brier", "sd", "sensitivity", "kappa", "trees", "time_s",
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|h| h.to_string()).collect()];
    for s in summaries {
        table.push(vec![
            s.method.to_string(),
            s.rows.to_string(),
            format!("{:.4}", s.misclassification.mean),
            format!("{:.4}", s.misclassification.sd),
            format!("{:.4}", s.brier.mean),
            format!("{:.4}", s.brier.sd),
            fmt_mean(s.sensitivity),
            fmt_mean(s.kappa),
            format!("{:.1}", s.selected_trees.mean),
            format!("{:.3}", s.wall_time.mean),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, &w))| {
                if c == 0 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepBlock {
    pub top_fraction: f64,
    /// Size of the candidate pool, `M`.
    pub candidates: usize,
    pub rows: Vec<ResultRow>,
    pub summary: Vec<MethodSummary>,
}

/// Reruns the experiment once per `M` fraction.
pub fn sweep_m(config: &ExperimentConfig, top_fractions: &[f64]) -> Result<Vec<SweepBlock>> {
    if top_fractions.is_empty() {
        return Err(OteError::Empty("M fraction list"));
    }
    top_fractions
        .iter()
        .map(|&f| {
            let cfg = ExperimentConfig {
                top_fraction: f,
                ..config.clone()
            };
            cfg.validate()?;
            let candidates = cfg.train_config(0).top_count()?;
            let rows = run(&cfg)?;
            let summary = aggregate(&rows)?;
            Ok(SweepBlock {
                top_fraction: f,
                candidates,
                rows,
                summary,
            })
        })
        .collect()
}
