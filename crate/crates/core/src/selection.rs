//! Tree ranking by held-out error and sequential Brier-score selection.
//!
//! All three methods share the same skeleton: grow `T` trees, rank them by
//! their error on rows they did not see, keep the top `M`, then walk the
//! ranking admitting a candidate only when it strictly lowers the Brier
//! score of the ensemble built so far. They differ in which rows a
//! candidate is judged on:
//!
//! | method    | resample   | assessment rows for candidate `j`        |
//! |-----------|------------|------------------------------------------|
//! | `ote`     | bootstrap  | fixed internal validation set            |
//! | `ote_oob` | bootstrap  | out-of-bag rows of `j`'s own draw        |
//! | `ote_sub` | sub-sample | rows left out of `j`'s own sub-sample    |
//!
//! Both Brier scores of a step are computed on the same rows. Ensemble
//! probabilities are the unweighted mean of tree probabilities.

use std::fmt;
use std::str::FromStr;

use crate::dataset::Dataset;
use crate::error::{OteError, Result};
use crate::exec::Execution;
use crate::sampling::{self, derive_seed, DrawKind, SampleDraw};
use crate::tree::{self, label_from_proba, DecisionTree, GrowParams};

const STREAM_DRAW: u64 = 1;
const STREAM_TREE: u64 = 2;
const STREAM_VALIDATION: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ote,
    OteOob,
    OteSub,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ote, Method::OteOob, Method::OteSub];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ote => "ote",
            Method::OteOob => "ote_oob",
            Method::OteSub => "ote_sub",
        }
    }

    pub fn draw_kind(self) -> DrawKind {
        match self {
            Method::Ote | Method::OteOob => DrawKind::Bootstrap,
            Method::OteSub => DrawKind::Subsample,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = OteError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| OteError::InvalidParameter(format!("unknown method `{s}`")))
    }
}

/// `T` trees with the draws they were grown on, in growth order.
#[derive(Clone, Debug)]
pub struct Forest {
    trees: Vec<DecisionTree>,
    draws: Vec<SampleDraw>,
}

impl Forest {
    pub fn new(trees: Vec<DecisionTree>, draws: Vec<SampleDraw>) -> Result<Self> {
        if trees.is_empty() {
            return Err(OteError::Empty("forest"));
        }
        if trees.len() != draws.len() {
            return Err(OteError::LengthMismatch {
                left: trees.len(),
                right: draws.len(),
            });
        }
        Ok(Forest { trees, draws })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn draws(&self) -> &[SampleDraw] {
        &self.draws
    }

    /// Held-out error of every tree, in tree order.
    pub fn heldout_errors(&self, data: &Dataset, exec: Execution) -> Vec<HeldOutError> {
        exec.map(self.len(), |t| heldout_error(&self.trees[t], &self.draws[t], data))
    }
}

/// Parameters for growing a forest over a set of training rows.
#[derive(Clone, Debug)]
pub struct ForestSpec<'a> {
    pub kind: DrawKind,
    pub n_trees: usize,
    /// Sub-sample size; ignored for bootstrap draws.
    pub subsample_size: usize,
    pub params: &'a GrowParams,
    pub seed: u64,
}

/// Grows `n_trees` trees on resamples of `rows`. Tree `t` uses seeds
/// derived from `(seed, t)` only.
pub fn grow_forest(data: &Dataset, rows: &[usize], spec: &ForestSpec<'_>, exec: Execution) -> Result<Forest> {
    if rows.is_empty() {
        return Err(OteError::Empty("training rows"));
    }
    if spec.n_trees == 0 {
        return Err(OteError::InvalidParameter("tree count must be positive".into()));
    }
    spec.params.validate(data.n_features())?;
    let grown = exec.try_map(spec.n_trees, |t| {
        let draw_seed = derive_seed(spec.seed, STREAM_DRAW, t as u64);
        let draw = match spec.kind {
            DrawKind::Bootstrap => sampling::bootstrap(rows.len(), draw_seed)?,
            DrawKind::Subsample => sampling::subsample(rows.len(), spec.subsample_size, draw_seed)?,
        }
        .remap(rows);
        let tree = tree::grow(data, &draw, spec.params, derive_seed(spec.seed, STREAM_TREE, t as u64))?;
        Ok::<_, OteError>((tree, draw))
    })?;
    let (trees, draws) = grown.into_iter().unzip();
    Forest::new(trees, draws)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeldOutError {
    pub error: f64,
    /// False when the draw held nothing out; `error` is then 1.0.
    pub assessable: bool,
}

/// Misclassification rate of `tree` on the held-out rows of `draw`.
pub fn heldout_error(tree: &DecisionTree, draw: &SampleDraw, data: &Dataset) -> HeldOutError {
    if draw.held_out_indices.is_empty() {
        return HeldOutError {
            error: 1.0,
            assessable: false,
        };
    }
    let wrong = draw
        .held_out_indices
        .iter()
        .filter(|&&i| label_from_proba(tree.proba(data.row(i))) != data.label(i))
        .count();
    HeldOutError {
        error: wrong as f64 / draw.held_out_indices.len() as f64,
        assessable: true,
    }
}

/// Trees ordered by held-out error, truncated to the top `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedForest {
    /// Tree indices, best first. Unassessable trees never appear.
    pub order: Vec<usize>,
    /// Held-out error of every tree in the forest, by tree index.
    pub errors: Vec<f64>,
}

impl RankedForest {
    pub fn top(&self) -> usize {
        self.order[0]
    }
}

/// Ranks the forest and keeps the `top` best trees.
pub fn rank(forest: &Forest, data: &Dataset, top: usize) -> Result<RankedForest> {
    rank_errors(&forest.heldout_errors(data, Execution::default()), top)
}

/// Stable ascending sort of assessable trees by error, ties broken by tree
/// index. Returns fewer than `top` trees when fewer are assessable.
pub fn rank_errors(errors: &[HeldOutError], top: usize) -> Result<RankedForest> {
    if top == 0 || top > errors.len() {
        return Err(OteError::InvalidParameter(format!(
            "M = {top} outside 1..={}",
            errors.len()
        )));
    }
    let mut order: Vec<usize> = (0..errors.len()).filter(|&t| errors[t].assessable).collect();
    if order.is_empty() {
        return Err(OteError::NoAssessableTrees);
    }
    order.sort_by(|&a, &b| errors[a].error.total_cmp(&errors[b].error));
    order.truncate(top);
    Ok(RankedForest {
        order,
        errors: errors.iter().map(|e| e.error).collect(),
    })
}

/// Unweighted mean of the trees' class-1 probabilities.
pub fn ensemble_proba(trees: &[DecisionTree], row: &[f64]) -> Result<f64> {
    if trees.is_empty() {
        return Err(OteError::Empty("tree list"));
    }
    let mut sum = 0.0;
    for tree in trees {
        sum += tree.predict_proba(row)?;
    }
    Ok(sum / trees.len() as f64)
}

/// Brier score of the ensemble on `rows` of `data`.
pub fn ensemble_brier(trees: &[DecisionTree], rows: &[usize], data: &Dataset) -> Result<f64> {
    if rows.is_empty() {
        return Err(OteError::Empty("evaluation set"));
    }
    let mut sum = 0.0;
    for &i in rows {
        let r = f64::from(data.label(i)) - ensemble_proba(trees, data.row(i))?;
        sum += r * r;
    }
    Ok(sum / rows.len() as f64)
}

/// One candidate decision during selection.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub tree_id: usize,
    /// Brier score of the current ensemble on the assessment rows.
    pub bs_before: f64,
    /// Brier score with the candidate added, on the same rows.
    pub bs_after: f64,
    pub admitted: bool,
    pub assessment_size: usize,
}

/// Admitted trees in admission order. The first tree is always the
/// top-ranked one and has no trace entry; `trace` covers ranks `2..=M`.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectedEnsemble {
    pub method: Method,
    pub tree_ids: Vec<usize>,
    pub trees: Vec<DecisionTree>,
    pub trace: Vec<TraceStep>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub label: u8,
    pub proba: f64,
}

impl SelectedEnsemble {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn predict(&self, row: &[f64]) -> Result<Prediction> {
        let proba = ensemble_proba(&self.trees, row)?;
        Ok(Prediction {
            label: label_from_proba(proba),
            proba,
        })
    }

    /// Class-1 probabilities for the given rows of `data`.
    pub fn predict_rows(&self, data: &Dataset, rows: &[usize]) -> Result<Vec<f64>> {
        rows.iter().map(|&i| ensemble_proba(&self.trees, data.row(i))).collect()
    }
}

/// Incremental ensemble state: per-row sums of admitted tree probabilities,
/// accumulated in admission order.
struct RunningEnsemble<'a> {
    data: &'a Dataset,
    sums: Vec<f64>,
    tracked: Vec<usize>,
    size: usize,
}

impl<'a> RunningEnsemble<'a> {
    fn new(data: &'a Dataset, tracked: Vec<usize>, first: &DecisionTree) -> Self {
        let mut state = RunningEnsemble {
            data,
            sums: vec![0.0; data.n_rows()],
            tracked,
            size: 0,
        };
        state.admit(first);
        state
    }

    fn admit(&mut self, tree: &DecisionTree) {
        for &i in &self.tracked {
            self.sums[i] += tree.proba(self.data.row(i));
        }
        self.size += 1;
    }

    /// Brier scores on `rows` without and with `candidate`.
    fn compare(&self, candidate: &DecisionTree, rows: &[usize]) -> (f64, f64) {
        let k = self.size as f64;
        let (mut before, mut after) = (0.0, 0.0);
        for &i in rows {
            let y = f64::from(self.data.label(i));
            let p = candidate.proba(self.data.row(i));
            let rb = y - self.sums[i] / k;
            let ra = y - (self.sums[i] + p) / (k + 1.0);
            before += rb * rb;
            after += ra * ra;
        }
        let n = rows.len() as f64;
        (before / n, after / n)
    }
}

fn select_sequential<'r>(
    method: Method,
    ranked: &RankedForest,
    forest: &Forest,
    data: &Dataset,
    assessment: impl Fn(usize) -> &'r [usize],
) -> Result<SelectedEnsemble> {
    let Some((&first, rest)) = ranked.order.split_first() else {
        return Err(OteError::NoAssessableTrees);
    };
    let mut tracked: Vec<usize> = rest.iter().flat_map(|&t| assessment(t).iter().copied()).collect();
    tracked.sort_unstable();
    tracked.dedup();
    let trees = forest.trees();
    let mut state = RunningEnsemble::new(data, tracked, &trees[first]);
    let mut tree_ids = vec![first];
    let mut trace = Vec::with_capacity(rest.len());
    for &t in rest {
        let rows = assessment(t);
        let (bs_before, bs_after) = state.compare(&trees[t], rows);
        let admitted = bs_after < bs_before;
        if admitted {
            state.admit(&trees[t]);
            tree_ids.push(t);
        }
        trace.push(TraceStep {
            tree_id: t,
            bs_before,
            bs_after,
            admitted,
            assessment_size: rows.len(),
        });
    }
    Ok(SelectedEnsemble {
        method,
        trees: tree_ids.iter().map(|&t| trees[t].clone()).collect(),
        tree_ids,
        trace,
    })
}

/// Selection against a fixed validation set that no tree was grown on.
pub fn select_ote(
    ranked: &RankedForest,
    forest: &Forest,
    validation_rows: &[usize],
    data: &Dataset,
) -> Result<SelectedEnsemble> {
    if validation_rows.is_empty() {
        return Err(OteError::Empty("validation set"));
    }
    let mut used = vec![false; data.n_rows()];
    for draw in forest.draws() {
        for &i in &draw.in_indices {
            used[i] = true;
        }
    }
    if validation_rows.iter().any(|&i| used[i]) {
        return Err(OteError::InvalidParameter(
            "validation rows overlap the rows trees were grown on".into(),
        ));
    }
    select_sequential(Method::Ote, ranked, forest, data, |_| validation_rows)
}

fn check_kind(forest: &Forest, kind: DrawKind, method: Method) -> Result<()> {
    if forest.draws().iter().any(|d| d.kind != kind) {
        return Err(OteError::ConfigMismatch(format!(
            "{method} needs a forest grown on {kind:?} draws"
        )));
    }
    Ok(())
}

/// Selection where each candidate is judged on its own out-of-bag rows.
pub fn select_oob(ranked: &RankedForest, forest: &Forest, data: &Dataset) -> Result<SelectedEnsemble> {
    check_kind(forest, DrawKind::Bootstrap, Method::OteOob)?;
    select_sequential(Method::OteOob, ranked, forest, data, |t| {
        forest.draws()[t].held_out_indices.as_slice()
    })
}

/// Selection where each candidate is judged on its sub-sample remainder.
pub fn select_sub(ranked: &RankedForest, forest: &Forest, data: &Dataset) -> Result<SelectedEnsemble> {
    check_kind(forest, DrawKind::Subsample, Method::OteSub)?;
    select_sequential(Method::OteSub, ranked, forest, data, |t| {
        forest.draws()[t].held_out_indices.as_slice()
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub trees: usize,
    /// `M` as a fraction of `T`.
    pub top_fraction: f64,
    pub params: GrowParams,
    /// Share of training rows held back for validation (`ote` only).
    pub validation_fraction: f64,
    /// Sub-sample size as a fraction of training rows (`ote_sub` only).
    pub subsample_fraction: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            trees: 1500,
            top_fraction: 0.2,
            params: GrowParams::default(),
            validation_fraction: 0.1,
            subsample_fraction: 0.9,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    /// `M = round(top_fraction * T)`, at least 1.
    pub fn top_count(&self) -> Result<usize> {
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(OteError::InvalidParameter(format!(
                "top fraction {} not in (0, 1]",
                self.top_fraction
            )));
        }
        Ok(((self.top_fraction * self.trees as f64).round() as usize).clamp(1, self.trees))
    }
}

/// A forest grown for one method, with the validation rows `ote` holds back.
#[derive(Clone, Debug)]
pub struct GrownForest {
    pub method: Method,
    pub forest: Forest,
    pub validation_rows: Vec<usize>,
}

/// Step 1 of the pipeline: resample the training rows and grow the trees.
pub fn grow_for(method: Method, data: &Dataset, rows: &[usize], config: &TrainConfig) -> Result<GrownForest> {
    if rows.is_empty() {
        return Err(OteError::Empty("training rows"));
    }
    config.top_count()?;
    let forest_seed = derive_seed(config.seed, STREAM_TREE, 0);
    let spec = |subsample_size| ForestSpec {
        kind: method.draw_kind(),
        n_trees: config.trees,
        subsample_size,
        params: &config.params,
        seed: forest_seed,
    };
    match method {
        Method::Ote => {
            let v = config.validation_fraction;
            if !(v > 0.0 && v < 1.0) {
                return Err(OteError::InvalidParameter(format!(
                    "validation fraction {v} not in (0, 1)"
                )));
            }
            let split = crate::dataset::split_indices(
                rows.len(),
                1.0 - v,
                derive_seed(config.seed, STREAM_VALIDATION, 0),
            )?;
            let grow_rows: Vec<usize> = split.train_indices.iter().map(|&i| rows[i]).collect();
            let validation_rows: Vec<usize> = split.test_indices.iter().map(|&i| rows[i]).collect();
            let forest = grow_forest(data, &grow_rows, &spec(0), config.execution)?;
            Ok(GrownForest {
                method,
                forest,
                validation_rows,
            })
        }
        Method::OteOob => Ok(GrownForest {
            method,
            forest: grow_forest(data, rows, &spec(0), config.execution)?,
            validation_rows: Vec::new(),
        }),
        Method::OteSub => {
            let m = sampling::default_subsample_size(rows.len(), config.subsample_fraction)?;
            Ok(GrownForest {
                method,
                forest: grow_forest(data, rows, &spec(m), config.execution)?,
                validation_rows: Vec::new(),
            })
        }
    }
}

/// Steps 2-3: rank the grown trees and run the method's selection.
pub fn select_from(grown: &GrownForest, data: &Dataset, config: &TrainConfig) -> Result<SelectedEnsemble> {
    let errors = grown.forest.heldout_errors(data, config.execution);
    let ranked = rank_errors(&errors, config.top_count()?)?;
    match grown.method {
        Method::Ote => select_ote(&ranked, &grown.forest, &grown.validation_rows, data),
        Method::OteOob => select_oob(&ranked, &grown.forest, data),
        Method::OteSub => select_sub(&ranked, &grown.forest, data),
    }
}

/// Full pipeline on the training `rows` of `data`.
pub fn train(method: Method, data: &Dataset, rows: &[usize], config: &TrainConfig) -> Result<SelectedEnsemble> {
    let grown = grow_for(method, data, rows, config)?;
    select_from(&grown, data, config)
}
