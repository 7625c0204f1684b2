//! Optimal trees ensembles for binary classification.
//!
//! A large forest of randomized probability-estimation trees is grown on
//! bootstrap samples or without-replacement sub-samples. Trees are ranked by
//! their error on the observations they never saw, and the best-ranked ones
//! are admitted one at a time, each only if it lowers the ensemble Brier
//! score on an assessment set. Three assessment schemes are provided:
//!
//! * [`Method::Ote`]: a fixed internal validation set carved from the
//!   training data.
//! * [`Method::OteOob`]: each candidate's own out-of-bag observations.
//! * [`Method::OteSub`]: each candidate's sub-sample remainder.
//!
//! The [`simgen`] module generates the tree-structured synthetic scenarios
//! used to benchmark the methods, and [`bench`] replays the repeated
//! random-split evaluation protocol.

pub mod bench;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod persist;
pub mod sampling;
pub mod selection;
pub mod simgen;
pub mod tree;

pub use dataset::{Dataset, SplitPair};
pub use error::{OteError, Result};
pub use exec::Execution;
pub use sampling::{DrawKind, SampleDraw};
pub use selection::{Forest, Method, RankedForest, SelectedEnsemble, TraceStep, TrainConfig};
pub use tree::{DecisionTree, GrowParams};
