//! Versioned flat-text ensemble files.
//!
//! ```text
//! ote-ensemble 1
//! method ote_oob
//! trees 1500
//! top_fraction 0.2
//! validation_fraction 0.1
//! subsample_fraction 0.9
//! mtry auto
//! min_node_size 1
//! max_depth none
//! min_impurity_decrease 0.0
//! seed 42
//! admitted 2
//! tree 17 seed 9431 features 9 nodes 3
//! S 0 0.4875 1 2
//! L 3 40
//! L 51 52
//! ...
//! trace 1
//! step 4 0.0913 0.0902 1 261
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so parsing and
//! re-writing a file reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{OteError, Result};
use crate::exec::Execution;
use crate::selection::{Method, SelectedEnsemble, TraceStep, TrainConfig};
use crate::tree::{DecisionTree, GrowParams, Node};

const MAGIC: &str = "ote-ensemble";
const VERSION: u32 = 1;

/// A selected ensemble together with the configuration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SavedModel {
    pub config: TrainConfig,
    pub ensemble: SelectedEnsemble,
}

impl SavedModel {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(out, "method {}", self.ensemble.method);
        let _ = writeln!(out, "trees {}", c.trees);
        let _ = writeln!(out, "top_fraction {:?}", c.top_fraction);
        let _ = writeln!(out, "validation_fraction {:?}", c.validation_fraction);
        let _ = writeln!(out, "subsample_fraction {:?}", c.subsample_fraction);
        let _ = writeln!(out, "mtry {}", opt_to_str(c.params.mtry, "auto"));
        let _ = writeln!(out, "min_node_size {}", c.params.min_node_size);
        let _ = writeln!(out, "max_depth {}", opt_to_str(c.params.max_depth, "none"));
        let _ = writeln!(out, "min_impurity_decrease {:?}", c.params.min_impurity_decrease);
        let _ = writeln!(out, "seed {}", c.seed);
        let _ = writeln!(out, "admitted {}", self.ensemble.trees.len());
        for (id, tree) in self.ensemble.tree_ids.iter().zip(&self.ensemble.trees) {
            let _ = writeln!(
                out,
                "tree {id} seed {} features {} nodes {}",
                tree.seed(),
                tree.n_features(),
                tree.nodes().len()
            );
            for node in tree.nodes() {
                match *node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(out, "S {feature} {threshold:?} {left} {right}");
                    }
                    Node::Leaf { positives, count, .. } => {
                        let _ = writeln!(out, "L {positives} {count}");
                    }
                }
            }
        }
        let _ = writeln!(out, "trace {}", self.ensemble.trace.len());
        for s in &self.ensemble.trace {
            let _ = writeln!(
                out,
                "step {} {:?} {:?} {} {}",
                s.tree_id,
                s.bs_before,
                s.bs_after,
                u8::from(s.admitted),
                s.assessment_size
            );
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut p = Parser {
            lines: text.lines().enumerate(),
            line: 0,
        };
        let header = p.fields(MAGIC)?;
        if header != [VERSION.to_string()] {
            return Err(p.error(format!("unsupported version {header:?}")));
        }
        let method: Method = p.value("method")?;
        let trees = p.value("trees")?;
        let top_fraction = p.value("top_fraction")?;
        let validation_fraction = p.value("validation_fraction")?;
        let subsample_fraction = p.value("subsample_fraction")?;
        let mtry = p.optional("mtry", "auto")?;
        let min_node_size = p.value("min_node_size")?;
        let max_depth = p.optional("max_depth", "none")?;
        let min_impurity_decrease = p.value("min_impurity_decrease")?;
        let seed = p.value("seed")?;
        let config = TrainConfig {
            trees,
            top_fraction,
            params: GrowParams {
                mtry,
                min_node_size,
                max_depth,
                min_impurity_decrease,
            },
            validation_fraction,
            subsample_fraction,
            seed,
            execution: Execution::default(),
        };

        let admitted: usize = p.value("admitted")?;
        let mut tree_ids = Vec::with_capacity(admitted);
        let mut ensemble_trees = Vec::with_capacity(admitted);
        for _ in 0..admitted {
            let f = p.fields("tree")?;
            if f.len() != 7 || f[1] != "seed" || f[3] != "features" || f[5] != "nodes" {
                return Err(p.error("expected `tree <id> seed <s> features <d> nodes <k>`".into()));
            }
            tree_ids.push(p.parse(f[0])?);
            let seed = p.parse(f[2])?;
            let n_features = p.parse(f[4])?;
            let n_nodes: usize = p.parse(f[6])?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let (tag, f) = p.next_line()?;
                let node = match (tag, f.as_slice()) {
                    ("S", [feature, threshold, left, right]) => Node::Split {
                        feature: p.parse(feature)?,
                        threshold: p.parse(threshold)?,
                        left: p.parse(left)?,
                        right: p.parse(right)?,
                    },
                    ("L", [positives, count]) => {
                        let count: usize = p.parse(count)?;
                        if count == 0 {
                            return Err(p.error("leaf with zero rows".into()));
                        }
                        Node::leaf(p.parse(positives)?, count)
                    }
                    _ => return Err(p.error("expected a node line".into())),
                };
                nodes.push(node);
            }
            let tree = DecisionTree::from_nodes(nodes, n_features, seed).map_err(|e| p.error(e.to_string()))?;
            ensemble_trees.push(tree);
        }

        let steps: usize = p.value("trace")?;
        let mut trace = Vec::with_capacity(steps);
        for _ in 0..steps {
            let f = p.fields("step")?;
            if f.len() != 5 {
                return Err(p.error("expected 5 step fields".into()));
            }
            let admitted = match f[3] {
                "0" => false,
                "1" => true,
                other => return Err(p.error(format!("bad admitted flag `{other}`"))),
            };
            trace.push(TraceStep {
                tree_id: p.parse(f[0])?,
                bs_before: p.parse(f[1])?,
                bs_after: p.parse(f[2])?,
                admitted,
                assessment_size: p.parse(f[4])?,
            });
        }
        p.fields("end")?;
        if p.lines.next().is_some() {
            return Err(p.error("trailing content after `end`".into()));
        }
        if ensemble_trees.is_empty() {
            return Err(p.error("ensemble has no trees".into()));
        }
        Ok(SavedModel {
            config,
            ensemble: SelectedEnsemble {
                method,
                tree_ids,
                trees: ensemble_trees,
                trace,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| OteError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| OteError::io(path, e))?;
        SavedModel::from_text(&text)
    }
}

fn opt_to_str(v: Option<usize>, absent: &str) -> String {
    v.map_or_else(|| absent.to_owned(), |v| v.to_string())
}

struct Parser<'a, I: Iterator<Item = (usize, &'a str)>> {
    lines: I,
    line: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Parser<'a, I> {
    fn error(&self, reason: String) -> OteError {
        OteError::Format {
            line: self.line,
            reason,
        }
    }

    fn next_line(&mut self) -> Result<(&'a str, Vec<&'a str>)> {
        let (i, line) = self.lines.next().ok_or_else(|| self.error("unexpected end of file".into()))?;
        self.line = i + 1;
        let mut parts = line.split(' ');
        let tag = parts.next().unwrap_or_default();
        Ok((tag, parts.collect()))
    }

    fn fields(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let (tag, fields) = self.next_line()?;
        if tag != key {
            return Err(self.error(format!("expected `{key}`, found `{tag}`")));
        }
        Ok(fields)
    }

    fn parse<T: FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.error(format!("cannot parse `{s}`")))
    }

    fn value<T: FromStr>(&mut self, key: &str) -> Result<T> {
        match self.fields(key)?.as_slice() {
            [v] => self.parse(v),
            _ => Err(self.error(format!("`{key}` takes one value"))),
        }
    }

    fn optional(&mut self, key: &str, absent: &str) -> Result<Option<usize>> {
        match self.fields(key)?.as_slice() {
            [v] if *v == absent => Ok(None),
            [v] => self.parse(v).map(Some),
            _ => Err(self.error(format!("`{key}` takes one value"))),
        }
    }
}
