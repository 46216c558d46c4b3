use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GbdtError;
use crate::tabular::{StandardScaler, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample: f64,
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 6,
            learning_rate: 0.1,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            subsample: 0.8,
            colsample: 0.8,
            seed: 42,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |what: &str| Err(GbdtError::InvalidParams(what.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be non-negative");
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad("min_child_weight must be non-negative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return bad("colsample must lie in (0, 1]");
        }
        Ok(())
    }
}

fn missing_cover() -> f64 {
    f64::NAN
}

/// One node of a tree. Leaves have `feature == None`; internal nodes send
/// rows with `x[feature] < threshold` to `left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: Option<usize>,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default)]
    pub left: usize,
    #[serde(default)]
    pub right: usize,
    /// Contribution to the margin, learning rate already applied.
    #[serde(default)]
    pub leaf_value: f64,
    /// Hessian weight of the training rows reaching the node.
    #[serde(default = "missing_cover")]
    pub cover: f64,
    #[serde(default)]
    pub gain: f64,
}

impl Node {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Self {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            leaf_value: value,
            cover,
            gain: 0.0,
        }
    }

    pub fn split(feature: usize, threshold: f64, left: usize, right: usize, cover: f64, gain: f64) -> Self {
        Self {
            feature: Some(feature),
            threshold,
            left,
            right,
            leaf_value: 0.0,
            cover,
            gain,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

/// Node array with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            match n.feature {
                None => return n.leaf_value,
                Some(f) => i = if x[f] < n.threshold { n.left } else { n.right },
            }
        }
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + go(t, n.left).max(go(t, n.right))
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            go(self, 0)
        }
    }

    /// Structural checks: child indices in range and after their parent,
    /// feature indices below `n_features`, every node reachable once.
    pub fn validate(&self, n_features: usize) -> Result<(), GbdtError> {
        if self.nodes.is_empty() {
            return Err(GbdtError::Format("tree without nodes".into()));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(f) = n.feature {
                if f >= n_features {
                    return Err(GbdtError::Format(format!(
                        "node {i} splits on feature {f} of {n_features}"
                    )));
                }
                for c in [n.left, n.right] {
                    if c <= i || c >= self.nodes.len() {
                        return Err(GbdtError::Format(format!("node {i} has invalid child {c}")));
                    }
                    parents[c] += 1;
                }
                if !n.threshold.is_finite() {
                    return Err(GbdtError::Format(format!("node {i} has a non-finite threshold")));
                }
            } else if !n.leaf_value.is_finite() {
                return Err(GbdtError::Format(format!("leaf {i} has a non-finite value")));
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(GbdtError::Format("nodes do not form a tree".into()));
        }
        Ok(())
    }

    pub fn has_cover(&self) -> bool {
        self.nodes.iter().all(|n| n.cover.is_finite() && n.cover > 0.0)
    }
}

/// Per-label tree ensembles with their prior log-odds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub params: Params,
    pub task: TaskKind,
    pub feature_names: Vec<String>,
    pub label_names: Vec<String>,
    pub base_scores: Vec<f64>,
    /// `trees[label]` is that label's ensemble.
    pub trees: Vec<Vec<Tree>>,
    /// Standardization fitted on the training split, applied to raw inputs
    /// by [`BoostedModel::prepare`].
    #[serde(default)]
    pub scaler: Option<StandardScaler>,
}

impl BoostedModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GbdtError> {
        if x.len() != self.n_features() {
            return Err(GbdtError::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Applies the stored scaler, if any, to a raw feature row.
    pub fn prepare(&self, x: &[f64]) -> Result<Vec<f64>, GbdtError> {
        self.check_dim(x)?;
        Ok(match &self.scaler {
            Some(s) => s.transform(x),
            None => x.to_vec(),
        })
    }

    pub fn label_margin(&self, x: &[f64], label: usize) -> Result<f64, GbdtError> {
        self.check_dim(x)?;
        Ok(self.trees[label]
            .iter()
            .fold(self.base_scores[label], |m, t| m + t.predict(x)))
    }

    pub fn predict_margin(&self, x: &[f64]) -> Result<Vec<f64>, GbdtError> {
        (0..self.n_labels()).map(|l| self.label_margin(x, l)).collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, GbdtError> {
        Ok(self.predict_margin(x)?.into_iter().map(super::sigmoid).collect())
    }

    /// Index of the largest margin; ties go to the lowest index.
    pub fn predict_class(&self, x: &[f64]) -> Result<usize, GbdtError> {
        Ok(argmax(&self.predict_margin(x)?))
    }

    pub fn n_trees_total(&self) -> usize {
        self.trees.iter().map(Vec::len).sum()
    }

    pub fn validate(&self) -> Result<(), GbdtError> {
        let l = self.n_labels();
        if self.base_scores.len() != l || self.trees.len() != l {
            return Err(GbdtError::Format(format!(
                "{l} labels but {} base scores and {} ensembles",
                self.base_scores.len(),
                self.trees.len()
            )));
        }
        if let Some(s) = &self.scaler {
            if s.dim() != self.n_features() {
                return Err(GbdtError::Format("scaler width differs from feature count".into()));
            }
        }
        for t in self.trees.iter().flatten() {
            t.validate(self.n_features())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, GbdtError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self, GbdtError> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GbdtError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GbdtError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
