use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::gbdt::{metrics_from_margins, multiclass_summary, BoostedModel, GbdtError};
use crate::tabular::{LabelMatrix, TaskKind};

/// Stride between the shuffle seeds of consecutive features.
const FEATURE_SEED_STRIDE: u64 = 1_000_003;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMethod {
    Weight,
    Gain,
    Permutation,
    Shap,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Global,
    Label(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMetric {
    MacroAuc,
    Accuracy,
}

impl PermutationMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MacroAuc => "macro_auc",
            Self::Accuracy => "accuracy",
        }
    }

    /// Accuracy for multiclass tasks, macro AUC otherwise.
    pub fn default_for(task: TaskKind) -> Self {
        match task {
            TaskKind::Multiclass => Self::Accuracy,
            TaskKind::Multilabel => Self::MacroAuc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub scope: Scope,
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    /// Permutation only: population std of the score over repeats.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<PermutationMetric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ImportanceReport {
    fn plain(method: ImportanceMethod, scope: Scope, model: &BoostedModel, scores: Vec<f64>) -> Self {
        Self {
            method,
            scope,
            feature_names: model.feature_names.clone(),
            scores,
            dispersion: None,
            metric: None,
            baseline: None,
            repeats: None,
            seed: None,
        }
    }

    /// `(name, score)` pairs in feature order.
    pub fn named_scores(&self) -> Vec<(String, f64)> {
        self.feature_names
            .iter()
            .cloned()
            .zip(self.scores.iter().copied())
            .collect()
    }
}

fn label_index(model: &BoostedModel, label: Option<&str>) -> Result<Option<usize>, ExplainError> {
    match label {
        None => Ok(None),
        Some(name) => model
            .label_names
            .iter()
            .position(|l| l == name)
            .map(Some)
            .ok_or_else(|| ExplainError::UnknownLabel(name.to_string())),
    }
}

fn tally(
    model: &BoostedModel,
    label: Option<&str>,
    per_node: impl Fn(f64) -> f64,
) -> Result<(Scope, Vec<f64>), ExplainError> {
    let idx = label_index(model, label)?;
    let mut scores = vec![0.0; model.n_features()];
    for (l, trees) in model.trees.iter().enumerate() {
        if idx.is_some_and(|i| i != l) {
            continue;
        }
        for node in trees.iter().flat_map(|t| &t.nodes) {
            if let Some(f) = node.feature {
                scores[f] += per_node(node.gain);
            }
        }
    }
    let scope = match label {
        Some(l) => Scope::Label(l.to_string()),
        None => Scope::Global,
    };
    Ok((scope, scores))
}

/// Number of internal nodes splitting on each feature, over all labels
/// (`label == None`) or one label's trees.
pub fn weight_importance(model: &BoostedModel, label: Option<&str>) -> Result<ImportanceReport, ExplainError> {
    let (scope, scores) = tally(model, label, |_| 1.0)?;
    Ok(ImportanceReport::plain(ImportanceMethod::Weight, scope, model, scores))
}

/// Summed split gain per feature.
pub fn gain_importance(model: &BoostedModel, label: Option<&str>) -> Result<ImportanceReport, ExplainError> {
    let (scope, scores) = tally(model, label, |g| g)?;
    Ok(ImportanceReport::plain(ImportanceMethod::Gain, scope, model, scores))
}

fn score_margins(margins: &[Vec<f64>], labels: &LabelMatrix, metric: PermutationMetric) -> Result<f64, ExplainError> {
    match metric {
        PermutationMetric::MacroAuc => {
            metrics_from_margins(margins, labels)?
                .macro_auc
                .ok_or_else(|| ExplainError::UndefinedMetric {
                    metric: "macro_auc",
                    reason: "every label has a single class".into(),
                })
        }
        PermutationMetric::Accuracy => {
            if labels.task != TaskKind::Multiclass {
                return Err(ExplainError::UndefinedMetric {
                    metric: "accuracy",
                    reason: "labels are not multiclass".into(),
                });
            }
            let truth: Vec<usize> = (0..labels.n_rows()).map(|r| labels.class_of(r).unwrap_or(0)).collect();
            let pred: Vec<usize> = margins.iter().map(|m| crate::gbdt::argmax_margin(m)).collect();
            Ok(multiclass_summary(&truth, &pred, labels.n_labels()).0)
        }
    }
}

/// Mean and population std, over `repeats` seeded shuffles of each column,
/// of the metric drop caused by the shuffle. Rows of `x` must already be
/// prepared for the model. Repeat `r` of feature `j` shuffles with seed
/// `seed + j * 1000003 + r`.
pub fn permutation_importance(
    model: &BoostedModel,
    x: &[Vec<f64>],
    labels: &LabelMatrix,
    metric: PermutationMetric,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport, ExplainError> {
    if repeats == 0 {
        return Err(ExplainError::NoRepeats);
    }
    if let Some(bad) = x.iter().find(|r| r.len() != model.n_features()) {
        return Err(GbdtError::DimensionMismatch {
            expected: model.n_features(),
            found: bad.len(),
        }
        .into());
    }
    let n = x.len();
    // outputs[label][tree][row]
    let outputs: Vec<Vec<Vec<f64>>> = model
        .trees
        .iter()
        .map(|trees| trees.iter().map(|t| x.iter().map(|r| t.predict(r)).collect()).collect())
        .collect();
    let margins_with = |replaced: &[Vec<(usize, Vec<f64>)>]| -> Vec<Vec<f64>> {
        (0..n)
            .map(|r| {
                (0..model.n_labels())
                    .map(|l| {
                        let mut m = model.base_scores[l];
                        let mut swap = replaced[l].iter().peekable();
                        for (t, out) in outputs[l].iter().enumerate() {
                            match swap.peek() {
                                Some((ti, new)) if *ti == t => {
                                    m += new[r];
                                    swap.next();
                                }
                                _ => m += out[r],
                            }
                        }
                        m
                    })
                    .collect()
            })
            .collect()
    };
    let none: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); model.n_labels()];
    let baseline = score_margins(&margins_with(&none), labels, metric)?;
    let per_feature: Vec<Result<(f64, f64), ExplainError>> = (0..model.n_features())
        .into_par_iter()
        .map(|j| {
            let users: Vec<Vec<usize>> = model
                .trees
                .iter()
                .map(|trees| {
                    (0..trees.len())
                        .filter(|&t| trees[t].nodes.iter().any(|nd| nd.feature == Some(j)))
                        .collect()
                })
                .collect();
            if users.iter().all(Vec::is_empty) {
                return Ok((0.0, 0.0));
            }
            let mut drops = Vec::with_capacity(repeats);
            for rep in 0..repeats {
                let s = seed
                    .wrapping_add((j as u64).wrapping_mul(FEATURE_SEED_STRIDE))
                    .wrapping_add(rep as u64);
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|r| {
                        let mut row = x[r].clone();
                        row[j] = x[perm[r]][j];
                        row
                    })
                    .collect();
                let replaced: Vec<Vec<(usize, Vec<f64>)>> = users
                    .iter()
                    .enumerate()
                    .map(|(l, ts)| {
                        ts.iter()
                            .map(|&t| (t, rows.iter().map(|row| model.trees[l][t].predict(row)).collect()))
                            .collect()
                    })
                    .collect();
                drops.push(baseline - score_margins(&margins_with(&replaced), labels, metric)?);
            }
            let mean = drops.iter().sum::<f64>() / repeats as f64;
            let var = drops.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / repeats as f64;
            Ok((mean, var.sqrt()))
        })
        .collect();
    let mut scores = Vec::with_capacity(model.n_features());
    let mut dispersion = Vec::with_capacity(model.n_features());
    for r in per_feature {
        let (m, s) = r?;
        scores.push(m);
        dispersion.push(s);
    }
    Ok(ImportanceReport {
        method: ImportanceMethod::Permutation,
        scope: Scope::Global,
        feature_names: model.feature_names.clone(),
        scores,
        dispersion: Some(dispersion),
        metric: Some(metric),
        baseline: Some(baseline),
        repeats: Some(repeats),
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::{Node, Params, Tree};

    fn stump_model(feature: usize, n_features: usize) -> BoostedModel {
        BoostedModel {
            params: Params::default(),
            task: TaskKind::Multilabel,
            feature_names: (0..n_features).map(|i| format!("f{i}")).collect(),
            label_names: vec!["t".into()],
            base_scores: vec![0.0],
            trees: vec![vec![Tree {
                nodes: vec![
                    Node::split(feature, 0.5, 1, 2, 2.0, 3.0),
                    Node::leaf(-1.0, 1.0),
                    Node::leaf(1.0, 1.0),
                ],
            }]],
            scaler: None,
        }
    }

    #[test]
    fn single_stump_weight() {
        let m = stump_model(3, 5);
        let w = weight_importance(&m, None).unwrap();
        assert_eq!(w.scores, vec![0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(gain_importance(&m, Some("t")).unwrap().scores[3], 3.0);
        assert!(weight_importance(&m, Some("nope")).is_err());
        let mut empty = m.clone();
        empty.trees[0].clear();
        assert!(weight_importance(&empty, None)
            .unwrap()
            .scores
            .iter()
            .all(|&s| s == 0.0));
    }

    #[test]
    fn permutation_of_used_and_unused_features() {
        let m = stump_model(0, 2);
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 2) as f64, i as f64]).collect();
        let labels = LabelMatrix {
            track_ids: (0..20).map(|i| i.to_string()).collect(),
            tag_names: vec!["t".into()],
            indicators: (0..20).map(|i| vec![i % 2 == 1]).collect(),
            task: TaskKind::Multilabel,
        };
        let r = permutation_importance(&m, &x, &labels, PermutationMetric::MacroAuc, 4, 11).unwrap();
        assert_eq!(r.baseline, Some(1.0));
        assert!(r.scores[0] > 0.0);
        assert_eq!(r.scores[1], 0.0);
        assert_eq!(r.dispersion.as_ref().unwrap()[1], 0.0);
        assert!(permutation_importance(&m, &x, &labels, PermutationMetric::Accuracy, 1, 0).is_err());
    }
}
