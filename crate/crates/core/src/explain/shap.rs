use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::importance::{ImportanceMethod, ImportanceReport, Scope};
use super::ExplainError;
use crate::gbdt::{BoostedModel, GbdtError, Tree};

pub const DEFAULT_SHAP_INSTANCES: usize = 2000;

/// Attribution of one label's margin to the input features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub label: String,
    pub feature_names: Vec<String>,
    pub phi: Vec<f64>,
    /// Cover-weighted expected margin.
    pub base_value: f64,
    pub margin: f64,
}

impl ShapExplanation {
    /// `|base_value + sum(phi) - margin|`.
    pub fn additivity_error(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.margin).abs()
    }
}

/// Cover-weighted mean leaf value of a tree.
pub fn expected_value(tree: &Tree) -> f64 {
    let root = tree.nodes[0].cover;
    tree.nodes
        .iter()
        .filter(|n| n.is_leaf())
        .map(|n| n.cover * n.leaf_value)
        .sum::<f64>()
        / root
}

#[derive(Clone, Copy)]
struct PathElem {
    feature: Option<usize>,
    /// Fraction of zero paths (feature absent) flowing through.
    zero: f64,
    /// Fraction of one paths (feature present) flowing through.
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElem {
        feature,
        zero,
        one,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (l + 1) as f64;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / (l + 1) as f64;
    }
}

fn unwind(path: &mut Vec<PathElem>, i: usize) {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let mut n = path[l].weight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = path[j].weight;
            path[j].weight = n * (l + 1) as f64 / ((j + 1) as f64 * one);
            n = t - path[j].weight * zero * (l - j) as f64 / (l + 1) as f64;
        } else {
            path[j].weight = path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    for j in i..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

/// Total weight of the path with element `i` unwound, without mutating it.
fn unwound_sum(path: &[PathElem], i: usize) -> f64 {
    let l = path.len() - 1;
    let (one, zero) = (path[i].one, path[i].zero);
    let mut total = 0.0;
    if one != 0.0 {
        let mut n = path[l].weight;
        for j in (0..l).rev() {
            let t = n * (l + 1) as f64 / ((j + 1) as f64 * one);
            total += t;
            n = path[j].weight - t * zero * (l - j) as f64 / (l + 1) as f64;
        }
    } else {
        for j in (0..l).rev() {
            total += path[j].weight * (l + 1) as f64 / (zero * (l - j) as f64);
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    node: usize,
    x: &[f64],
    phi: &mut [f64],
    mut path: Vec<PathElem>,
    zero: f64,
    one: f64,
    feature: Option<usize>,
) {
    extend(&mut path, zero, one, feature);
    let nd = &tree.nodes[node];
    let Some(f) = nd.feature else {
        for i in 1..path.len() {
            let w = unwound_sum(&path, i);
            let e = path[i];
            if let Some(d) = e.feature {
                phi[d] += w * (e.one - e.zero) * nd.leaf_value;
            }
        }
        return;
    };
    let (hot, cold) = if x[f] < nd.threshold {
        (nd.left, nd.right)
    } else {
        (nd.right, nd.left)
    };
    let (mut iz, mut io) = (1.0, 1.0);
    if let Some(k) = path.iter().skip(1).position(|e| e.feature == Some(f)).map(|k| k + 1) {
        iz = path[k].zero;
        io = path[k].one;
        unwind(&mut path, k);
    }
    let cover = nd.cover;
    recurse(
        tree,
        hot,
        x,
        phi,
        path.clone(),
        iz * tree.nodes[hot].cover / cover,
        io,
        Some(f),
    );
    recurse(
        tree,
        cold,
        x,
        phi,
        path,
        iz * tree.nodes[cold].cover / cover,
        0.0,
        Some(f),
    );
}

/// Adds the exact path-dependent Shapley values of one tree at `x` to `phi`.
pub fn tree_shap(tree: &Tree, x: &[f64], phi: &mut [f64]) {
    recurse(tree, 0, x, phi, Vec::with_capacity(16), 1.0, 1.0, None);
}

/// Shapley attribution of one label's margin at the prepared row `x`.
pub fn shap_values(model: &BoostedModel, x: &[f64], label: &str) -> Result<ShapExplanation, ExplainError> {
    let l = model
        .label_names
        .iter()
        .position(|n| n == label)
        .ok_or_else(|| ExplainError::UnknownLabel(label.to_string()))?;
    shap_for_index(model, x, l)
}

fn shap_for_index(model: &BoostedModel, x: &[f64], l: usize) -> Result<ShapExplanation, ExplainError> {
    if x.len() != model.n_features() {
        return Err(GbdtError::DimensionMismatch {
            expected: model.n_features(),
            found: x.len(),
        }
        .into());
    }
    let mut phi = vec![0.0; model.n_features()];
    let mut base_value = model.base_scores[l];
    for (t, tree) in model.trees[l].iter().enumerate() {
        if !tree.has_cover() {
            return Err(ExplainError::MissingCover {
                label: model.label_names[l].clone(),
                tree: t,
            });
        }
        base_value += expected_value(tree);
        tree_shap(tree, x, &mut phi);
    }
    Ok(ShapExplanation {
        label: model.label_names[l].clone(),
        feature_names: model.feature_names.clone(),
        phi,
        base_value,
        margin: model.label_margin(x, l)?,
    })
}

/// Mean |phi| per feature over at most `max_instances` rows drawn with
/// `seed`. With `label == None` the per-label means are averaged.
pub fn shap_summary(
    model: &BoostedModel,
    x: &[Vec<f64>],
    label: Option<&str>,
    max_instances: usize,
    seed: u64,
) -> Result<ImportanceReport, ExplainError> {
    let labels: Vec<usize> = match label {
        Some(name) => vec![model
            .label_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ExplainError::UnknownLabel(name.to_string()))?],
        None => (0..model.n_labels()).collect(),
    };
    let mut rows: Vec<usize> = (0..x.len()).collect();
    if rows.len() > max_instances {
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        rows.truncate(max_instances);
        rows.sort_unstable();
    }
    let per_row: Vec<Result<Vec<f64>, ExplainError>> = rows
        .par_iter()
        .map(|&r| {
            let mut acc = vec![0.0; model.n_features()];
            for &l in &labels {
                let e = shap_for_index(model, &x[r], l)?;
                for (a, p) in acc.iter_mut().zip(&e.phi) {
                    *a += p.abs();
                }
            }
            Ok(acc)
        })
        .collect();
    let mut scores = vec![0.0; model.n_features()];
    for r in per_row {
        for (s, v) in scores.iter_mut().zip(r?) {
            *s += v;
        }
    }
    let denom = (rows.len() * labels.len()).max(1) as f64;
    scores.iter_mut().for_each(|s| *s /= denom);
    Ok(ImportanceReport {
        method: ImportanceMethod::Shap,
        scope: match label {
            Some(l) => Scope::Label(l.to_string()),
            None => Scope::Global,
        },
        feature_names: model.feature_names.clone(),
        scores,
        dispersion: None,
        metric: None,
        baseline: None,
        repeats: None,
        seed: Some(seed),
    })
}
