use serde::{Deserialize, Serialize};

use super::model::{argmax, BoostedModel};
use super::GbdtError;
use crate::tabular::{LabelMatrix, TaskKind};

/// Mann-Whitney ROC-AUC; tied scores count half a concordant pair.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, GbdtError> {
    let pos = labels.iter().filter(|&&t| t).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(GbdtError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of midranks of the positives, in doubled units to stay integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid2 = (i + 1 + j + 1) as u128;
        let p = idx[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum2 += p * mid2;
        i = j + 1;
    }
    let (p, n) = (pos as u128, neg as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub task: TaskKind,
    pub n_rows: usize,
    pub label_names: Vec<String>,
    /// Mean of the defined per-label AUCs.
    pub macro_auc: Option<f64>,
    /// `None` where the evaluation column has a single class.
    pub per_label_auc: Vec<Option<f64>>,
    pub excluded_labels: Vec<String>,
    /// Multiclass only: argmax accuracy.
    pub accuracy: Option<f64>,
    /// Multiclass only.
    pub per_class_f1: Vec<f64>,
    /// Multiclass only: `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Metrics {
    /// Headline number: accuracy for multiclass, macro AUC otherwise.
    pub fn headline(&self) -> Option<f64> {
        match self.task {
            TaskKind::Multiclass => self.accuracy,
            TaskKind::Multilabel => self.macro_auc,
        }
    }
}

/// Accuracy, per-class F1 and confusion counts from class indices.
pub fn multiclass_summary(truth: &[usize], predicted: &[usize], k: usize) -> (f64, Vec<f64>, Vec<Vec<usize>>) {
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let accuracy = if truth.is_empty() {
        0.0
    } else {
        correct as f64 / truth.len() as f64
    };
    let f1 = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let fp: usize = (0..k).filter(|&t| t != c).map(|t| confusion[t][c]).sum();
            let fn_: usize = (0..k).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                (2 * tp) as f64 / denom as f64
            }
        })
        .collect();
    (accuracy, f1, confusion)
}

/// Metrics from precomputed margins (`margins[row][label]`).
pub fn metrics_from_margins(margins: &[Vec<f64>], labels: &LabelMatrix) -> Result<Metrics, GbdtError> {
    if margins.len() != labels.n_rows() {
        return Err(GbdtError::RowMismatch {
            rows: margins.len(),
            labels: labels.n_rows(),
        });
    }
    let k = labels.n_labels();
    let mut per_label_auc = Vec::with_capacity(k);
    let mut excluded_labels = Vec::new();
    for l in 0..k {
        let scores: Vec<f64> = margins.iter().map(|m| m[l]).collect();
        match roc_auc(&scores, &labels.column(l)) {
            Ok(a) => per_label_auc.push(Some(a)),
            Err(GbdtError::SingleClass) => {
                excluded_labels.push(labels.tag_names[l].clone());
                per_label_auc.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let defined: Vec<f64> = per_label_auc.iter().flatten().copied().collect();
    let macro_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let (accuracy, per_class_f1, confusion) = match labels.task {
        TaskKind::Multiclass => {
            let truth: Vec<usize> = (0..labels.n_rows()).map(|r| labels.class_of(r).unwrap_or(0)).collect();
            let pred: Vec<usize> = margins.iter().map(|m| argmax(m)).collect();
            let (a, f, c) = multiclass_summary(&truth, &pred, k);
            (Some(a), f, c)
        }
        TaskKind::Multilabel => (None, Vec::new(), Vec::new()),
    };
    Ok(Metrics {
        task: labels.task,
        n_rows: labels.n_rows(),
        label_names: labels.tag_names.clone(),
        macro_auc,
        per_label_auc,
        excluded_labels,
        accuracy,
        per_class_f1,
        confusion,
    })
}

/// Evaluates `model` on prepared (already standardized) rows.
pub fn evaluate(model: &BoostedModel, x: &[Vec<f64>], labels: &LabelMatrix) -> Result<Metrics, GbdtError> {
    if labels.n_labels() != model.n_labels() {
        return Err(GbdtError::Format(format!(
            "model has {} labels, evaluation data {}",
            model.n_labels(),
            labels.n_labels()
        )));
    }
    let margins = x
        .iter()
        .map(|r| model.predict_margin(r))
        .collect::<Result<Vec<_>, _>>()?;
    metrics_from_margins(&margins, labels)
}
