use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::gbdt::{evaluate, train_standardized, Params};
use crate::tabular::{FeatureGroup, LabelMatrix, SplitSpec, TabularError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub groups: Vec<FeatureGroup>,
    pub columns: Vec<usize>,
    pub n_features: usize,
    /// Test-split accuracy (multiclass) or macro AUC (multilabel).
    pub metric: Option<f64>,
    pub params_hash: String,
    /// Set when this row failed to train or evaluate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub metric: String,
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

/// The 7 non-empty subsets of the three groups: singles, pairs, all.
pub fn group_subsets() -> Vec<Vec<FeatureGroup>> {
    let g = FeatureGroup::ALL;
    vec![
        vec![g[0]],
        vec![g[1]],
        vec![g[2]],
        vec![g[0], g[1]],
        vec![g[0], g[2]],
        vec![g[1], g[2]],
        g.to_vec(),
    ]
}

fn params_hash(params: &Params, columns: &[usize]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(params).unwrap_or_default());
    for c in columns {
        h.update((*c as u64).to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Retrains and evaluates on each group subset. Rows of `x` align with
/// `ids` and `labels`; `groups[j]` tags column `j`. The scaler is re-fitted
/// per subset on the training split only. A failing subset is reported in
/// its row and does not stop the others.
pub fn ablation(
    x: &[Vec<f64>],
    ids: &[String],
    labels: &LabelMatrix,
    groups: &[FeatureGroup],
    feature_names: &[String],
    split: &SplitSpec,
    params: &Params,
) -> Result<AblationReport, TabularError> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let rows_of = |part: &[String]| -> Result<Vec<usize>, TabularError> {
        part.iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| TabularError::UnknownTrack(id.clone()))
            })
            .collect()
    };
    let train_rows = rows_of(&split.train)?;
    let test_rows = rows_of(&split.test)?;
    let by_row = |rows: &[usize]| -> Result<LabelMatrix, TabularError> {
        labels.select(&rows.iter().map(|&r| labels.track_ids[r].clone()).collect::<Vec<_>>())
    };
    let y_train = by_row(&train_rows)?;
    let y_test = by_row(&test_rows)?;
    let mut out = Vec::with_capacity(7);
    for subset in group_subsets() {
        let columns: Vec<usize> = (0..groups.len()).filter(|&j| subset.contains(&groups[j])).collect();
        let name = subset.iter().map(|g| g.as_str()).collect::<Vec<_>>().join("+");
        let project = |rows: &[usize]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|&r| columns.iter().map(|&c| x[r][c]).collect())
                .collect()
        };
        let names: Vec<String> = columns.iter().map(|&c| feature_names[c].clone()).collect();
        let result = if columns.is_empty() {
            Err("no columns in this subset".to_string())
        } else {
            train_standardized(&project(&train_rows), &y_train, &names, params)
                .and_then(|(model, _)| {
                    let test: Vec<Vec<f64>> = project(&test_rows)
                        .iter()
                        .map(|r| model.prepare(r))
                        .collect::<Result<_, _>>()?;
                    evaluate(&model, &test, &y_test)
                })
                .map_err(|e| e.to_string())
                .and_then(|m| {
                    m.headline()
                        .ok_or_else(|| "metric undefined on the test split".to_string())
                })
        };
        if let Err(e) = &result {
            log::warn!("ablation row {name}: {e}");
        }
        out.push(AblationRow {
            name,
            groups: subset,
            n_features: columns.len(),
            params_hash: params_hash(params, &columns),
            columns,
            metric: result.as_ref().ok().copied(),
            error: result.err(),
        });
    }
    Ok(AblationReport {
        metric: match labels.task {
            crate::tabular::TaskKind::Multiclass => "accuracy".into(),
            crate::tabular::TaskKind::Multilabel => "macro_auc".into(),
        },
        seed: params.seed,
        rows: out,
    })
}
