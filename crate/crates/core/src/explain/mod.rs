//! Feature attributions for boosted models: split counts and gains,
//! permutation importance, exact tree Shapley values and group ablation.

mod ablation;
mod importance;
mod shap;

use thiserror::Error;

pub use ablation::{ablation, group_subsets, AblationReport, AblationRow};
pub use importance::{
    gain_importance, permutation_importance, weight_importance, ImportanceMethod, ImportanceReport, PermutationMetric,
    Scope,
};
pub use shap::{expected_value, shap_summary, shap_values, tree_shap, ShapExplanation, DEFAULT_SHAP_INSTANCES};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("tree {tree} of label {label:?} lacks cover statistics")]
    MissingCover { label: String, tree: usize },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("permutation importance needs at least one repeat")]
    NoRepeats,
    #[error("metric {metric} is undefined here: {reason}")]
    UndefinedMetric { metric: &'static str, reason: String },
    #[error(transparent)]
    Gbdt(#[from] crate::gbdt::GbdtError),
}
