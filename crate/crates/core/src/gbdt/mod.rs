//! Second-order gradient boosting of regression trees with logistic loss.
//!
//! One binary booster is trained per label; multiclass prediction takes the
//! argmax of the per-class margins.

mod metrics;
mod model;
mod train;

use thiserror::Error;

pub use metrics::{evaluate, metrics_from_margins, multiclass_summary, roc_auc, Metrics};
pub(crate) use model::argmax as argmax_margin;
pub use model::{BoostedModel, Node, Params, Tree};
pub use train::{base_score, logistic_loss, sigmoid, split_gain, train, train_standardized, TrainReport};

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{rows} feature rows but {labels} label rows")]
    RowMismatch { rows: usize, labels: usize },
    #[error("training set is empty")]
    EmptyData,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("ROC-AUC needs at least one positive and one negative")]
    SingleClass,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
