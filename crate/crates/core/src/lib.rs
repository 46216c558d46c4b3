//! Interpretable music tagging.
//!
//! Audio is decoded and reduced to 62 named features in three groups
//! (harmonic, mid-level, signal); boosted tree ensembles are trained on the
//! features and explained with split counts, permutation importance, exact
//! tree Shapley values and a group ablation.

// Negated float comparisons reject NaN on purpose; the dense linear algebra
// reads better with index loops.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod audio;
pub mod explain;
pub mod gbdt;
pub mod harmony;
pub mod midlevel;
pub mod signal;
pub mod synth;
pub mod tabular;

pub use audio::{decode, AudioClip, AudioError, CANONICAL_RATE};
pub use gbdt::{BoostedModel, GbdtError, Metrics, Params};
pub use harmony::{ChordEvent, HarmonicFeatures, KeyEstimate};
pub use midlevel::{MidLevelFeatures, MidLevelModel};
pub use signal::{SignalFeatures, VocalFlag};
pub use tabular::{FeatureGroup, FeatureVector, LabelMatrix, SplitSpec, StandardScaler, TaskKind};
