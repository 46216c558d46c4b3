use std::fmt;

use serde::{Deserialize, Serialize};

use crate::harmony::{HarmonicFeatures, HARMONIC_FEATURE_NAMES};
use crate::midlevel::{MidLevelFeatures, MIDLEVEL_FEATURE_NAMES};
use crate::signal::{SignalFeatures, SIGNAL_FEATURE_NAMES};

pub const HARMONIC_DIM: usize = 32;
pub const MIDLEVEL_DIM: usize = 7;
pub const SIGNAL_DIM: usize = 23;
pub const FEATURE_DIM: usize = HARMONIC_DIM + MIDLEVEL_DIM + SIGNAL_DIM;

/// Origin of a feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Harmonic,
    Midlevel,
    Signal,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 3] = [Self::Harmonic, Self::Midlevel, Self::Signal];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Harmonic => "harmonic",
            Self::Midlevel => "midlevel",
            Self::Signal => "signal",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Canonical column order: 32 harmonic, 7 mid-level, 23 signal.
pub fn feature_names() -> Vec<&'static str> {
    HARMONIC_FEATURE_NAMES
        .iter()
        .chain(MIDLEVEL_FEATURE_NAMES.iter())
        .chain(SIGNAL_FEATURE_NAMES.iter())
        .copied()
        .collect()
}

pub fn feature_groups() -> Vec<FeatureGroup> {
    std::iter::repeat(FeatureGroup::Harmonic)
        .take(HARMONIC_DIM)
        .chain(std::iter::repeat(FeatureGroup::Midlevel).take(MIDLEVEL_DIM))
        .chain(std::iter::repeat(FeatureGroup::Signal).take(SIGNAL_DIM))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub track_id: String,
    pub values: Vec<f64>,
}

/// Concatenates the three feature blocks in canonical order.
pub fn assemble(
    harmonic: &HarmonicFeatures,
    midlevel: &MidLevelFeatures,
    signal: &SignalFeatures,
    track_id: impl Into<String>,
) -> FeatureVector {
    let values = harmonic
        .to_array()
        .into_iter()
        .chain(midlevel.to_array())
        .chain(signal.to_array())
        .collect();
    FeatureVector {
        track_id: track_id.into(),
        values,
    }
}
