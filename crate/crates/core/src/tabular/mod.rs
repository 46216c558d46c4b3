//! Per-track feature vectors, standardization, the on-disk feature store,
//! dataset label loaders, chords manifests and train/validation/test
//! splitting.

mod extract;
mod features;
mod labels;
mod scaler;
mod split;
mod store;

use std::path::PathBuf;

use thiserror::Error;

pub use extract::{extract_clip, parse_chord_manifest, read_chord_manifest, ChordManifestEntry, Extracted};
pub use features::{
    assemble, feature_groups, feature_names, FeatureGroup, FeatureVector, FEATURE_DIM, HARMONIC_DIM, MIDLEVEL_DIM,
    SIGNAL_DIM,
};
pub use labels::{
    load_gtzan, load_jamendo, load_label_tsv, parse_label_tsv, write_label_tsv, LabelMatrix, TaskKind, TrackRef,
    GTZAN_CLASSES, JAMENDO_FULL_SIZE, JAMENDO_TAGS,
};
pub use scaler::{StandardScaler, SCALER_EPS};
pub use split::{split, SplitSpec, DEFAULT_FRACTIONS, DEFAULT_SPLIT_SEED};
pub use store::{manifest_path_for, read_store, write_store, FeatureStore, StoreManifest};

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("no audio files under genre directory {0}")]
    EmptyGenreDir(PathBuf),
    #[error("track id {0:?} appears more than once")]
    DuplicateTrackId(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("class {class:?} has {members} members but the split has {parts} parts")]
    ClassTooSmall {
        class: String,
        members: usize,
        parts: usize,
    },
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("feature store: {0}")]
    Store(String),
    #[error("no labels for track {0:?}")]
    UnknownTrack(String),
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
    #[error(transparent)]
    Lab(#[from] crate::harmony::LabError),
    #[error(transparent)]
    MidLevel(#[from] crate::midlevel::MidLevelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
