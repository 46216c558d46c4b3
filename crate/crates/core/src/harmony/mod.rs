//! Functional-harmony features from chord annotations.
//!
//! Chords are labelled tonic, dominant, subdominant or glob relative to an
//! estimated (or supplied) key; the resulting function stream is summarized
//! into 2 ratio features and 30 bigram/trigram ratios.

mod chord;
mod function;
mod key;

use thiserror::Error;

pub use chord::{
    format_lab, parse_chord_label, parse_lab, read_lab, Chord, ChordEvent, ChordParseError, LabError, PitchClass,
    Quality,
};
pub use function::{
    functional_labels, harmonic_features, HarmonicFeatures, HarmonicFunction, HARMONIC_FEATURE_NAMES, NGRAM_SLOTS,
};
pub use key::{estimate_key, KeyEstimate, Mode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarmonyError {
    #[error("chord sequence has no pitched chords")]
    NoPitchedChords,
    #[error("not a key label: {0:?}")]
    InvalidKey(String),
    #[error(transparent)]
    Parse(#[from] ChordParseError),
}

/// Full harmonic path for one track: key (override or estimate), functional
/// labels, feature vector. Sequences without pitched chords yield zeros and
/// no key.
pub fn analyze_chords(
    chords: &[ChordEvent],
    key_override: Option<KeyEstimate>,
) -> (HarmonicFeatures, Option<KeyEstimate>) {
    let key = match key_override {
        Some(k) => k,
        None => match estimate_key(chords) {
            Ok(k) => k,
            Err(_) => return (HarmonicFeatures::default(), None),
        },
    };
    let functions = functional_labels(chords, &key);
    (harmonic_features(&functions), Some(key))
}
