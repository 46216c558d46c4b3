//! Signal-processing descriptors computed directly from audio.
//!
//! All frame analyses share a 2048-sample Hann window with a 1024-sample hop.
//! Frame-level descriptors are reduced to one scalar per clip by the
//! arithmetic mean over frames.

mod descriptors;
mod mfcc;
mod stft;
mod tempo;

use thiserror::Error;

pub use descriptors::{
    band_energy_ratios, dfa_exponent, frame_rms, pitch_salience, signal_descriptors, spectral_centroid,
    spectral_complexity, spectral_decrease, spectral_entropy, spectral_flux, spectral_rolloff, spectral_spread,
    zero_crossing_rate, SignalFeatures, VocalFlag, BANDS, LOUDNESS_FLOOR_DB, SIGNAL_FEATURE_NAMES,
};
pub use mfcc::{log_floor_c0, mfcc, MfccMatrix, MFCC_COEFFS, MFCC_MAX_SECONDS, MFCC_MEL_BANDS};
pub use stft::{hann, stft, Spectrogram};
pub use tempo::{estimate_tempo, onset_novelty, TempoEstimate, MAX_BPM, MIN_BPM, MIN_TEMPO_SECONDS};

/// Analysis window and FFT size.
pub const FRAME_SIZE: usize = 2048;
/// Hop between analysis frames (50% overlap).
pub const HOP_SIZE: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("clip has {samples} samples, at least {required} required")]
    TooShort { samples: usize, required: usize },
}
