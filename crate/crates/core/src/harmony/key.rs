use serde::{Deserialize, Serialize};

use super::chord::{parse_chord_label, Chord, ChordEvent, PitchClass, Quality};
use super::HarmonyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyEstimate {
    pub tonic: PitchClass,
    pub mode: Mode,
    /// Share of the best achievable template score, in `[0, 1]`.
    pub confidence: f64,
}

impl KeyEstimate {
    pub fn new(tonic: PitchClass, mode: Mode) -> Self {
        Self {
            tonic: tonic % 12,
            mode,
            confidence: 1.0,
        }
    }

    /// Parses a key written as a chord label: `C:maj`, `A:min`, or a bare note
    /// for major.
    pub fn parse(label: &str) -> Result<Self, HarmonyError> {
        match parse_chord_label(label)? {
            Chord::Pitched {
                root,
                quality: Quality::Maj,
            } => Ok(Self::new(root, Mode::Major)),
            Chord::Pitched {
                root,
                quality: Quality::Min,
            } => Ok(Self::new(root, Mode::Minor)),
            _ => Err(HarmonyError::InvalidKey(label.to_string())),
        }
    }

    pub fn transposed(self, semitones: i32) -> Self {
        Self {
            tonic: (self.tonic as i32 + semitones).rem_euclid(12) as u8,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Triad {
    Major,
    Minor,
    Diminished,
}

/// Diatonic chords of a key: (semitones above tonic, triad kind, weight).
/// Minor keys use natural minor plus the harmonic-minor dominant.
fn diatonic(mode: Mode) -> &'static [(u8, Triad, f64)] {
    use Triad::*;
    match mode {
        Mode::Major => &[
            (0, Major, 2.0),
            (2, Minor, 1.0),
            (4, Minor, 1.0),
            (5, Major, 1.25),
            (7, Major, 1.5),
            (9, Minor, 1.0),
            (11, Diminished, 1.0),
        ],
        Mode::Minor => &[
            (0, Minor, 2.0),
            (2, Diminished, 1.0),
            (3, Major, 1.0),
            (5, Minor, 1.25),
            (7, Major, 1.5),
            (8, Major, 1.0),
            (10, Major, 1.0),
            (11, Diminished, 1.0),
        ],
    }
}

fn triad_of(q: Quality) -> Option<Triad> {
    match q {
        Quality::Maj | Quality::Maj7 | Quality::Dom7 => Some(Triad::Major),
        Quality::Min | Quality::Min7 => Some(Triad::Minor),
        Quality::Dim => Some(Triad::Diminished),
        _ => None,
    }
}

/// Template score of one chord in a key. A diatonic root with the matching
/// triad scores the degree weight; a diatonic root with an ambiguous or
/// mismatched quality scores half of it.
pub(crate) fn chord_fit(root: PitchClass, quality: Quality, tonic: PitchClass, mode: Mode) -> f64 {
    let degree = (root as i32 - tonic as i32).rem_euclid(12) as u8;
    let mut best: f64 = 0.0;
    for &(d, triad, weight) in diatonic(mode) {
        if d != degree {
            continue;
        }
        let s = if triad_of(quality) == Some(triad) {
            weight
        } else {
            0.5 * weight
        };
        best = best.max(s);
    }
    best
}

/// Picks the key whose diatonic template best matches the duration-weighted
/// chords. Ties go to the lower tonic pitch class, then major over minor.
pub fn estimate_key(chords: &[ChordEvent]) -> Result<KeyEstimate, HarmonyError> {
    let pitched: Vec<(PitchClass, Quality, f64)> = chords
        .iter()
        .filter_map(|e| match e.chord {
            Chord::Pitched { root, quality } => Some((root, quality, e.duration().max(0.0))),
            Chord::NoChord => None,
        })
        .collect();
    if pitched.is_empty() {
        return Err(HarmonyError::NoPitchedChords);
    }
    let total: f64 = pitched.iter().map(|p| p.2).sum();
    let mut best = (0u8, Mode::Major, f64::NEG_INFINITY);
    for tonic in 0..12u8 {
        for mode in [Mode::Major, Mode::Minor] {
            let score: f64 = pitched.iter().map(|&(r, q, d)| d * chord_fit(r, q, tonic, mode)).sum();
            if score > best.2 {
                best = (tonic, mode, score);
            }
        }
    }
    let confidence = if total > 0.0 {
        (best.2 / (2.0 * total)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(KeyEstimate {
        tonic: best.0,
        mode: best.1,
        confidence,
    })
}
