//! Chord symbols in the `Root:quality[/bass]` annotation convention and the
//! three-column `.lab` files that carry them.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pitch class, 0 = C ... 11 = B.
pub type PitchClass = u8;

const NOTE_NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Maj,
    Min,
    Dim,
    Aug,
    Maj7,
    Min7,
    Dom7,
    Sus2,
    Sus4,
    Other,
}

impl Quality {
    fn token(self) -> &'static str {
        match self {
            Self::Maj => "maj",
            Self::Min => "min",
            Self::Dim => "dim",
            Self::Aug => "aug",
            Self::Maj7 => "maj7",
            Self::Min7 => "min7",
            Self::Dom7 => "7",
            Self::Sus2 => "sus2",
            Self::Sus4 => "sus4",
            Self::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chord {
    NoChord,
    Pitched { root: PitchClass, quality: Quality },
}

impl Chord {
    pub fn pitched(root: PitchClass, quality: Quality) -> Self {
        Self::Pitched {
            root: root % 12,
            quality,
        }
    }

    pub fn is_pitched(&self) -> bool {
        matches!(self, Self::Pitched { .. })
    }

    pub fn root(&self) -> Option<PitchClass> {
        match self {
            Self::Pitched { root, .. } => Some(*root),
            Self::NoChord => None,
        }
    }

    pub fn quality(&self) -> Option<Quality> {
        match self {
            Self::Pitched { quality, .. } => Some(*quality),
            Self::NoChord => None,
        }
    }

    /// Shifts the root up by `semitones` (mod 12); the no-chord symbol is unchanged.
    pub fn transposed(self, semitones: i32) -> Self {
        match self {
            Self::Pitched { root, quality } => Self::Pitched {
                root: (root as i32 + semitones).rem_euclid(12) as u8,
                quality,
            },
            Self::NoChord => Self::NoChord,
        }
    }
}

impl fmt::Display for Chord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoChord => f.write_str("N"),
            Self::Pitched { root, quality } => {
                write!(f, "{}:{}", NOTE_NAMES[*root as usize], quality.token())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse chord label at byte {offset}: {message}")]
pub struct ChordParseError {
    pub offset: usize,
    pub message: String,
}

fn perr(offset: usize, message: impl Into<String>) -> ChordParseError {
    ChordParseError {
        offset,
        message: message.into(),
    }
}

/// Parses a note name (`A`-`G` plus any run of `#`/`b`), returning the pitch
/// class and the number of bytes consumed.
fn parse_note(s: &str, offset: usize) -> Result<(PitchClass, usize), ChordParseError> {
    let bytes = s.as_bytes();
    let base: i32 = match bytes.first() {
        Some(b'C') => 0,
        Some(b'D') => 2,
        Some(b'E') => 4,
        Some(b'F') => 5,
        Some(b'G') => 7,
        Some(b'A') => 9,
        Some(b'B') => 11,
        Some(_) => {
            return Err(perr(
                offset,
                format!(
                    "unknown note name {:?}",
                    &s[..s.chars().next().map_or(0, char::len_utf8)]
                ),
            ))
        }
        None => return Err(perr(offset, "missing note name")),
    };
    let mut pc = base;
    let mut used = 1;
    for &b in &bytes[1..] {
        match b {
            b'#' => pc += 1,
            b'b' => pc -= 1,
            _ => break,
        }
        used += 1;
    }
    Ok((pc.rem_euclid(12) as u8, used))
}

fn quality_from_token(token: &str) -> Option<Quality> {
    Some(match token {
        "maj" => Quality::Maj,
        "min" => Quality::Min,
        "dim" => Quality::Dim,
        "aug" => Quality::Aug,
        "maj7" => Quality::Maj7,
        "min7" => Quality::Min7,
        "7" | "dom7" => Quality::Dom7,
        "sus2" => Quality::Sus2,
        "sus4" => Quality::Sus4,
        "dim7" | "hdim7" | "minmaj7" | "maj6" | "min6" | "9" | "maj9" | "min9" | "11" | "min11" | "13" | "maj13"
        | "min13" | "5" | "1" | "aug7" | "7sus4" | "6" => Quality::Other,
        _ => return None,
    })
}

/// Parses one chord label.
///
/// Grammar: `N` (or `X`) for no chord, otherwise a note name, an optional
/// `:quality` token with an optional parenthesised interval list, and an
/// optional `/bass` given as a note name or scale degree. A bare note name
/// is a major triad.
pub fn parse_chord_label(label: &str) -> Result<Chord, ChordParseError> {
    if label.is_empty() {
        return Err(perr(0, "empty label"));
    }
    if label == "N" || label == "X" {
        return Ok(Chord::NoChord);
    }
    let (root, mut pos) = parse_note(label, 0)?;
    let mut quality = Quality::Maj;
    if label[pos..].starts_with(':') {
        pos += 1;
        let rest = &label[pos..];
        let end = rest.find(['/', '(']).unwrap_or(rest.len());
        let token = &rest[..end];
        if token.is_empty() {
            if !rest.starts_with('(') {
                return Err(perr(pos, "empty quality token"));
            }
            quality = Quality::Other;
        } else {
            quality = quality_from_token(token).ok_or_else(|| perr(pos, format!("unknown quality {token:?}")))?;
        }
        pos += end;
        if label[pos..].starts_with('(') {
            let close = label[pos..]
                .find(')')
                .ok_or_else(|| perr(pos, "unterminated interval list"))?;
            pos += close + 1;
        }
    }
    if label[pos..].starts_with('/') {
        pos += 1;
        let bass = &label[pos..];
        let valid_degree = !bass.is_empty()
            && bass.trim_start_matches(['b', '#']).chars().all(|c| c.is_ascii_digit())
            && bass.chars().any(|c| c.is_ascii_digit());
        if !valid_degree {
            let (_, used) = parse_note(bass, pos)?;
            if used != bass.len() {
                return Err(perr(pos + used, "trailing characters after bass note"));
            }
        }
        pos = label.len();
    }
    if pos != label.len() {
        return Err(perr(pos, format!("unexpected {:?}", &label[pos..])));
    }
    Ok(Chord::pitched(root, quality))
}

/// A timed chord from an annotation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordEvent {
    pub start: f64,
    pub end: f64,
    pub chord: Chord,
    pub raw_label: String,
}

impl ChordEvent {
    pub fn new(start: f64, end: f64, label: &str) -> Result<Self, ChordParseError> {
        Ok(Self {
            start,
            end,
            chord: parse_chord_label(label)?,
            raw_label: label.to_string(),
        })
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error("line {line}: expected `start end label`, found {found:?}")]
    Malformed { line: usize, found: String },
    #[error("line {line}: start {start} must precede end {end}")]
    InvalidTimes { line: usize, start: f64, end: f64 },
    #[error("line {line}: {source}")]
    Label {
        line: usize,
        #[source]
        source: ChordParseError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses whitespace-separated `start end label` lines. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_lab(text: &str) -> Result<Vec<ChordEvent>, LabError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        let malformed = || LabError::Malformed {
            line: line_no,
            found: trimmed.to_string(),
        };
        if cols.len() != 3 {
            return Err(malformed());
        }
        let start: f64 = cols[0].parse().map_err(|_| malformed())?;
        let end: f64 = cols[1].parse().map_err(|_| malformed())?;
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(LabError::InvalidTimes {
                line: line_no,
                start,
                end,
            });
        }
        let chord = parse_chord_label(cols[2]).map_err(|source| LabError::Label { line: line_no, source })?;
        events.push(ChordEvent {
            start,
            end,
            chord,
            raw_label: cols[2].to_string(),
        });
    }
    Ok(events)
}

pub fn read_lab(path: impl AsRef<Path>) -> Result<Vec<ChordEvent>, LabError> {
    parse_lab(&std::fs::read_to_string(path)?)
}

/// Renders events back into `.lab` text.
pub fn format_lab(events: &[ChordEvent]) -> String {
    events
        .iter()
        .map(|e| format!("{:.6}\t{:.6}\t{}\n", e.start, e.end, e.raw_label))
        .collect()
}
