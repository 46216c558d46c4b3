use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::features::{assemble, FeatureVector};
use super::TabularError;
use crate::audio::AudioClip;
use crate::harmony::{analyze_chords, ChordEvent, HarmonicFeatures, KeyEstimate};
use crate::midlevel::{predict_midlevel, MidLevelFeatures, MidLevelModel};
use crate::signal::{mfcc, signal_descriptors, VocalFlag};

/// One row of a chords manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ChordManifestEntry {
    pub track_id: String,
    pub lab_path: Option<PathBuf>,
    pub key: Option<KeyEstimate>,
    pub vocal: VocalFlag,
}

fn parse_vocal(raw: &str, line: usize) -> Result<VocalFlag, TabularError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "" | "-" | "unknown" => Ok(VocalFlag::Unknown),
        "vocal" | "voice" | "1" => Ok(VocalFlag::Vocal),
        "instrumental" | "0" => Ok(VocalFlag::Instrumental),
        other => Err(TabularError::MalformedRow {
            line,
            reason: format!("unknown vocal flag {other:?}"),
        }),
    }
}

/// Parses a chords manifest: tab-separated `track_id lab_path [key] [vocal]`
/// rows with an optional `track_id` header. Empty or `-` fields are absent
/// values; relative lab paths are resolved against `base_dir`.
pub fn parse_chord_manifest(text: &str, base_dir: &Path) -> Result<BTreeMap<String, ChordManifestEntry>, TabularError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || (i == 0 && line.starts_with("track_id")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols[0].trim().is_empty() {
            return Err(TabularError::MalformedRow {
                line: line_no,
                reason: "expected `track_id<TAB>lab_path`".into(),
            });
        }
        let field = |k: usize| cols.get(k).map(|s| s.trim()).filter(|s| !s.is_empty() && *s != "-");
        let lab_path = field(1).map(|p| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        });
        let key = field(2)
            .map(KeyEstimate::parse)
            .transpose()
            .map_err(|e| TabularError::MalformedRow {
                line: line_no,
                reason: e.to_string(),
            })?;
        let vocal = parse_vocal(field(3).unwrap_or(""), line_no)?;
        let id = cols[0].trim().to_string();
        let entry = ChordManifestEntry {
            track_id: id.clone(),
            lab_path,
            key,
            vocal,
        };
        if out.insert(id.clone(), entry).is_some() {
            return Err(TabularError::DuplicateTrackId(id));
        }
    }
    Ok(out)
}

pub fn read_chord_manifest(path: impl AsRef<Path>) -> Result<BTreeMap<String, ChordManifestEntry>, TabularError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    parse_chord_manifest(&std::fs::read_to_string(path)?, base)
}

/// Feature vector of one track plus the flags raised while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub vector: FeatureVector,
    pub missing_chords: bool,
    pub key: Option<KeyEstimate>,
}

/// Computes the 62-value vector of a decoded clip. Without chords the
/// harmonic block is zero and `missing_chords` is set; without a mid-level
/// model the mid-level block is zero.
pub fn extract_clip(
    clip: &AudioClip,
    track_id: &str,
    chords: Option<&[ChordEvent]>,
    key: Option<KeyEstimate>,
    vocal: VocalFlag,
    midlevel: Option<&MidLevelModel>,
) -> Result<Extracted, TabularError> {
    let (harmonic, key, missing) = match chords {
        Some(c) if !c.is_empty() => {
            let (h, k) = analyze_chords(c, key);
            (h, k, false)
        }
        _ => (HarmonicFeatures::default(), None, true),
    };
    let mid = match midlevel {
        Some(m) => predict_midlevel(m, &mfcc(clip)?),
        None => MidLevelFeatures::default(),
    };
    let signal = signal_descriptors(clip, chords, vocal)?;
    Ok(Extracted {
        vector: assemble(&harmonic, &mid, &signal, track_id),
        missing_chords: missing,
        key,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_rows() {
        let text = "track_id\tlab\tkey\tvocal\na\tchords/a.lab\tC:maj\tvocal\nb\t-\t\t\nc\t/abs/c.lab\tA:min\t0\n";
        let m = parse_chord_manifest(text, Path::new("/base")).unwrap();
        assert_eq!(m["a"].lab_path, Some(PathBuf::from("/base/chords/a.lab")));
        assert_eq!(m["a"].vocal, VocalFlag::Vocal);
        assert_eq!(m["b"].lab_path, None);
        assert_eq!(m["b"].key, None);
        assert_eq!(m["c"].lab_path, Some(PathBuf::from("/abs/c.lab")));
        assert_eq!(m["c"].vocal, VocalFlag::Instrumental);
        assert!(parse_chord_manifest("x\ta.lab\tH:maj\n", Path::new(".")).is_err());
        assert!(parse_chord_manifest("x\n", Path::new(".")).is_err());
    }

    #[test]
    fn clip_without_chords_or_model() {
        let samples: Vec<f64> = (0..22050 * 2)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 22050.0).sin())
            .collect();
        let clip = AudioClip::new(samples, 22050, "t");
        let e = extract_clip(&clip, "t", None, None, VocalFlag::Unknown, None).unwrap();
        assert!(e.missing_chords);
        assert_eq!(e.vector.values.len(), 62);
        assert!(e.vector.values[..39].iter().all(|&v| v == 0.0));
        assert!(e.vector.values.iter().all(|v| v.is_finite()));
    }
}
