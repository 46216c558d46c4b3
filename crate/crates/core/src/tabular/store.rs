//! CSV feature store with a JSON sidecar manifest.
//!
//! The CSV holds `track_id` followed by one column per feature. Values are
//! written in Rust's shortest round-trip decimal form, so a write/read cycle
//! reproduces every `f64` bit for bit.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::features::{feature_groups, feature_names, FeatureGroup, FeatureVector};
use super::scaler::StandardScaler;
use super::TabularError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub feature_names: Vec<String>,
    pub groups: Vec<FeatureGroup>,
    #[serde(default)]
    pub scaler: Option<StandardScaler>,
    #[serde(default)]
    pub config_hash: String,
    pub n_rows: usize,
    /// Tracks whose harmonic block was zero-filled for lack of chords.
    #[serde(default)]
    pub missing_chords: Vec<String>,
}

impl StoreManifest {
    /// Manifest for the canonical 62-column layout.
    pub fn canonical(n_rows: usize, config_hash: impl Into<String>) -> Self {
        Self {
            feature_names: feature_names().into_iter().map(String::from).collect(),
            groups: feature_groups(),
            scaler: None,
            config_hash: config_hash.into(),
            n_rows,
            missing_chords: Vec::new(),
        }
    }

    pub fn columns_in(&self, groups: &[FeatureGroup]) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| groups.contains(g))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn validate(&self) -> Result<(), TabularError> {
        if self.feature_names.len() != self.groups.len() {
            return Err(TabularError::Store(format!(
                "manifest lists {} names but {} group tags",
                self.feature_names.len(),
                self.groups.len()
            )));
        }
        let unique: BTreeSet<&String> = self.feature_names.iter().collect();
        if unique.len() != self.feature_names.len() {
            return Err(TabularError::Store("duplicate feature names in manifest".into()));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TabularError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TabularError> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.validate()?;
        Ok(m)
    }
}

/// Rows of a feature store with their column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub names: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureStore {
    pub fn ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.track_id.clone()).collect()
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    pub fn position(&self, track_id: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.track_id == track_id)
    }
}

/// `features.csv` -> `features.json`.
pub fn manifest_path_for(csv_path: impl AsRef<Path>) -> PathBuf {
    csv_path.as_ref().with_extension("json")
}

pub fn write_store(
    csv_path: impl AsRef<Path>,
    names: &[impl AsRef<str>],
    rows: &[FeatureVector],
) -> Result<(), TabularError> {
    let mut w = csv::Writer::from_path(csv_path)?;
    let header: Vec<&str> = std::iter::once("track_id")
        .chain(names.iter().map(|n| n.as_ref()))
        .collect();
    w.write_record(&header)?;
    for r in rows {
        if r.values.len() != names.len() {
            return Err(TabularError::Store(format!(
                "row {} has {} values for {} columns",
                r.track_id,
                r.values.len(),
                names.len()
            )));
        }
        if let Some(v) = r.values.iter().find(|v| !v.is_finite()) {
            return Err(TabularError::Store(format!(
                "row {} holds non-finite value {v}",
                r.track_id
            )));
        }
        let mut rec = Vec::with_capacity(names.len() + 1);
        rec.push(r.track_id.clone());
        rec.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_store(csv_path: impl AsRef<Path>) -> Result<FeatureStore, TabularError> {
    let mut rdr = csv::Reader::from_path(csv_path)?;
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("track_id") {
        return Err(TabularError::Store("first column must be track_id".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != names.len() + 1 {
            return Err(TabularError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", names.len() + 1, rec.len()),
            });
        }
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(TabularError::DuplicateTrackId(id));
        }
        let values = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| TabularError::MalformedRow {
                        line,
                        reason: format!("not a finite number: {s:?}"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(FeatureVector { track_id: id, values });
    }
    Ok(FeatureStore { names, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let rows = vec![
            FeatureVector {
                track_id: "a".into(),
                values: vec![0.1 + 0.2, 1e-300, -3.5e17],
            },
            FeatureVector {
                track_id: "b".into(),
                values: vec![f64::MIN_POSITIVE, 1.0 / 3.0, 0.0],
            },
        ];
        write_store(&path, &["x", "y", "z"], &rows).unwrap();
        let back = read_store(&path).unwrap();
        assert_eq!(back.names, vec!["x", "y", "z"]);
        for (a, b) in rows.iter().zip(&back.rows) {
            assert_eq!(a.track_id, b.track_id);
            let bits: Vec<u64> = a.values.iter().map(|v| v.to_bits()).collect();
            let bits_back: Vec<u64> = b.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits, bits_back);
        }
    }

    #[test]
    fn rejects_non_finite_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let bad = vec![FeatureVector {
            track_id: "a".into(),
            values: vec![f64::NAN],
        }];
        assert!(write_store(&path, &["x"], &bad).is_err());
        std::fs::write(&path, "track_id,x\na,1\na,2\n").unwrap();
        assert!(matches!(read_store(&path), Err(TabularError::DuplicateTrackId(_))));
    }

    #[test]
    fn canonical_manifest_groups() {
        let m = StoreManifest::canonical(3, "h");
        m.validate().unwrap();
        assert_eq!(m.columns_in(&[FeatureGroup::Signal]).len(), 23);
        assert_eq!(m.columns_in(&FeatureGroup::ALL).len(), 62);
    }
}
