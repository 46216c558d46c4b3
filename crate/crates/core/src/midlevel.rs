//! Mid-level perceptual features predicted from MFCC statistics.
//!
//! The regressor pools an MFCC matrix into per-coefficient means and
//! standard deviations (80 values) and maps them to seven perceptual scores
//! with a closed-form ridge regression.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioError, CANONICAL_RATE};
use crate::signal::{self, MfccMatrix, SignalError, MFCC_COEFFS};

/// Width of the pooled MFCC vector.
pub const POOLED_DIM: usize = 2 * MFCC_COEFFS;
pub const MIDLEVEL_DIM: usize = 7;
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;
const CONSTANT_STD: f64 = 1e-12;

pub const MIDLEVEL_FEATURE_NAMES: [&str; MIDLEVEL_DIM] = [
    "melodiousness",
    "articulation",
    "rhythmic_stability",
    "rhythmic_complexity",
    "dissonance",
    "tonal_stability",
    "minorness",
];

#[derive(Debug, Error)]
pub enum MidLevelError {
    #[error("need at least 2 training rows, got {0}")]
    NotEnoughRows(usize),
    #[error("row {row} has {found} inputs, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("non-finite value in training row {0}")]
    NonFinite(usize),
    #[error("training file: {0}")]
    Format(String),
    #[error("no audio file for clip {0:?}")]
    MissingAudio(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MidLevelFeatures {
    pub melodiousness: f64,
    pub articulation: f64,
    pub rhythmic_stability: f64,
    pub rhythmic_complexity: f64,
    pub dissonance: f64,
    pub tonal_stability: f64,
    pub minorness: f64,
}

impl MidLevelFeatures {
    pub fn from_array(v: [f64; MIDLEVEL_DIM]) -> Self {
        Self {
            melodiousness: v[0],
            articulation: v[1],
            rhythmic_stability: v[2],
            rhythmic_complexity: v[3],
            dissonance: v[4],
            tonal_stability: v[5],
            minorness: v[6],
        }
    }

    pub fn to_array(&self) -> [f64; MIDLEVEL_DIM] {
        [
            self.melodiousness,
            self.articulation,
            self.rhythmic_stability,
            self.rhythmic_complexity,
            self.dissonance,
            self.tonal_stability,
            self.minorness,
        ]
    }
}

/// Per-dimension standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Dimensions with zero variance in training; they standardize to 0.
    pub constant: Vec<bool>,
}

impl InputStats {
    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.constant[j] {
                    0.0
                } else {
                    (v - self.mean[j]) / self.std[j]
                }
            })
            .collect()
    }
}

/// Min-max scaling applied to the raw annotation targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub min: [f64; MIDLEVEL_DIM],
    pub max: [f64; MIDLEVEL_DIM],
}

impl Default for TargetScaling {
    fn default() -> Self {
        Self {
            min: [0.0; MIDLEVEL_DIM],
            max: [1.0; MIDLEVEL_DIM],
        }
    }
}

impl TargetScaling {
    /// Fits per-column extrema and returns the targets mapped into `[0, 1]`.
    pub fn fit(targets: &[[f64; MIDLEVEL_DIM]]) -> (Self, Vec<[f64; MIDLEVEL_DIM]>) {
        let mut min = [f64::INFINITY; MIDLEVEL_DIM];
        let mut max = [f64::NEG_INFINITY; MIDLEVEL_DIM];
        for t in targets {
            for k in 0..MIDLEVEL_DIM {
                min[k] = min[k].min(t[k]);
                max[k] = max[k].max(t[k]);
            }
        }
        let s = Self { min, max };
        let scaled = targets.iter().map(|t| s.forward(t)).collect();
        (s, scaled)
    }

    pub fn forward(&self, t: &[f64; MIDLEVEL_DIM]) -> [f64; MIDLEVEL_DIM] {
        std::array::from_fn(|k| {
            let range = self.max[k] - self.min[k];
            if range > 0.0 {
                (t[k] - self.min[k]) / range
            } else {
                0.5
            }
        })
    }

    /// Maps a `[0, 1]` prediction back to annotation units.
    pub fn inverse(&self, y: &[f64; MIDLEVEL_DIM]) -> [f64; MIDLEVEL_DIM] {
        std::array::from_fn(|k| self.min[k] + y[k] * (self.max[k] - self.min[k]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidLevelModel {
    /// `inputs x 7`, applied to standardized inputs.
    pub weights: Vec<[f64; MIDLEVEL_DIM]>,
    pub bias: [f64; MIDLEVEL_DIM],
    pub input_stats: InputStats,
    pub ridge_lambda: f64,
    #[serde(default)]
    pub target_scaling: TargetScaling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidLevelTrainReport {
    pub rows: usize,
    pub requested_lambda: f64,
    /// Lambda actually used; larger than requested when the design was singular.
    pub effective_lambda: f64,
    pub degenerate_design: bool,
    pub train_mse: f64,
    /// MSE of predicting each target's training mean.
    pub baseline_mse: f64,
}

impl MidLevelModel {
    /// Model with zero weights that always predicts `bias`.
    pub fn constant(bias: [f64; MIDLEVEL_DIM], inputs: usize) -> Self {
        Self {
            weights: vec![[0.0; MIDLEVEL_DIM]; inputs],
            bias,
            input_stats: InputStats {
                mean: vec![0.0; inputs],
                std: vec![1.0; inputs],
                constant: vec![false; inputs],
            },
            ridge_lambda: 0.0,
            target_scaling: TargetScaling::default(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.weights.len()
    }

    /// Affine output before clamping.
    pub fn predict_raw(&self, pooled: &[f64]) -> [f64; MIDLEVEL_DIM] {
        let z = self.input_stats.standardize(pooled);
        let mut out = self.bias;
        for (zj, w) in z.iter().zip(&self.weights) {
            for k in 0..MIDLEVEL_DIM {
                out[k] += zj * w[k];
            }
        }
        out
    }

    pub fn predict_pooled(&self, pooled: &[f64]) -> MidLevelFeatures {
        MidLevelFeatures::from_array(self.predict_raw(pooled).map(|v| v.clamp(0.0, 1.0)))
    }

    pub fn to_json(&self) -> Result<String, MidLevelError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, MidLevelError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MidLevelError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MidLevelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-coefficient mean followed by per-coefficient population std over frames.
pub fn pool_mfcc(k: &MfccMatrix) -> Vec<f64> {
    let p = k.n_coeffs();
    let s = k.n_frames();
    if s == 0 {
        return vec![0.0; 2 * p];
    }
    let mut mean = vec![0.0; p];
    for row in &k.coefficients {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= s as f64);
    let mut var = vec![0.0; p];
    for row in &k.coefficients {
        for ((acc, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    mean.into_iter()
        .chain(var.into_iter().map(|v| (v / s as f64).sqrt()))
        .collect()
}

/// Predicts the seven perceptual scores of a clip from its MFCCs.
pub fn predict_midlevel(model: &MidLevelModel, k: &MfccMatrix) -> MidLevelFeatures {
    model.predict_pooled(&pool_mfcc(k))
}

/// In-place Cholesky factorization of a symmetric matrix; `None` when it is
/// not numerically positive definite.
fn cholesky(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1e-300);
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 1e-12 * scale) {
            return None;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
        for i in 0..j {
            a[i][j] = 0.0;
        }
    }
    Some(a)
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// Closed-form ridge regression from pooled vectors to `[0, 1]` targets.
///
/// Inputs are standardized with training statistics and the intercept is
/// left unpenalized. When the normal equations are singular at the requested
/// lambda, lambda is raised until they factor and the report says so.
pub fn train_midlevel(
    rows: &[(Vec<f64>, [f64; MIDLEVEL_DIM])],
    ridge_lambda: f64,
) -> Result<(MidLevelModel, MidLevelTrainReport), MidLevelError> {
    let n = rows.len();
    if n < 2 {
        return Err(MidLevelError::NotEnoughRows(n));
    }
    let d = rows[0].0.len();
    for (i, (x, y)) in rows.iter().enumerate() {
        if x.len() != d {
            return Err(MidLevelError::DimensionMismatch {
                row: i,
                expected: d,
                found: x.len(),
            });
        }
        if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(MidLevelError::NonFinite(i));
        }
    }
    let ridge_lambda = ridge_lambda.max(0.0);

    let mut mean = vec![0.0; d];
    for (x, _) in rows {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut std = vec![0.0; d];
    for (x, _) in rows {
        for j in 0..d {
            std[j] += (x[j] - mean[j]).powi(2);
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / n as f64).sqrt());
    let constant: Vec<bool> = std.iter().map(|&s| s < CONSTANT_STD).collect();
    let std: Vec<f64> = std
        .iter()
        .zip(&constant)
        .map(|(&s, &c)| if c { 1.0 } else { s })
        .collect();
    let stats = InputStats { mean, std, constant };

    let active: Vec<usize> = (0..d).filter(|&j| !stats.constant[j]).collect();
    let z: Vec<Vec<f64>> = rows.iter().map(|(x, _)| stats.standardize(x)).collect();
    let mut ybar = [0.0; MIDLEVEL_DIM];
    for (_, y) in rows {
        for k in 0..MIDLEVEL_DIM {
            ybar[k] += y[k] / n as f64;
        }
    }

    let m = active.len();
    let mut gram = vec![vec![0.0; m]; m];
    let mut rhs = vec![[0.0; MIDLEVEL_DIM]; m];
    for (zi, (_, y)) in z.iter().zip(rows) {
        for (a, &ja) in active.iter().enumerate() {
            let za = zi[ja];
            for (b, &jb) in active.iter().enumerate().skip(a) {
                gram[a][b] += za * zi[jb];
            }
            for k in 0..MIDLEVEL_DIM {
                rhs[a][k] += za * (y[k] - ybar[k]);
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            gram[a][b] = gram[b][a];
        }
    }

    let mut lambda = ridge_lambda;
    let mut degenerate = false;
    let factor = loop {
        let mut a = gram.clone();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += lambda;
        }
        if m == 0 {
            break Vec::new();
        }
        match cholesky(a) {
            Some(l) => break l,
            None => {
                degenerate = true;
                lambda = if lambda <= 0.0 { 1e-8 } else { lambda * 10.0 };
                log::warn!("mid-level design is singular, retrying with lambda {lambda:e}");
            }
        }
    };

    let mut weights = vec![[0.0; MIDLEVEL_DIM]; d];
    for k in 0..MIDLEVEL_DIM {
        if m == 0 {
            break;
        }
        let b: Vec<f64> = rhs.iter().map(|r| r[k]).collect();
        let w = cholesky_solve(&factor, &b);
        for (a, &j) in active.iter().enumerate() {
            weights[j][k] = w[a];
        }
    }

    let model = MidLevelModel {
        weights,
        bias: ybar,
        input_stats: stats,
        ridge_lambda: lambda,
        target_scaling: TargetScaling::default(),
    };
    let mut sse = 0.0;
    let mut base = 0.0;
    for (x, y) in rows {
        let p = model.predict_raw(x);
        for k in 0..MIDLEVEL_DIM {
            sse += (p[k] - y[k]).powi(2);
            base += (ybar[k] - y[k]).powi(2);
        }
    }
    let denom = (n * MIDLEVEL_DIM) as f64;
    let report = MidLevelTrainReport {
        rows: n,
        requested_lambda: ridge_lambda,
        effective_lambda: lambda,
        degenerate_design: degenerate,
        train_mse: sse / denom,
        baseline_mse: base / denom,
    };
    Ok((model, report))
}

/// Reads the annotation CSV: header `clip_id` plus the seven feature names
/// (any order), one clip per row.
pub fn read_midlevel_csv(path: impl AsRef<Path>) -> Result<Vec<(String, [f64; MIDLEVEL_DIM])>, MidLevelError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MidLevelError::Format(format!("missing column {name:?}")))
    };
    let id_col = col("clip_id")?;
    let cols: Vec<usize> = MIDLEVEL_FEATURE_NAMES
        .iter()
        .map(|n| col(n))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut t = [0.0; MIDLEVEL_DIM];
        for (k, &c) in cols.iter().enumerate() {
            let raw = rec.get(c).unwrap_or("");
            t[k] = raw
                .parse()
                .map_err(|_| MidLevelError::Format(format!("row {}: bad value {raw:?}", i + 2)))?;
        }
        out.push((rec.get(id_col).unwrap_or("").to_string(), t));
    }
    Ok(out)
}

const AUDIO_EXTENSIONS: [&str; 3] = ["wav", "au", "snd"];

fn index_audio(dir: &Path, index: &mut HashMap<String, PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            index_audio(&p, index)?;
        } else if p
            .extension()
            .and_then(|x| x.to_str())
            .is_some_and(|x| AUDIO_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
        {
            if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                index.entry(stem.to_string()).or_insert(p);
            }
        }
    }
    Ok(())
}

/// Trains from an annotation CSV and a directory of clips named by `clip_id`.
/// Targets are min-max scaled with the file's own extrema and the scaling is
/// stored in the model.
pub fn train_from_files(
    csv_path: impl AsRef<Path>,
    audio_dir: impl AsRef<Path>,
    ridge_lambda: f64,
) -> Result<(MidLevelModel, MidLevelTrainReport), MidLevelError> {
    let labelled = read_midlevel_csv(csv_path)?;
    let mut index = HashMap::new();
    index_audio(audio_dir.as_ref(), &mut index)?;
    let (scaling, scaled) = TargetScaling::fit(&labelled.iter().map(|r| r.1).collect::<Vec<_>>());
    let mut rows = Vec::with_capacity(labelled.len());
    for ((id, _), target) in labelled.iter().zip(scaled) {
        let path = index.get(id).ok_or_else(|| MidLevelError::MissingAudio(id.clone()))?;
        let clip = audio::decode(path, CANONICAL_RATE)?;
        rows.push((pool_mfcc(&signal::mfcc(&clip)?), target));
    }
    let (mut model, report) = train_midlevel(&rows, ridge_lambda)?;
    model.target_scaling = scaling;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooling_of_identical_rows_has_zero_std() {
        let row: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let k = MfccMatrix {
            coefficients: vec![row.clone(); 5],
        };
        let p = pool_mfcc(&k);
        assert_eq!(p.len(), 80);
        for (m, r) in p[..40].iter().zip(&row) {
            assert!((m - r).abs() < 1e-12);
        }
        assert!(p[40..].iter().all(|&s| s < 1e-12));
    }

    #[test]
    fn pooling_hand_fixture() {
        let r: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let k = MfccMatrix {
            coefficients: vec![
                r.clone(),
                r.iter().map(|v| 2.0 * v).collect(),
                r.iter().map(|v| 3.0 * v).collect(),
            ],
        };
        let p = pool_mfcc(&k);
        for j in 0..40 {
            assert!((p[j] - 2.0 * r[j]).abs() < 1e-12);
            assert!((p[40 + j] - r[j] * (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_targets_predict_constant() {
        let rows: Vec<(Vec<f64>, [f64; 7])> = (0..10)
            .map(|i| ((0..80).map(|j| ((i * j) as f64).sin()).collect(), [0.3; 7]))
            .collect();
        let (m, _) = train_midlevel(&rows, 1.0).unwrap();
        let p = m.predict_raw(&vec![5.0; 80]);
        assert!(p.iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn zero_weight_model_outputs_bias() {
        let m = MidLevelModel::constant([0.5; 7], 80);
        let f = m.predict_pooled(&vec![3.0; 80]);
        assert_eq!(f.to_array(), [0.5; 7]);
    }

    #[test]
    fn singular_design_falls_back() {
        let rows = vec![(vec![1.0, 2.0], [0.1; 7]), (vec![2.0, 4.0], [0.9; 7])];
        let (_, report) = train_midlevel(&rows, 0.0).unwrap();
        assert!(report.degenerate_design);
        assert!(report.effective_lambda > 0.0);
        assert!(matches!(
            train_midlevel(&rows[..1], 1.0),
            Err(MidLevelError::NotEnoughRows(1))
        ));
    }

    #[test]
    fn target_scaling_round_trip() {
        let t = vec![[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], [3.0, 2.0, 5.0, 8.0, 5.0, 7.0, 9.0]];
        let (s, scaled) = TargetScaling::fit(&t);
        assert_eq!(scaled[0][0], 0.0);
        assert_eq!(scaled[1][0], 1.0);
        assert_eq!(scaled[0][1], 0.5); // constant column
        assert_eq!(s.inverse(&scaled[1])[3], 8.0);
    }
}
