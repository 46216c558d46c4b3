//! Onset detection and tempo estimation.
//!
//! Onsets are peaks of a half-wave-rectified spectral-flux novelty curve
//! that clear a moving-median threshold. Tempo is the autocorrelation peak
//! of the smoothed novelty inside the 60-180 BPM range, refined by a
//! least-squares fit of a beat grid through the detected onsets.

use serde::{Deserialize, Serialize};

use super::stft::{stft_samples, Spectrogram};
use super::{FRAME_SIZE, HOP_SIZE};
use crate::audio::AudioClip;

pub const MIN_BPM: f64 = 60.0;
pub const MAX_BPM: f64 = 180.0;
/// Clips shorter than this report bpm 0.
pub const MIN_TEMPO_SECONDS: f64 = 3.0;

const MEDIAN_RADIUS: usize = 8;
const RELATIVE_DELTA: f64 = 0.1;
const CONTENT_DELTA: f64 = 0.02;
const PRIOR_BPM: f64 = 120.0;
const PRIOR_OCTAVES: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TempoEstimate {
    /// Beats per minute in `[60, 180]`, or 0 when no tempo was found.
    pub bpm: f64,
    /// Beat times in seconds, strictly increasing.
    pub beats: Vec<f64>,
    /// Detected onsets per second.
    pub onset_rate: f64,
    /// Onset times in seconds.
    pub onsets: Vec<f64>,
}

/// Half-wave-rectified spectral flux of log-compressed magnitudes.
/// The first frame has no predecessor and scores 0.
pub fn onset_novelty(spec: &Spectrogram) -> Vec<f64> {
    let compressed: Vec<Vec<f64>> = spec
        .frames
        .iter()
        .map(|row| row.iter().map(|m| m.ln_1p()).collect())
        .collect();
    let mut out = vec![0.0; compressed.len()];
    for t in 1..compressed.len() {
        out[t] = compressed[t]
            .iter()
            .zip(&compressed[t - 1])
            .map(|(c, p)| (c - p).max(0.0))
            .sum();
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn pick_onsets(novelty: &[f64], spec: &Spectrogram) -> Vec<usize> {
    let n = novelty.len();
    if n < 3 {
        return Vec::new();
    }
    let max = novelty.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let content = spec
        .frames
        .iter()
        .map(|row| row.iter().map(|m| m.ln_1p()).sum::<f64>())
        .sum::<f64>()
        / spec.frames.len() as f64;
    let delta = (RELATIVE_DELTA * max).max(CONTENT_DELTA * content);
    let mut scratch = Vec::with_capacity(2 * MEDIAN_RADIUS + 1);
    (1..n)
        .filter(|&t| {
            let v = novelty[t];
            if v <= 0.0 || v <= novelty[t - 1] || (t + 1 < n && v < novelty[t + 1]) {
                return false;
            }
            scratch.clear();
            scratch.extend_from_slice(&novelty[t.saturating_sub(MEDIAN_RADIUS)..(t + MEDIAN_RADIUS + 1).min(n)]);
            v >= median(&mut scratch) + delta
        })
        .collect()
}

fn fold_bpm(mut bpm: f64) -> f64 {
    while bpm > MAX_BPM {
        bpm /= 2.0;
    }
    while bpm > 0.0 && bpm < MIN_BPM {
        bpm *= 2.0;
    }
    bpm
}

/// Coarse tempo from the autocorrelation of the smoothed novelty curve.
fn coarse_bpm(novelty: &[f64], fps: f64) -> Option<f64> {
    let n = novelty.len();
    let smooth: Vec<f64> = (0..n)
        .map(|t| {
            let prev = if t > 0 { novelty[t - 1] } else { 0.0 };
            let next = if t + 1 < n { novelty[t + 1] } else { 0.0 };
            0.25 * prev + 0.5 * novelty[t] + 0.25 * next
        })
        .collect();
    let mu = smooth.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = smooth.iter().map(|v| v - mu).collect();
    let min_lag = (60.0 * fps / MAX_BPM).floor().max(1.0) as usize;
    let max_lag = ((60.0 * fps / MIN_BPM).ceil() as usize + 1).min(n.saturating_sub(2));
    if min_lag + 2 > max_lag {
        return None;
    }
    let acf: Vec<f64> = (0..=max_lag + 1)
        .map(|lag| {
            if lag >= n {
                return 0.0;
            }
            let s: f64 = centered[..n - lag]
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum();
            s / (n - lag) as f64
        })
        .collect();
    let weight = |lag: f64| {
        let bpm = 60.0 * fps / lag;
        let oct = (bpm / PRIOR_BPM).log2() / PRIOR_OCTAVES;
        (-0.5 * oct * oct).exp()
    };
    let mut best: Option<(usize, f64)> = None;
    for lag in min_lag.max(1)..=max_lag {
        let bpm = 60.0 * fps / lag as f64;
        if !(MIN_BPM * 0.95..=MAX_BPM * 1.05).contains(&bpm) {
            continue;
        }
        let is_peak = acf[lag] > 0.0 && acf[lag] >= acf[lag - 1] && acf[lag] >= acf[lag + 1];
        if !is_peak {
            continue;
        }
        let score = acf[lag] * weight(lag as f64);
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((lag, score));
        }
    }
    let (lag, _) = best?;
    // Parabolic interpolation of the peak.
    let (a, b, c) = (acf[lag - 1], acf[lag], acf[lag + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 1e-300 {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some(fold_bpm(60.0 * fps / (lag as f64 + offset)))
}

/// Least-squares beat grid through the onsets, re-fitted until the inlier
/// set stops changing the period. Returns `(phase, period)`.
fn refine_grid(onsets: &[f64], period: f64) -> Option<(f64, f64)> {
    let mut fit = fit_grid(onsets, period)?;
    for _ in 0..4 {
        match fit_grid(onsets, fit.1) {
            Some(next) if (next.1 - fit.1).abs() > 1e-12 => fit = next,
            Some(next) => return Some(next),
            None => break,
        }
    }
    Some(fit)
}

/// One least-squares pass over the onsets near a grid of `period` anchored
/// at the onset with the most such inliers.
fn fit_grid(onsets: &[f64], period: f64) -> Option<(f64, f64)> {
    let tol = 0.25 * period;
    let mut best: Option<(usize, Vec<(f64, f64)>)> = None;
    for &anchor in onsets {
        let inliers: Vec<(f64, f64)> = onsets
            .iter()
            .filter_map(|&o| {
                let k = ((o - anchor) / period).round();
                let r = o - anchor - k * period;
                (r.abs() < tol).then_some((k, o))
            })
            .collect();
        if best.as_ref().map_or(true, |(n, _)| inliers.len() > *n) {
            best = Some((inliers.len(), inliers));
        }
    }
    let (_, pts) = best?;
    let kmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let kmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if pts.len() < 3 || kmax - kmin < 2.0 {
        return None;
    }
    let n = pts.len() as f64;
    let mk = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mo = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let skk: f64 = pts.iter().map(|p| (p.0 - mk) * (p.0 - mk)).sum();
    let sko: f64 = pts.iter().map(|p| (p.0 - mk) * (p.1 - mo)).sum();
    let slope = sko / skk;
    if !(slope.is_finite() && (slope / period - 1.0).abs() < 0.1) {
        return None;
    }
    Some((mo - slope * mk, slope))
}

/// Estimates tempo, beat positions and onset rate of a clip.
pub fn estimate_tempo(clip: &AudioClip) -> TempoEstimate {
    match stft_samples(&clip.samples, clip.sample_rate, FRAME_SIZE, HOP_SIZE) {
        Ok(spec) => estimate_tempo_from(clip, &spec),
        Err(_) => TempoEstimate::default(),
    }
}

pub(crate) fn estimate_tempo_from(clip: &AudioClip, spec: &Spectrogram) -> TempoEstimate {
    let duration = clip.duration_seconds();
    let novelty = onset_novelty(spec);
    let onset_frames = pick_onsets(&novelty, spec);
    let onsets: Vec<f64> = onset_frames.iter().map(|&t| spec.frame_time(t)).collect();
    let onset_rate = if duration > 0.0 {
        onsets.len() as f64 / duration
    } else {
        0.0
    };
    let mut est = TempoEstimate {
        bpm: 0.0,
        beats: Vec::new(),
        onset_rate,
        onsets,
    };
    if duration < MIN_TEMPO_SECONDS || est.onsets.len() < 2 {
        return est;
    }
    let fps = spec.sample_rate as f64 / spec.hop as f64;
    let Some(coarse) = coarse_bpm(&novelty, fps) else {
        return est;
    };
    let coarse_period = 60.0 / coarse;
    let (phase, period) = refine_grid(&est.onsets, coarse_period).unwrap_or((est.onsets[0], coarse_period));
    let bpm = fold_bpm(60.0 / period).clamp(MIN_BPM, MAX_BPM);
    let period = 60.0 / bpm;
    let first = phase - (phase / period).floor() * period;
    let mut beats = Vec::new();
    let mut t = first;
    while t < duration {
        if t >= 0.0 {
            beats.push(t);
        }
        t += period;
    }
    est.bpm = bpm;
    est.beats = beats;
    est
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_into_range() {
        assert_eq!(fold_bpm(240.0), 120.0);
        assert_eq!(fold_bpm(45.0), 90.0);
        assert_eq!(fold_bpm(100.0), 100.0);
    }

    #[test]
    fn silence_has_no_tempo() {
        let clip = AudioClip::new(vec![0.0; 22050 * 5], 22050, "s");
        let t = estimate_tempo(&clip);
        assert_eq!(t.bpm, 0.0);
        assert!(t.beats.is_empty());
        assert_eq!(t.onset_rate, 0.0);
    }

    #[test]
    fn short_clip_reports_zero_bpm() {
        let clip = AudioClip::new(vec![0.1; 22050], 22050, "s");
        assert_eq!(estimate_tempo(&clip).bpm, 0.0);
    }

    #[test]
    fn grid_refinement_recovers_period() {
        let onsets: Vec<f64> = (0..20)
            .map(|k| 0.3 + 0.5 * k as f64 + if k % 2 == 0 { 0.01 } else { -0.01 })
            .collect();
        let (_, p) = refine_grid(&onsets, 0.485).unwrap();
        assert!((p - 0.5).abs() < 1e-3, "{p}");
    }
}
