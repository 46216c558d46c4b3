use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::stft::FrameAnalyzer;
use super::{SignalError, FRAME_SIZE, HOP_SIZE};
use crate::audio::AudioClip;

/// Coefficients kept per frame.
pub const MFCC_COEFFS: usize = 40;
/// Triangular mel filters before the DCT.
pub const MFCC_MEL_BANDS: usize = 128;
/// Only the opening stretch of a clip is analysed.
pub const MFCC_MAX_SECONDS: f64 = 15.0;
const LOG_FLOOR: f64 = 1e-10;

/// `S x 40` cepstral matrix, one row per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccMatrix {
    pub coefficients: Vec<Vec<f64>>,
}

impl MfccMatrix {
    pub fn n_frames(&self) -> usize {
        self.coefficients.len()
    }

    pub fn n_coeffs(&self) -> usize {
        self.coefficients.first().map_or(0, Vec::len)
    }
}

/// Value of coefficient 0 for a frame whose mel energies all sit at the log floor.
pub fn log_floor_c0() -> f64 {
    (MFCC_MEL_BANDS as f64).sqrt() * LOG_FLOOR.ln()
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular HTK-mel filterbank over `[0, sr/2]`, one row of bin weights per band.
fn mel_filterbank(sample_rate: u32, frame_size: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let n_bins = frame_size / 2 + 1;
    let bin_hz = sample_rate as f64 / frame_size as f64;
    let top = hz_to_mel(sample_rate as f64 / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II matrix truncated to the first `n_out` rows.
fn dct_matrix(n_in: usize, n_out: usize) -> Vec<Vec<f64>> {
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n_in as f64).sqrt()
            } else {
                (2.0 / n_in as f64).sqrt()
            };
            (0..n_in)
                .map(|m| scale * (PI * k as f64 * (m as f64 + 0.5) / n_in as f64).cos())
                .collect()
        })
        .collect()
}

/// MFCCs of the first 15 s of `clip`: Hann-windowed power spectrum, mel
/// filterbank, natural log with a floor, orthonormal DCT-II.
pub fn mfcc(clip: &AudioClip) -> Result<MfccMatrix, SignalError> {
    if clip.is_empty() {
        return Err(SignalError::TooShort {
            samples: 0,
            required: FRAME_SIZE,
        });
    }
    let limit = (MFCC_MAX_SECONDS * clip.sample_rate as f64) as usize;
    let mut samples: Vec<f64> = clip.samples[..clip.len().min(limit)].to_vec();
    if samples.len() < FRAME_SIZE {
        samples.resize(FRAME_SIZE, 0.0);
    }
    let n_frames = 1 + (samples.len() - FRAME_SIZE) / HOP_SIZE;
    let bank = mel_filterbank(clip.sample_rate, FRAME_SIZE, MFCC_MEL_BANDS);
    let dct = dct_matrix(MFCC_MEL_BANDS, MFCC_COEFFS);
    let mut analyzer = FrameAnalyzer::new(FRAME_SIZE);
    let coefficients = (0..n_frames)
        .map(|t| {
            let mag = analyzer.magnitudes(&samples[t * HOP_SIZE..t * HOP_SIZE + FRAME_SIZE]);
            let log_mel: Vec<f64> = bank
                .iter()
                .map(|w| {
                    let e: f64 = w.iter().zip(&mag).map(|(w, m)| w * m * m).sum();
                    e.max(LOG_FLOOR).ln()
                })
                .collect();
            dct.iter()
                .map(|row| row.iter().zip(&log_mel).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    Ok(MfccMatrix { coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_for_fifteen_seconds() {
        let clip = AudioClip::new(vec![0.0; 22050 * 20], 22050, "z");
        let m = mfcc(&clip).unwrap();
        assert_eq!(m.n_frames(), 1 + (330_750 - 2048) / 1024);
        assert_eq!(m.n_frames(), 321);
        assert_eq!(m.n_coeffs(), 40);
    }

    #[test]
    fn zero_signal_sits_at_floor() {
        let clip = AudioClip::new(vec![0.0; 10_000], 22050, "z");
        let m = mfcc(&clip).unwrap();
        let first = &m.coefficients[0];
        assert!(m.coefficients.iter().all(|r| r == first));
        assert!((first[0] - log_floor_c0()).abs() < 1e-9);
        assert!(first[1..].iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn short_clip_is_padded_to_one_frame() {
        let clip = AudioClip::new(vec![0.1; 100], 22050, "z");
        assert_eq!(mfcc(&clip).unwrap().n_frames(), 1);
        let empty = AudioClip::new(vec![], 22050, "z");
        assert!(mfcc(&empty).is_err());
    }

    #[test]
    fn every_mel_band_covers_a_bin() {
        let bank = mel_filterbank(22050, 2048, MFCC_MEL_BANDS);
        assert!(bank.iter().all(|w| w.iter().any(|&x| x > 0.0)));
    }
}
