use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::SignalError;
use crate::audio::AudioClip;

/// Magnitude short-time Fourier transform of a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// One row of `frame_size / 2 + 1` magnitudes per frame.
    pub frames: Vec<Vec<f64>>,
    pub frame_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
    pub bin_hz: f64,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    /// Frequency in Hz of bin `k`.
    pub fn bin_freq(&self, k: usize) -> f64 {
        k as f64 * self.bin_hz
    }

    /// Seconds at the center of frame `t`.
    pub fn frame_time(&self, t: usize) -> f64 {
        (t * self.hop + self.frame_size / 2) as f64 / self.sample_rate as f64
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Reusable forward real FFT with a fixed Hann window.
pub(crate) struct FrameAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    buf: Vec<Complex<f64>>,
}

impl FrameAnalyzer {
    pub(crate) fn new(frame_size: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(frame_size);
        Self {
            fft,
            window: hann(frame_size),
            buf: vec![Complex::new(0.0, 0.0); frame_size],
        }
    }

    /// Windowed magnitude spectrum of `frame` (must be exactly `frame_size` long).
    pub(crate) fn magnitudes(&mut self, frame: &[f64]) -> Vec<f64> {
        for ((b, &x), &w) in self.buf.iter_mut().zip(frame).zip(&self.window) {
            *b = Complex::new(x * w, 0.0);
        }
        self.fft.process(&mut self.buf);
        let n_bins = frame.len() / 2 + 1;
        self.buf[..n_bins].iter().map(|c| c.norm()).collect()
    }
}

/// Hann-windowed magnitude STFT; frame `t` covers samples
/// `[t * hop, t * hop + frame_size)`.
pub fn stft(clip: &AudioClip, frame_size: usize, hop: usize) -> Result<Spectrogram, SignalError> {
    stft_samples(&clip.samples, clip.sample_rate, frame_size, hop)
}

pub(crate) fn stft_samples(
    samples: &[f64],
    sample_rate: u32,
    frame_size: usize,
    hop: usize,
) -> Result<Spectrogram, SignalError> {
    assert!(frame_size >= 2 && hop >= 1, "frame_size >= 2 and hop >= 1 required");
    if samples.len() < frame_size {
        return Err(SignalError::TooShort {
            samples: samples.len(),
            required: frame_size,
        });
    }
    let n_frames = 1 + (samples.len() - frame_size) / hop;
    let mut analyzer = FrameAnalyzer::new(frame_size);
    let frames = (0..n_frames)
        .map(|t| analyzer.magnitudes(&samples[t * hop..t * hop + frame_size]))
        .collect();
    Ok(Spectrogram {
        frames,
        frame_size,
        hop,
        sample_rate,
        bin_hz: sample_rate as f64 / frame_size as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, 22050, "t")
    }

    #[test]
    fn zero_signal_gives_zero_rows() {
        let s = stft(&clip(vec![0.0; 8192]), 2048, 1024).unwrap();
        assert_eq!(s.n_frames(), 7);
        assert!(s.frames.iter().all(|r| r.len() == 1025 && r.iter().all(|&m| m == 0.0)));
    }

    #[test]
    fn dc_energy_sits_in_bin_zero() {
        let s = stft(&clip(vec![1.0; 8192]), 2048, 1024).unwrap();
        for row in &s.frames {
            assert!((row[0] - 1024.0).abs() < 1e-9);
            assert!(row[2..].iter().all(|&m| m < 0.01 * row[0]));
        }
    }

    #[test]
    fn sine_peak_bin() {
        let sr = 22050.0;
        let x: Vec<f64> = (0..22050).map(|n| (2.0 * PI * 1000.0 * n as f64 / sr).sin()).collect();
        let s = stft(&clip(x), 2048, 1024).unwrap();
        let expected = (1000.0f64 * 2048.0 / 22050.0).round() as usize;
        assert_eq!(expected, 93);
        for row in &s.frames {
            let argmax = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert_eq!(argmax, expected);
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            stft(&clip(vec![0.0; 100]), 2048, 1024),
            Err(SignalError::TooShort { .. })
        ));
    }
}
