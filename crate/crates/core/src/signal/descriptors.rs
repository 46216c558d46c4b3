use std::collections::BTreeSet;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::stft::{stft_samples, Spectrogram};
use super::tempo::{estimate_tempo_from, TempoEstimate};
use super::{SignalError, FRAME_SIZE, HOP_SIZE};
use crate::audio::AudioClip;
use crate::harmony::{Chord, ChordEvent};

/// Floor applied to every decibel quantity.
pub const LOUDNESS_FLOOR_DB: f64 = -120.0;

/// Band edges in Hz for the four energy-band ratios: low, mid-low, mid-high, high.
pub const BANDS: [(f64, f64); 4] = [(20.0, 150.0), (150.0, 800.0), (800.0, 4000.0), (4000.0, 11025.0)];

const ROLLOFF_FRACTION: f64 = 0.85;
const PEAK_THRESHOLD: f64 = 0.005;
const SALIENCE_LOW_HZ: f64 = 100.0;
const SALIENCE_HIGH_HZ: f64 = 5000.0;
const BEAT_WINDOW_S: f64 = 0.05;

/// Canonical order of the 23 signal descriptors.
pub const SIGNAL_FEATURE_NAMES: [&str; 23] = [
    "danceability",
    "loudness_db",
    "chords_changes_rate",
    "dynamic_complexity_db",
    "zero_crossing_rate",
    "chords_number_rate",
    "pitch_salience",
    "spectral_centroid",
    "spectral_complexity",
    "spectral_decrease",
    "energy_high",
    "energy_low",
    "energy_mid_high",
    "energy_mid_low",
    "spectral_entropy",
    "spectral_flux",
    "spectral_rolloff",
    "spectral_spread",
    "onset_rate",
    "length_s",
    "bpm",
    "beats_loud",
    "vocal_instrumental",
];

/// Vocal/instrumental metadata supplied alongside the audio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VocalFlag {
    Vocal,
    Instrumental,
    #[default]
    Unknown,
}

impl VocalFlag {
    pub fn value(self) -> f64 {
        match self {
            Self::Vocal => 1.0,
            Self::Instrumental => 0.0,
            Self::Unknown => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SignalFeatures {
    pub danceability: f64,
    pub loudness_db: f64,
    pub chords_changes_rate: f64,
    pub dynamic_complexity_db: f64,
    pub zero_crossing_rate: f64,
    pub chords_number_rate: f64,
    pub pitch_salience: f64,
    pub spectral_centroid: f64,
    pub spectral_complexity: f64,
    pub spectral_decrease: f64,
    pub energy_high: f64,
    pub energy_low: f64,
    pub energy_mid_high: f64,
    pub energy_mid_low: f64,
    pub spectral_entropy: f64,
    pub spectral_flux: f64,
    pub spectral_rolloff: f64,
    pub spectral_spread: f64,
    pub onset_rate: f64,
    pub length_s: f64,
    pub bpm: f64,
    pub beats_loud: f64,
    pub vocal_instrumental: f64,
}

impl SignalFeatures {
    /// Values in [`SIGNAL_FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; 23] {
        [
            self.danceability,
            self.loudness_db,
            self.chords_changes_rate,
            self.dynamic_complexity_db,
            self.zero_crossing_rate,
            self.chords_number_rate,
            self.pitch_salience,
            self.spectral_centroid,
            self.spectral_complexity,
            self.spectral_decrease,
            self.energy_high,
            self.energy_low,
            self.energy_mid_high,
            self.energy_mid_low,
            self.spectral_entropy,
            self.spectral_flux,
            self.spectral_rolloff,
            self.spectral_spread,
            self.onset_rate,
            self.length_s,
            self.bpm,
            self.beats_loud,
            self.vocal_instrumental,
        ]
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn to_db(power: f64) -> f64 {
    if power > 0.0 {
        (10.0 * power.log10()).max(LOUDNESS_FLOOR_DB)
    } else {
        LOUDNESS_FLOOR_DB
    }
}

/// Magnitude-weighted mean frequency.
pub fn spectral_centroid(mag: &[f64], bin_hz: f64) -> f64 {
    let total: f64 = mag.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    mag.iter().enumerate().map(|(k, &m)| k as f64 * bin_hz * m).sum::<f64>() / total
}

/// Magnitude-weighted standard deviation of frequency around the centroid.
pub fn spectral_spread(mag: &[f64], bin_hz: f64) -> f64 {
    let total: f64 = mag.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let c = spectral_centroid(mag, bin_hz);
    let var = mag
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let d = k as f64 * bin_hz - c;
            d * d * m
        })
        .sum::<f64>()
        / total;
    var.sqrt()
}

/// Frequency below which 85% of the spectral energy lies.
pub fn spectral_rolloff(mag: &[f64], bin_hz: f64) -> f64 {
    let total: f64 = mag.iter().map(|m| m * m).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let target = ROLLOFF_FRACTION * total;
    let mut acc = 0.0;
    for (k, &m) in mag.iter().enumerate() {
        acc += m * m;
        if acc >= target {
            return k as f64 * bin_hz;
        }
    }
    (mag.len() - 1) as f64 * bin_hz
}

/// Shannon entropy in bits of the sum-normalized power spectrum.
pub fn spectral_entropy(mag: &[f64]) -> f64 {
    let total: f64 = mag.iter().map(|m| m * m).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h: f64 = mag
        .iter()
        .map(|m| m * m / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    h.max(0.0)
}

/// `sum_{k>=2} (m_k - m_1)/(k-1) / sum_{k>=2} m_k` with 1-based bins.
pub fn spectral_decrease(mag: &[f64]) -> f64 {
    if mag.len() < 2 {
        return 0.0;
    }
    let denom: f64 = mag[1..].iter().sum();
    if denom <= 0.0 {
        return 0.0;
    }
    let first = mag[0];
    let num: f64 = mag[1..]
        .iter()
        .enumerate()
        .map(|(i, &m)| (m - first) / (i + 1) as f64)
        .sum();
    num / denom
}

/// Number of local spectral maxima above 0.5% of the frame maximum.
pub fn spectral_complexity(mag: &[f64]) -> f64 {
    let max = mag.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 || mag.len() < 3 {
        return 0.0;
    }
    let thr = PEAK_THRESHOLD * max;
    mag.windows(3)
        .filter(|w| w[1] > thr && w[1] > w[0] && w[1] >= w[2])
        .count() as f64
}

/// Energy ratios for [`BANDS`] (low, mid-low, mid-high, high) relative to the
/// whole spectrum.
pub fn band_energy_ratios(mag: &[f64], bin_hz: f64) -> [f64; 4] {
    let total: f64 = mag.iter().map(|m| m * m).sum();
    let mut out = [0.0; 4];
    if total <= 0.0 {
        return out;
    }
    for (k, &m) in mag.iter().enumerate() {
        let f = k as f64 * bin_hz;
        let last = BANDS.len() - 1;
        for (b, &(lo, hi)) in BANDS.iter().enumerate() {
            let inside = f >= lo && (f < hi || (b == last && f <= hi));
            if inside {
                out[b] += m * m;
                break;
            }
        }
    }
    out.map(|e| e / total)
}

/// L2 distance between consecutive L2-normalized spectra.
pub fn spectral_flux(prev: &[f64], cur: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (np, nc) = (norm(prev), norm(cur));
    let scale = |n: f64| if n > 0.0 { 1.0 / n } else { 0.0 };
    let (sp, sc) = (scale(np), scale(nc));
    prev.iter()
        .zip(cur)
        .map(|(a, b)| {
            let d = b * sc - a * sp;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Maximum of the autocorrelation of the magnitude spectrum, normalized by
/// its zero-lag value, over lags spanning 100 Hz to 5 kHz.
pub fn pitch_salience(mag: &[f64], bin_hz: f64) -> f64 {
    let r0: f64 = mag.iter().map(|m| m * m).sum();
    if r0 <= 0.0 {
        return 0.0;
    }
    let n = mag.len();
    let lo = ((SALIENCE_LOW_HZ / bin_hz).ceil() as usize).max(1);
    let hi = ((SALIENCE_HIGH_HZ / bin_hz).floor() as usize).min(n - 1);
    if lo > hi {
        return 0.0;
    }
    let acf = autocorrelation(mag);
    let best = acf[lo..=hi].iter().copied().fold(f64::MIN, f64::max);
    (best / r0).clamp(0.0, 1.0)
}

/// Linear autocorrelation via zero-padded FFT; entry `l` is `sum_k x_k x_{k+l}`.
fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    fwd.process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    buf[..n].iter().map(|c| c.re / size as f64).collect()
}

/// Sign changes per second; zero counts as positive.
pub fn zero_crossing_rate(samples: &[f64], sample_rate: u32) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let changes = samples.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    changes as f64 * sample_rate as f64 / samples.len() as f64
}

/// Unwindowed RMS of each analysis frame.
pub fn frame_rms(samples: &[f64], frame_size: usize, hop: usize) -> Vec<f64> {
    if samples.len() < frame_size {
        return Vec::new();
    }
    let n = 1 + (samples.len() - frame_size) / hop;
    (0..n)
        .map(|t| {
            let f = &samples[t * hop..t * hop + frame_size];
            (f.iter().map(|x| x * x).sum::<f64>() / frame_size as f64).sqrt()
        })
        .collect()
}

/// Detrended fluctuation analysis scaling exponent of `series`, or `None`
/// when the series is too short or has no fluctuation at any scale.
pub fn dfa_exponent(series: &[f64]) -> Option<f64> {
    let n = series.len();
    if n < 16 {
        return None;
    }
    let mu = mean(series.iter().copied());
    let mut profile = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &x in series {
        acc += x - mu;
        profile.push(acc);
    }
    let min_box = 4usize;
    let max_box = n / 4;
    let mut sizes: Vec<usize> = (0..12)
        .map(|i| {
            let t = i as f64 / 11.0;
            (min_box as f64 * (max_box as f64 / min_box as f64).powf(t)).round() as usize
        })
        .collect();
    sizes.dedup();
    let mut pts = Vec::new();
    for &s in &sizes {
        let boxes = n / s;
        let mut sq = 0.0;
        for b in 0..boxes {
            sq += detrended_sq_residual(&profile[b * s..(b + 1) * s]);
        }
        let f = (sq / (boxes * s) as f64).sqrt();
        if f > 1e-12 {
            pts.push(((s as f64).ln(), f.ln()));
        }
    }
    if pts.len() < 2 {
        return None;
    }
    Some(least_squares_slope(&pts))
}

fn detrended_sq_residual(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    y.iter()
        .enumerate()
        .map(|(i, &v)| {
            let r = v - (my + slope * (i as f64 - mx));
            r * r
        })
        .sum()
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

fn chord_rates(chords: &[ChordEvent], duration: f64) -> (f64, f64) {
    let pitched: Vec<&Chord> = chords.iter().map(|e| &e.chord).filter(|c| c.is_pitched()).collect();
    let changes = pitched.windows(2).filter(|w| w[0] != w[1]).count();
    let distinct: BTreeSet<String> = pitched.iter().map(|c| c.to_string()).collect();
    (changes as f64 / duration, distinct.len() as f64 / duration)
}

/// Computes all 23 signal descriptors for a clip.
///
/// Chord-rate fields come from the supplied annotation (0 when absent);
/// `vocal_instrumental` comes from `vocal`.
pub fn signal_descriptors(
    clip: &AudioClip,
    chords: Option<&[ChordEvent]>,
    vocal: VocalFlag,
) -> Result<SignalFeatures, SignalError> {
    let spec = stft_samples(&clip.samples, clip.sample_rate, FRAME_SIZE, HOP_SIZE)?;
    let tempo = estimate_tempo_from(clip, &spec);
    Ok(descriptors_from(clip, &spec, &tempo, chords, vocal))
}

fn descriptors_from(
    clip: &AudioClip,
    spec: &Spectrogram,
    tempo: &TempoEstimate,
    chords: Option<&[ChordEvent]>,
    vocal: VocalFlag,
) -> SignalFeatures {
    let bin_hz = spec.bin_hz;
    let frames = &spec.frames;
    let duration = clip.duration_seconds();

    let bands: Vec<[f64; 4]> = frames.iter().map(|m| band_energy_ratios(m, bin_hz)).collect();
    let band_mean = |i: usize| mean(bands.iter().map(|b| b[i]));

    let rms = frame_rms(&clip.samples, spec.frame_size, spec.hop);
    let rms_db: Vec<f64> = rms.iter().map(|r| to_db(r * r)).collect();
    let db_mean = mean(rms_db.iter().copied());
    let dynamic_complexity_db = mean(rms_db.iter().map(|d| (d - db_mean).abs()));

    let danceability = dfa_exponent(&rms)
        .map(|alpha| ((3.0 - alpha).max(0.0) / 3.0).min(1.0))
        .unwrap_or(0.0);

    let power = mean(clip.samples.iter().map(|x| x * x));

    let beats_loud = if tempo.beats.is_empty() {
        0.0
    } else {
        let near: Vec<f64> = (0..rms.len())
            .filter(|&t| {
                let ft = spec.frame_time(t);
                tempo.beats.iter().any(|b| (ft - b).abs() <= BEAT_WINDOW_S)
            })
            .map(|t| rms[t])
            .collect();
        mean(near)
    };

    let (chords_changes_rate, chords_number_rate) = match chords {
        Some(c) if duration > 0.0 => chord_rates(c, duration),
        _ => (0.0, 0.0),
    };

    SignalFeatures {
        danceability,
        loudness_db: to_db(power),
        chords_changes_rate,
        dynamic_complexity_db,
        zero_crossing_rate: zero_crossing_rate(&clip.samples, clip.sample_rate),
        chords_number_rate,
        pitch_salience: mean(frames.iter().map(|m| pitch_salience(m, bin_hz))),
        spectral_centroid: mean(frames.iter().map(|m| spectral_centroid(m, bin_hz))),
        spectral_complexity: mean(frames.iter().map(|m| spectral_complexity(m))),
        spectral_decrease: mean(frames.iter().map(|m| spectral_decrease(m))),
        energy_high: band_mean(3),
        energy_low: band_mean(0),
        energy_mid_high: band_mean(2),
        energy_mid_low: band_mean(1),
        spectral_entropy: mean(frames.iter().map(|m| spectral_entropy(m))),
        spectral_flux: mean(frames.windows(2).map(|w| spectral_flux(&w[0], &w[1]))),
        spectral_rolloff: mean(frames.iter().map(|m| spectral_rolloff(m, bin_hz))),
        spectral_spread: mean(frames.iter().map(|m| spectral_spread(m, bin_hz))),
        onset_rate: tempo.onset_rate,
        length_s: duration,
        bpm: tempo.bpm,
        beats_loud,
        vocal_instrumental: vocal.value(),
    }
}
