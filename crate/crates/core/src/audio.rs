//! Audio decoding: RIFF/WAVE and Sun AU containers into normalized mono clips.
//!
//! Every clip handed to the feature extractors goes through [`decode`], which
//! downmixes to mono by per-sample channel mean and resamples to the
//! requested rate with a 64-tap Kaiser-windowed sinc interpolator.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

/// Sample rate used by every feature extractor.
pub const CANONICAL_RATE: u32 = 22_050;

/// Number of taps of the resampling kernel.
pub const RESAMPLER_TAPS: usize = 64;
const KAISER_BETA: f64 = 8.6;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("invalid sample rate {0}")]
    InvalidRate(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Decoded mono PCM.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_path: String,
}

impl AudioClip {
    /// Builds a clip from raw samples, clamping them into `[-1, 1]` and
    /// replacing non-finite values with silence.
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_path: impl Into<String>) -> Self {
        let samples = samples
            .into_iter()
            .map(|s| if s.is_finite() { s.clamp(-1.0, 1.0) } else { 0.0 })
            .collect();
        Self {
            samples,
            sample_rate,
            source_path: source_path.into(),
        }
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SampleFormat {
    Int8Unsigned,
    Int8Signed,
    Int16,
    Int24,
    Int32,
    Float32,
    Float64,
}

impl SampleFormat {
    fn bytes(self) -> usize {
        match self {
            Self::Int8Unsigned | Self::Int8Signed => 1,
            Self::Int16 => 2,
            Self::Int24 => 3,
            Self::Int32 | Self::Float32 => 4,
            Self::Float64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

struct RawPcm<'a> {
    data: &'a [u8],
    format: SampleFormat,
    endian: Endian,
    channels: usize,
    sample_rate: u32,
}

/// Reads `path` and decodes it to a mono clip at `target_rate`.
pub fn decode(path: impl AsRef<Path>, target_rate: u32) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    decode_bytes(&bytes, target_rate, &path.display().to_string())
}

/// Decodes an in-memory WAV or AU file.
pub fn decode_bytes(bytes: &[u8], target_rate: u32, source_path: &str) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidRate(target_rate));
    }
    let raw = if bytes.len() >= 12 && &bytes[0..4] == b"RIFF" && &bytes[8..12] == b"WAVE" {
        parse_wav(bytes)?
    } else if bytes.len() >= 4 && &bytes[0..4] == b".snd" {
        parse_au(bytes)?
    } else {
        return Err(AudioError::UnsupportedFormat(
            "unrecognized magic bytes (expected RIFF/WAVE or .snd)".into(),
        ));
    };
    if raw.sample_rate == 0 {
        return Err(AudioError::CorruptHeader("sample rate is zero".into()));
    }
    if raw.channels == 0 {
        return Err(AudioError::CorruptHeader("channel count is zero".into()));
    }
    let mono = downmix(&raw);
    if mono.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    let samples = if raw.sample_rate == target_rate {
        mono
    } else {
        resample(&mono, raw.sample_rate, target_rate)
    };
    if samples.is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    Ok(AudioClip::new(samples, target_rate, source_path))
}

fn u16_le(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn u32_le(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

fn u32_be(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

fn parse_wav(bytes: &[u8]) -> Result<RawPcm<'_>, AudioError> {
    let riff_len = u32_le(&bytes[4..8]) as usize;
    if riff_len + 8 > bytes.len() {
        return Err(AudioError::CorruptHeader(format!(
            "RIFF chunk declares {} bytes but file holds {}",
            riff_len + 8,
            bytes.len()
        )));
    }
    let mut pos = 12;
    let mut fmt: Option<(SampleFormat, usize, u32)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_le(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                AudioError::CorruptHeader(format!(
                    "chunk {:?} declares {len} bytes past end of file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(AudioError::CorruptHeader("fmt chunk shorter than 16 bytes".into()));
                }
                let mut tag = u16_le(&body[0..2]);
                let channels = u16_le(&body[2..4]) as usize;
                let rate = u32_le(&body[4..8]);
                let bits = u16_le(&body[14..16]);
                if tag == 0xFFFE {
                    // WAVE_FORMAT_EXTENSIBLE: the real tag leads the subformat GUID.
                    if body.len() < 26 {
                        return Err(AudioError::CorruptHeader("extensible fmt chunk truncated".into()));
                    }
                    tag = u16_le(&body[24..26]);
                }
                let format = match (tag, bits) {
                    (1, 8) => SampleFormat::Int8Unsigned,
                    (1, 16) => SampleFormat::Int16,
                    (1, 24) => SampleFormat::Int24,
                    (1, 32) => SampleFormat::Int32,
                    (3, 32) => SampleFormat::Float32,
                    (3, 64) => SampleFormat::Float64,
                    _ => {
                        return Err(AudioError::UnsupportedFormat(format!(
                            "WAV codec tag {tag} with {bits} bits per sample"
                        )))
                    }
                };
                fmt = Some((format, channels, rate));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are padded to even length.
        pos = body_end + (len & 1);
    }
    let (format, channels, sample_rate) = fmt.ok_or_else(|| AudioError::CorruptHeader("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::CorruptHeader("missing data chunk".into()))?;
    Ok(RawPcm {
        data,
        format,
        endian: Endian::Little,
        channels,
        sample_rate,
    })
}

fn parse_au(bytes: &[u8]) -> Result<RawPcm<'_>, AudioError> {
    if bytes.len() < 24 {
        return Err(AudioError::CorruptHeader("AU header shorter than 24 bytes".into()));
    }
    let offset = u32_be(&bytes[4..8]) as usize;
    let size = u32_be(&bytes[8..12]);
    let encoding = u32_be(&bytes[12..16]);
    let sample_rate = u32_be(&bytes[16..20]);
    let channels = u32_be(&bytes[20..24]) as usize;
    if offset < 24 || offset > bytes.len() {
        return Err(AudioError::CorruptHeader(format!(
            "AU data offset {offset} out of range"
        )));
    }
    let format = match encoding {
        2 => SampleFormat::Int8Signed,
        3 => SampleFormat::Int16,
        4 => SampleFormat::Int24,
        5 => SampleFormat::Int32,
        6 => SampleFormat::Float32,
        7 => SampleFormat::Float64,
        other => return Err(AudioError::UnsupportedFormat(format!("AU encoding {other}"))),
    };
    let available = bytes.len() - offset;
    let data = if size == u32::MAX {
        &bytes[offset..]
    } else if size as usize > available {
        return Err(AudioError::CorruptHeader(format!(
            "AU header declares {size} data bytes but only {available} follow"
        )));
    } else {
        &bytes[offset..offset + size as usize]
    };
    Ok(RawPcm {
        data,
        format,
        endian: Endian::Big,
        channels,
        sample_rate,
    })
}

fn read_sample(b: &[u8], format: SampleFormat, endian: Endian) -> f64 {
    match (format, endian) {
        (SampleFormat::Int8Unsigned, _) => (b[0] as f64 - 128.0) / 128.0,
        (SampleFormat::Int8Signed, _) => b[0] as i8 as f64 / 128.0,
        (SampleFormat::Int16, Endian::Little) => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
        (SampleFormat::Int16, Endian::Big) => i16::from_be_bytes([b[0], b[1]]) as f64 / 32768.0,
        (SampleFormat::Int24, e) => {
            let (hi, mid, lo) = match e {
                Endian::Little => (b[2], b[1], b[0]),
                Endian::Big => (b[0], b[1], b[2]),
            };
            // Sign-extend through the top byte of an i32.
            let v = i32::from_be_bytes([hi, mid, lo, 0]) >> 8;
            v as f64 / 8_388_608.0
        }
        (SampleFormat::Int32, Endian::Little) => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
        (SampleFormat::Int32, Endian::Big) => i32::from_be_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
        (SampleFormat::Float32, Endian::Little) => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        (SampleFormat::Float32, Endian::Big) => f32::from_be_bytes([b[0], b[1], b[2], b[3]]) as f64,
        (SampleFormat::Float64, Endian::Little) => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        (SampleFormat::Float64, Endian::Big) => f64::from_be_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
    }
}

fn downmix(raw: &RawPcm<'_>) -> Vec<f64> {
    let frame_bytes = raw.format.bytes() * raw.channels;
    let n_frames = raw.data.len() / frame_bytes;
    let width = raw.format.bytes();
    (0..n_frames)
        .map(|i| {
            let frame = &raw.data[i * frame_bytes..(i + 1) * frame_bytes];
            let sum: f64 = frame
                .chunks_exact(width)
                .map(|s| {
                    let v = read_sample(s, raw.format, raw.endian);
                    if v.is_finite() {
                        v.clamp(-1.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .sum();
            sum / raw.channels as f64
        })
        .collect()
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser(offset: f64, half_width: f64) -> f64 {
    let r = offset / half_width;
    if r.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / bessel_i0(KAISER_BETA)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Windowed-sinc resampling with a [`RESAMPLER_TAPS`]-tap Kaiser kernel.
///
/// When downsampling, the kernel cutoff is lowered to the target Nyquist so
/// content above it is attenuated instead of aliased.
pub fn resample(samples: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if from_rate == to_rate || samples.is_empty() {
        return samples.to_vec();
    }
    let ratio = to_rate as f64 / from_rate as f64;
    let cutoff = ratio.min(1.0);
    let out_len = ((samples.len() as u128 * to_rate as u128) / from_rate as u128) as usize;
    let half = (RESAMPLER_TAPS / 2) as i64;
    // Widen the kernel in input samples when the cutoff drops so the tap
    // count stays fixed in output terms.
    let scale = 1.0 / cutoff;
    let half_width = half as f64 * scale;
    (0..out_len)
        .map(|n| {
            let t = n as f64 / ratio;
            let center = t.floor() as i64;
            let reach = half_width.ceil() as i64;
            let mut acc = 0.0;
            let mut norm = 0.0;
            for k in (center - reach + 1)..=(center + reach) {
                let d = t - k as f64;
                let w = cutoff * sinc(cutoff * d) * kaiser(d, half_width);
                norm += w;
                if k >= 0 && (k as usize) < samples.len() {
                    acc += samples[k as usize] * w;
                }
            }
            if norm.abs() > 1e-12 {
                acc / norm
            } else {
                0.0
            }
        })
        .collect()
}

/// Serializes a clip as 16-bit mono PCM WAV.
pub fn encode_wav16(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize16(s).to_le_bytes());
    }
    out
}

/// Serializes a clip as a Sun AU file with 16-bit big-endian PCM (encoding 3).
pub fn encode_au16(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(24 + data_len);
    out.extend_from_slice(b".snd");
    out.extend_from_slice(&24u32.to_be_bytes());
    out.extend_from_slice(&(data_len as u32).to_be_bytes());
    out.extend_from_slice(&3u32.to_be_bytes());
    out.extend_from_slice(&clip.sample_rate.to_be_bytes());
    out.extend_from_slice(&1u32.to_be_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize16(s).to_be_bytes());
    }
    out
}

fn quantize16(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav16(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_wav16(clip))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(channels: u16, rate: u32, bits: u16, tag: u16, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&tag.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        let block = channels * bits / 8;
        out.extend_from_slice(&(rate * block as u32).to_le_bytes());
        out.extend_from_slice(&block.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn silent_wav_decodes_to_zeros() {
        let bytes = wav_bytes(1, 22050, 16, 1, &vec![0u8; 22050 * 2]);
        let clip = decode_bytes(&bytes, 22050, "silence.wav").unwrap();
        assert_eq!(clip.sample_rate, 22050);
        assert_eq!(clip.len(), 22050);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn au_16bit_big_endian() {
        let clip = AudioClip::new(vec![0.5, -0.25, 0.0, -1.0], 22050, "x");
        let bytes = encode_au16(&clip);
        assert_eq!(&bytes[0..4], b".snd");
        let back = decode_bytes(&bytes, 22050, "x.au").unwrap();
        assert_eq!(back.sample_rate, 22050);
        assert_eq!(back.samples, vec![0.5, -0.25, 0.0, -1.0]);
    }

    #[test]
    fn stereo_downmix_is_channel_mean() {
        let mut data = Vec::new();
        for (l, r) in [(16384i16, 0i16), (-32768, 32767)] {
            data.extend_from_slice(&l.to_le_bytes());
            data.extend_from_slice(&r.to_le_bytes());
        }
        let clip = decode_bytes(&wav_bytes(2, 8000, 16, 1, &data), 8000, "s").unwrap();
        assert_eq!(clip.samples, vec![0.25, (-32768.0 + 32767.0) / 65536.0]);
    }

    #[test]
    fn pcm24_and_float32() {
        let mut d24 = Vec::new();
        for v in [4_194_304i32, -8_388_608] {
            d24.extend_from_slice(&v.to_le_bytes()[..3]);
        }
        let clip = decode_bytes(&wav_bytes(1, 8000, 24, 1, &d24), 8000, "a").unwrap();
        assert_eq!(clip.samples, vec![0.5, -1.0]);

        let mut df = Vec::new();
        for v in [0.75f32, 2.0] {
            df.extend_from_slice(&v.to_le_bytes());
        }
        let clip = decode_bytes(&wav_bytes(1, 8000, 32, 3, &df), 8000, "b").unwrap();
        assert_eq!(clip.samples, vec![0.75, 1.0]);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            decode_bytes(b"OggS0000000000000000", 22050, "x"),
            Err(AudioError::UnsupportedFormat(_))
        ));
        let mut truncated = wav_bytes(1, 8000, 16, 1, &[0u8; 100]);
        truncated.truncate(80);
        assert!(matches!(
            decode_bytes(&truncated, 8000, "x"),
            Err(AudioError::CorruptHeader(_))
        ));
        assert!(matches!(
            decode_bytes(&wav_bytes(1, 8000, 16, 1, &[]), 8000, "x"),
            Err(AudioError::EmptyAudio)
        ));
        assert!(matches!(
            decode_bytes(&wav_bytes(1, 8000, 12, 1, &[0u8; 8]), 8000, "x"),
            Err(AudioError::UnsupportedFormat(_))
        ));
        let mut au = encode_au16(&AudioClip::new(vec![0.0; 4], 8000, "x"));
        au[15] = 27; // A-law style encodings are not handled
        assert!(matches!(
            decode_bytes(&au, 8000, "x"),
            Err(AudioError::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn resampled_silence_stays_silent() {
        let out = resample(&vec![0.0; 44100], 44100, 22050);
        assert_eq!(out.len(), 22050);
        assert!(out.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn resample_preserves_dc() {
        let out = resample(&vec![0.5; 4000], 16000, 22050);
        // Away from the edges the normalized kernel reproduces a constant.
        for &s in &out[100..out.len() - 100] {
            assert!((s - 0.5).abs() < 1e-9, "{s}");
        }
    }
}
