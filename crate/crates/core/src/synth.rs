//! Seeded synthetic fixtures with known ground truth: test tones, click
//! tracks and noise; chord annotations with known functional structure; a
//! three-genre audio corpus; and a planted-signal tabular benchmark.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::{write_wav16, AudioClip, AudioError, CANONICAL_RATE};
use crate::midlevel::MIDLEVEL_FEATURE_NAMES;
use crate::tabular::{
    feature_groups, feature_names, write_label_tsv, write_store, FeatureGroup, FeatureVector, LabelMatrix,
    StoreManifest, TabularError, TaskKind, TrackRef, HARMONIC_DIM, MIDLEVEL_DIM,
};

pub const PLANTED_ROWS: usize = 2000;
pub const PLANTED_TAGS: usize = 8;
pub const GENRES: [&str; 3] = ["tonal", "rhythmic", "noisy"];
pub const CLIPS_PER_GENRE: usize = 20;
pub const CLIP_SECONDS: f64 = 5.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn n_samples(seconds: f64, sr: u32) -> usize {
    (seconds * sr as f64).round() as usize
}

pub fn sine(freq: f64, seconds: f64, sr: u32, amplitude: f64) -> AudioClip {
    let samples = (0..n_samples(seconds, sr))
        .map(|i| amplitude * (2.0 * PI * freq * i as f64 / sr as f64).sin())
        .collect();
    AudioClip::new(samples, sr, format!("sine_{freq}hz"))
}

/// Single-sample impulses at every beat, starting at `offset` seconds.
pub fn click_track(bpm: f64, seconds: f64, sr: u32, offset: f64) -> AudioClip {
    let mut samples = vec![0.0; n_samples(seconds, sr)];
    let period = 60.0 / bpm;
    let mut t = offset;
    while t < seconds {
        let i = (t * sr as f64).round() as usize;
        if i < samples.len() {
            samples[i] = 0.9;
        }
        t += period;
    }
    AudioClip::new(samples, sr, format!("click_{bpm}bpm"))
}

/// Gaussian white noise with standard deviation `sigma`.
pub fn white_noise(seconds: f64, sr: u32, sigma: f64, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let samples = (0..n_samples(seconds, sr)).map(|_| normal.sample(&mut rng)).collect();
    AudioClip::new(samples, sr, "white_noise")
}

pub fn silence(seconds: f64, sr: u32) -> AudioClip {
    AudioClip::new(vec![0.0; n_samples(seconds, sr)], sr, "silence")
}

/// A perfectly flat magnitude spectrum of `n_bins` bins.
pub fn flat_spectrum(n_bins: usize) -> Vec<f64> {
    vec![1.0; n_bins]
}

/// C - F - G7 - C, one second per chord.
pub fn cadence_lab() -> String {
    progression_lab(&["C:maj", "F:maj", "G:7", "C:maj"], 1.0)
}

pub fn progression_lab(labels: &[&str], seconds_per_chord: f64) -> String {
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            format!(
                "{:.6}\t{:.6}\t{l}\n",
                i as f64 * seconds_per_chord,
                (i + 1) as f64 * seconds_per_chord
            )
        })
        .collect()
}

const PROGRESSIONS: [&[&str]; 6] = [
    &["C:maj", "F:maj", "G:7", "C:maj"],
    &["A:min", "D:min", "E:7", "A:min"],
    &["G:maj", "C:maj", "D:maj", "G:maj", "E:min"],
    &["D:maj", "G:maj", "A:7", "D:maj", "B:min", "G:maj"],
    &["F:maj", "B:min7", "C:7", "F:maj"],
    &["E:min", "A:min", "B:7", "E:min", "C:maj"],
];

/// One informative tag of the planted benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTag {
    pub name: String,
    pub signal_columns: Vec<usize>,
    pub signal_weights: Vec<f64>,
    pub midlevel_column: usize,
    pub midlevel_weight: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub seed: u64,
    pub n_rows: usize,
    pub noise_std: f64,
    /// Per-column affine map applied to the latent standard normals.
    pub column_shift: Vec<f64>,
    pub column_scale: Vec<f64>,
    pub tags: Vec<PlantedTag>,
}

/// Multilabel tabular data in the canonical 62-column layout where only
/// signal columns (and, more weakly, mid-level columns) drive the tags.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedBenchmark {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub groups: Vec<FeatureGroup>,
    pub x: Vec<Vec<f64>>,
    pub labels: LabelMatrix,
    pub truth: PlantedTruth,
}

const PLANTED_NOISE: f64 = 0.2;
const PLANTED_PREVALENCE: f64 = 0.25;

/// Tag `k` is on when `sum_j w_kj tanh(2 z_j)` over three signal columns,
/// plus a weaker mid-level term and Gaussian noise, exceeds its empirical
/// 75th percentile. `z` are the latent standard normals; stored columns
/// are `shift + scale * z`.
pub fn planted_benchmark(n_rows: usize, n_tags: usize, seed: u64) -> PlantedBenchmark {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let d = HARMONIC_DIM + MIDLEVEL_DIM + crate::tabular::SIGNAL_DIM;
    let column_shift: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
    let column_scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..3.0)).collect();
    let z: Vec<Vec<f64>> = (0..n_rows)
        .map(|_| (0..d).map(|_| std_normal.sample(&mut rng)).collect())
        .collect();
    let signal_start = HARMONIC_DIM + MIDLEVEL_DIM;
    let mut tags = Vec::with_capacity(n_tags);
    let mut scores = Vec::with_capacity(n_tags);
    for k in 0..n_tags {
        let mut cols: Vec<usize> = (signal_start..d).collect();
        cols.shuffle(&mut rng);
        let mut signal_columns = cols[..3].to_vec();
        signal_columns.sort_unstable();
        let signal_weights: Vec<f64> = (0..3)
            .map(|_| {
                let w = rng.random_range(1.0..2.0);
                if rng.random::<bool>() {
                    w
                } else {
                    -w
                }
            })
            .collect();
        let midlevel_column = HARMONIC_DIM + rng.random_range(0..MIDLEVEL_DIM);
        let midlevel_weight = 0.4;
        let s: Vec<f64> = z
            .iter()
            .map(|row| {
                let sig: f64 = signal_columns
                    .iter()
                    .zip(&signal_weights)
                    .map(|(&c, w)| w * (2.0 * row[c]).tanh())
                    .sum();
                sig + midlevel_weight * (2.0 * row[midlevel_column]).tanh()
                    + PLANTED_NOISE * std_normal.sample(&mut rng)
            })
            .collect();
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        let q = ((1.0 - PLANTED_PREVALENCE) * n_rows as f64).floor() as usize;
        let threshold = sorted[q.min(n_rows.saturating_sub(1))];
        tags.push(PlantedTag {
            name: format!("tag_{k}"),
            signal_columns,
            signal_weights,
            midlevel_column,
            midlevel_weight,
            threshold,
        });
        scores.push(s);
    }
    let ids: Vec<String> = (0..n_rows).map(|i| format!("p{i:05}")).collect();
    let x = z
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, v)| column_shift[j] + column_scale[j] * v)
                .collect()
        })
        .collect();
    let indicators = (0..n_rows)
        .map(|r| (0..n_tags).map(|k| scores[k][r] >= tags[k].threshold).collect())
        .collect();
    let labels = LabelMatrix {
        track_ids: ids.clone(),
        tag_names: tags.iter().map(|t| t.name.clone()).collect(),
        indicators,
        task: TaskKind::Multilabel,
    };
    PlantedBenchmark {
        ids,
        names: feature_names().into_iter().map(String::from).collect(),
        groups: feature_groups(),
        x,
        labels,
        truth: PlantedTruth {
            seed,
            n_rows,
            noise_std: PLANTED_NOISE,
            column_shift,
            column_scale,
            tags,
        },
    }
}

/// Clip of one synthetic genre.
///
/// - tonal: three harmonics of a random fundamental in 150-600 Hz;
/// - rhythmic: a click track at a random tempo in 80-160 BPM;
/// - noisy: Gaussian white noise of random level.
pub fn genre_clip(genre: &str, seconds: f64, sr: u32, rng: &mut ChaCha8Rng) -> AudioClip {
    match genre {
        "tonal" => {
            let f0 = rng.random_range(150.0..600.0);
            let amp = rng.random_range(0.2..0.4);
            let samples = (0..n_samples(seconds, sr))
                .map(|i| {
                    let t = i as f64 / sr as f64;
                    amp * ((2.0 * PI * f0 * t).sin()
                        + 0.5 * (4.0 * PI * f0 * t).sin()
                        + 0.25 * (6.0 * PI * f0 * t).sin())
                        / 1.75
                })
                .collect();
            AudioClip::new(samples, sr, "tonal")
        }
        "rhythmic" => {
            let bpm = rng.random_range(80.0..160.0);
            let offset = rng.random_range(0.0..0.3);
            click_track(bpm, seconds, sr, offset)
        }
        _ => {
            let sigma = rng.random_range(0.05..0.25);
            white_noise(seconds, sr, sigma, rng.random())
        }
    }
}

/// Perceptual targets for a synthetic clip, defined per genre with jitter.
fn midlevel_targets(genre: &str, rng: &mut ChaCha8Rng) -> [f64; MIDLEVEL_DIM] {
    let base: [f64; MIDLEVEL_DIM] = match genre {
        "tonal" => [8.0, 2.0, 3.0, 2.0, 2.0, 8.0, 4.0],
        "rhythmic" => [2.0, 8.0, 8.0, 5.0, 3.0, 3.0, 5.0],
        _ => [1.0, 4.0, 1.0, 2.0, 8.0, 1.0, 5.0],
    };
    base.map(|b| b + rng.random_range(-0.5..0.5))
}

/// A fixture file with its expected descriptor values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub id: String,
    pub path: String,
    pub kind: String,
    pub truth: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub sample_rate: u32,
    pub fixtures: Vec<FixtureEntry>,
    pub genres: Vec<String>,
    pub genre_tracks: usize,
    /// Relative path to SHA-256 of every generated file.
    pub checksums: BTreeMap<String, String>,
}

fn write_text(root: &Path, rel: &str, text: &str, files: &mut Vec<String>) -> Result<(), SynthError> {
    let p = root.join(rel);
    if let Some(parent) = p.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(p, text)?;
    files.push(rel.to_string());
    Ok(())
}

fn write_clip(root: &Path, rel: &str, clip: &AudioClip, files: &mut Vec<String>) -> Result<(), SynthError> {
    let p = root.join(rel);
    if let Some(parent) = p.parent() {
        std::fs::create_dir_all(parent)?;
    }
    write_wav16(clip, p)?;
    files.push(rel.to_string());
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the full synthetic corpus under `out`:
///
/// - `fixtures/`: test tones, click tracks, noise, silence and a cadence;
/// - `genres/<genre>/`: the three-genre corpus, with `genres_chords.tsv`,
///   `chords/` and `midlevel_annotations.csv` alongside;
/// - `planted/`: feature store, labels and planted weights;
/// - `manifest.json`: fixture truth values and file checksums.
pub fn write_corpus(out: &Path, seed: u64) -> Result<CorpusManifest, SynthError> {
    std::fs::create_dir_all(out)?;
    let sr = CANONICAL_RATE;
    let mut files = Vec::new();
    let mut fixtures = Vec::new();
    let mut fixture = |id: &str, kind: &str, clip: &AudioClip, truth: &[(&str, f64)], files: &mut Vec<String>| {
        let rel = format!("fixtures/{id}.wav");
        write_clip(out, &rel, clip, files)?;
        fixtures.push(FixtureEntry {
            id: id.to_string(),
            path: rel,
            kind: kind.to_string(),
            truth: truth.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        });
        Ok::<(), SynthError>(())
    };
    fixture(
        "sine_100hz",
        "sine",
        &sine(100.0, 5.0, sr, 0.5),
        &[("frequency_hz", 100.0), ("zero_crossing_rate", 200.0)],
        &mut files,
    )?;
    fixture(
        "sine_1000hz",
        "sine",
        &sine(1000.0, 5.0, sr, 0.5),
        &[
            ("frequency_hz", 1000.0),
            ("spectral_centroid", 1000.0),
            ("zero_crossing_rate", 2000.0),
        ],
        &mut files,
    )?;
    for bpm in [90.0, 120.0] {
        fixture(
            &format!("click_{bpm}bpm"),
            "click",
            &click_track(bpm, 12.0, sr, 0.25),
            &[("bpm", bpm)],
            &mut files,
        )?;
    }
    fixture(
        "white_noise",
        "noise",
        &white_noise(5.0, sr, 0.2, seed),
        &[("spectral_rolloff", 0.85 * sr as f64 / 2.0)],
        &mut files,
    )?;
    fixture(
        "silence",
        "silence",
        &silence(5.0, sr),
        &[("loudness_db", -120.0)],
        &mut files,
    )?;
    write_text(out, "fixtures/cadence_c_major.lab", &cadence_lab(), &mut files)?;
    fixtures.push(FixtureEntry {
        id: "cadence_c_major".into(),
        path: "fixtures/cadence_c_major.lab".into(),
        kind: "chords".into(),
        truth: [("dominants_ratio", 0.25), ("subdominants_ratio", 0.25)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect(),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chords_manifest = String::from("track_id\tlab\tkey\tvocal\n");
    let mut annotations = format!("clip_id,{}\n", MIDLEVEL_FEATURE_NAMES.join(","));
    for genre in GENRES {
        for i in 0..CLIPS_PER_GENRE {
            let id = format!("{genre}_{i:02}");
            let clip = genre_clip(genre, CLIP_SECONDS, sr, &mut rng);
            write_clip(out, &format!("genres/{genre}/{id}.wav"), &clip, &mut files)?;
            let prog = PROGRESSIONS[rng.random_range(0..PROGRESSIONS.len())];
            let lab = progression_lab(prog, CLIP_SECONDS / prog.len() as f64);
            write_text(out, &format!("chords/{id}.lab"), &lab, &mut files)?;
            chords_manifest.push_str(&format!("{id}\tchords/{id}.lab\t-\tinstrumental\n"));
            let t = midlevel_targets(genre, &mut rng);
            annotations.push_str(&id);
            for v in t {
                annotations.push_str(&format!(",{v}"));
            }
            annotations.push('\n');
        }
    }
    write_text(out, "genres_chords.tsv", &chords_manifest, &mut files)?;
    write_text(out, "midlevel_annotations.csv", &annotations, &mut files)?;

    let bench = planted_benchmark(PLANTED_ROWS, PLANTED_TAGS, seed);
    write_planted(out, &bench, &mut files)?;

    let mut checksums = BTreeMap::new();
    for f in &files {
        checksums.insert(f.clone(), sha256_hex(&std::fs::read(out.join(f))?));
    }
    let manifest = CorpusManifest {
        seed,
        sample_rate: sr,
        fixtures,
        genres: GENRES.iter().map(|g| g.to_string()).collect(),
        genre_tracks: GENRES.len() * CLIPS_PER_GENRE,
        checksums,
    };
    std::fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

/// Paths of the planted benchmark files under a corpus root.
pub struct PlantedPaths {
    pub store: PathBuf,
    pub labels: PathBuf,
    pub truth: PathBuf,
}

pub fn planted_paths(root: &Path) -> PlantedPaths {
    PlantedPaths {
        store: root.join("planted/features.csv"),
        labels: root.join("planted/labels.tsv"),
        truth: root.join("planted/truth.json"),
    }
}

fn write_planted(out: &Path, bench: &PlantedBenchmark, files: &mut Vec<String>) -> Result<(), SynthError> {
    std::fs::create_dir_all(out.join("planted"))?;
    let paths = planted_paths(out);
    let rows: Vec<FeatureVector> = bench
        .ids
        .iter()
        .zip(&bench.x)
        .map(|(id, v)| FeatureVector {
            track_id: id.clone(),
            values: v.clone(),
        })
        .collect();
    write_store(&paths.store, &bench.names, &rows)?;
    StoreManifest::canonical(rows.len(), format!("synth-planted-seed-{}", bench.truth.seed))
        .save(crate::tabular::manifest_path_for(&paths.store))?;
    let tracks: Vec<TrackRef> = bench
        .ids
        .iter()
        .map(|id| TrackRef {
            id: id.clone(),
            path: PathBuf::from("-"),
        })
        .collect();
    write_label_tsv(&paths.labels, &tracks, &bench.labels)?;
    std::fs::write(&paths.truth, serde_json::to_string_pretty(&bench.truth)? + "\n")?;
    files.extend(
        [
            "planted/features.csv",
            "planted/features.json",
            "planted/labels.tsv",
            "planted/truth.json",
        ]
        .map(String::from),
    );
    Ok(())
}
