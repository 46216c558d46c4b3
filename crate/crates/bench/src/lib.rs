//! Shared fixtures for the pipeline benchmarks.

use tagscope_core::audio::{AudioClip, CANONICAL_RATE};
use tagscope_core::gbdt::{train_standardized, BoostedModel, Params};
use tagscope_core::harmony::{parse_lab, ChordEvent};
use tagscope_core::synth::{planted_benchmark, progression_lab, sine, white_noise};
use tagscope_core::LabelMatrix;

/// Ten seconds of a tone over low-level noise at the canonical rate.
pub fn mixed_clip() -> AudioClip {
    let tone = sine(440.0, 10.0, CANONICAL_RATE, 0.4);
    let noise = white_noise(10.0, CANONICAL_RATE, 0.05, 7);
    let samples = tone.samples.iter().zip(&noise.samples).map(|(a, b)| a + b).collect();
    AudioClip::new(samples, CANONICAL_RATE, "bench")
}

/// A sixteen-chord progression.
pub fn progression() -> Vec<ChordEvent> {
    let labels = ["C:maj", "A:min", "F:maj", "G:7"].repeat(4);
    parse_lab(&progression_lab(&labels, 1.0)).expect("generated lab parses")
}

/// Planted benchmark rows and labels.
pub fn planted(n_rows: usize) -> (Vec<Vec<f64>>, LabelMatrix, Vec<String>) {
    let b = planted_benchmark(n_rows, 4, 42);
    (b.x, b.labels, b.names)
}

pub fn small_params() -> Params {
    Params {
        n_trees: 20,
        ..Params::default()
    }
}

/// Model trained on the planted rows, with the rows prepared for it.
pub fn trained(n_rows: usize) -> (BoostedModel, Vec<Vec<f64>>) {
    let (x, labels, names) = planted(n_rows);
    let (model, _) = train_standardized(&x, &labels, &names, &small_params()).expect("training succeeds");
    let prepared = x.iter().map(|r| model.prepare(r).expect("matching width")).collect();
    (model, prepared)
}
