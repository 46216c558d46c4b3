//! The `tagscope` command line: extract, train, evaluate, explain, ablate
//! and synth, plus helpers for mid-level model fitting and listing features.

mod svg;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use tagscope_core::audio::{decode, CANONICAL_RATE};
use tagscope_core::explain::{
    ablation, gain_importance, permutation_importance, shap_summary, shap_values, weight_importance, ExplainError,
    PermutationMetric, ShapExplanation, DEFAULT_SHAP_INSTANCES,
};
use tagscope_core::gbdt::{evaluate, train_standardized, BoostedModel, GbdtError, Params};
use tagscope_core::harmony::{read_lab, LabError};
use tagscope_core::midlevel::{train_from_files, MidLevelModel, DEFAULT_RIDGE_LAMBDA};
use tagscope_core::signal::{FRAME_SIZE, HOP_SIZE, MFCC_COEFFS, MFCC_MEL_BANDS};
use tagscope_core::synth::write_corpus;
use tagscope_core::tabular::{
    extract_clip, feature_groups, feature_names, load_gtzan, load_label_tsv, manifest_path_for, read_chord_manifest,
    read_store, split, write_label_tsv, write_store, ChordManifestEntry, FeatureGroup, FeatureVector, LabelMatrix,
    SplitSpec, StoreManifest, TaskKind, TrackRef, DEFAULT_FRACTIONS,
};
use tagscope_core::VocalFlag;

pub use svg::{bar_order, emit_bar_svg, MAX_BARS};

/// Exit status for bad arguments or missing inputs.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for unreadable, inconsistent or insufficient data.
pub const EXIT_DATA: u8 = 3;
/// Exit status for non-finite training arithmetic.
pub const EXIT_NUMERIC: u8 = 4;

const AUDIO_EXTENSIONS: [&str; 3] = ["wav", "au", "snd"];

/// An error caused by the invocation rather than the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Maps an error to the documented exit status.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        let gbdt = cause
            .downcast_ref::<GbdtError>()
            .or(match cause.downcast_ref::<ExplainError>() {
                Some(ExplainError::Gbdt(g)) => Some(g),
                _ => None,
            });
        match gbdt {
            Some(GbdtError::NumericFailure(_)) => return EXIT_NUMERIC,
            Some(GbdtError::InvalidParams(_)) => return EXIT_USAGE,
            _ => {}
        }
    }
    EXIT_DATA
}

#[derive(Debug, Parser)]
#[command(name = "tagscope", version, about = "Interpretable music tagging with boosted trees")]
pub struct Cli {
    /// Seed for every random choice (splits, subsampling, shuffles).
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, env = "TAGSCOPE_JOBS", default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode audio and write the 62-column feature store.
    Extract(ExtractArgs),
    /// Fit the ridge model that predicts mid-level features from MFCCs.
    Midlevel(MidlevelArgs),
    /// Train a boosted tagger on a feature store.
    Train(TrainArgs),
    /// Score a model on one part of a split.
    Evaluate(EvaluateArgs),
    /// Feature importances and Shapley attributions.
    Explain(ExplainArgs),
    /// Retrain on every combination of feature groups.
    Ablate(AblateArgs),
    /// Write the seeded synthetic corpus.
    Synth(SynthArgs),
    /// Print the canonical feature names and their groups.
    Features,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory searched recursively for .wav, .au and .snd files.
    #[arg(long)]
    pub audio_dir: PathBuf,
    /// Tab-separated `track_id lab_path [key] [vocal]` manifest.
    #[arg(long)]
    pub chords: Option<PathBuf>,
    /// Mid-level model JSON; without it the mid-level block is zero.
    #[arg(long)]
    pub midlevel_model: Option<PathBuf>,
    /// Output CSV; the manifest goes next to it with a .json extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write genre labels taken from the first-level subdirectories.
    #[arg(long)]
    pub genre_labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MidlevelArgs {
    /// CSV with a `clip_id` column and the seven target columns.
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub audio_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RIDGE_LAMBDA)]
    pub lambda: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Multilabel,
    Multiclass,
}

impl From<Task> for TaskKind {
    fn from(t: Task) -> Self {
        match t {
            Task::Multilabel => TaskKind::Multilabel,
            Task::Multiclass => TaskKind::Multiclass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Group {
    Harmonic,
    Midlevel,
    Signal,
}

impl From<Group> for FeatureGroup {
    fn from(g: Group) -> Self {
        match g {
            Group::Harmonic => FeatureGroup::Harmonic,
            Group::Midlevel => FeatureGroup::Midlevel,
            Group::Signal => FeatureGroup::Signal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Part {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Feature store CSV.
    #[arg(long)]
    pub store: PathBuf,
    /// Label TSV (`track_id path tag...` or the Jamendo layout).
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum, default_value_t = Task::Multilabel)]
    pub task: Task,
}

#[derive(Debug, Args)]
pub struct HyperArgs {
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// L2 penalty on leaf weights.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Minimum gain for a split.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub min_child_weight: Option<f64>,
    #[arg(long)]
    pub subsample: Option<f64>,
    #[arg(long)]
    pub colsample: Option<f64>,
}

impl HyperArgs {
    pub fn params(&self, seed: u64) -> Params {
        let d = Params::default();
        Params {
            n_trees: self.n_trees.unwrap_or(d.n_trees),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            lambda: self.lambda.unwrap_or(d.lambda),
            gamma: self.gamma.unwrap_or(d.gamma),
            min_child_weight: self.min_child_weight.unwrap_or(d.min_child_weight),
            subsample: self.subsample.unwrap_or(d.subsample),
            colsample: self.colsample.unwrap_or(d.colsample),
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Reuse this split instead of computing one from the seed.
    #[arg(long)]
    pub split_in: Option<PathBuf>,
    /// Write the split used for training.
    #[arg(long)]
    pub split_out: Option<PathBuf>,
    /// Restrict training to these feature groups.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub groups: Vec<Group>,
    /// Output model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Per-round training loss and validation metrics.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Split file; without it every labelled row is scored.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Part::Test)]
    pub part: Part,
    /// Metrics JSON; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Weight,
    Gain,
    Permutation,
    Shap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    MacroAuc,
    Accuracy,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Feature store; needed by permutation and shap.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Labels; needed by permutation.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Task::Multilabel)]
    pub task: Task,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Part::Test)]
    pub part: Part,
    /// Restrict to one label; shap with --track defaults to the first.
    #[arg(long)]
    pub label: Option<String>,
    /// Explain a single track with Shapley values.
    #[arg(long)]
    pub track: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, value_enum)]
    pub metric: Option<Metric>,
    #[arg(long, default_value_t = DEFAULT_SHAP_INSTANCES)]
    pub max_instances: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses nothing; runs an already parsed command inside a pool of
/// `cli.jobs` threads.
pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .context("building worker pool")?;
    let seed = cli.seed;
    pool.install(|| match cli.command {
        Command::Extract(a) => cmd_extract(&a),
        Command::Midlevel(a) => cmd_midlevel(&a),
        Command::Train(a) => cmd_train(&a, seed),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Explain(a) => cmd_explain(&a, seed),
        Command::Ablate(a) => cmd_ablate(&a, seed),
        Command::Synth(a) => cmd_synth(&a, seed),
        Command::Features => cmd_features(),
    })
}

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn find_audio(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_audio(&p, out)?;
        } else if p
            .extension()
            .and_then(|x| x.to_str())
            .is_some_and(|x| AUDIO_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
        {
            out.push(p);
        }
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of everything besides the audio that shapes extracted values.
fn extraction_hash(midlevel: Option<&[u8]>) -> String {
    let mut h = Sha256::new();
    h.update(format!(
        "rate={CANONICAL_RATE};frame={FRAME_SIZE};hop={HOP_SIZE};mfcc={MFCC_COEFFS}x{MFCC_MEL_BANDS};"
    ));
    h.update(match midlevel {
        Some(bytes) => sha256_hex(bytes),
        None => "no-midlevel".into(),
    });
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

struct TrackResult {
    id: String,
    outcome: Result<(FeatureVector, bool)>,
}

fn extract_one(
    path: &Path,
    id: &str,
    entry: Option<&ChordManifestEntry>,
    midlevel: Option<&MidLevelModel>,
) -> Result<(FeatureVector, bool)> {
    let clip = decode(path, CANONICAL_RATE)?;
    let chords = match entry.and_then(|e| e.lab_path.as_ref()) {
        Some(lab) => match read_lab(lab) {
            Ok(events) => Some(events),
            Err(LabError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
                log::warn!("{id}: chord file {} not found, harmonic block zeroed", lab.display());
                None
            }
            Err(e) => return Err(anyhow!(e).context(format!("chord file {}", lab.display()))),
        },
        None => None,
    };
    let key = entry.and_then(|e| e.key);
    let vocal = entry.map_or(VocalFlag::Unknown, |e| e.vocal);
    let ex = extract_clip(&clip, id, chords.as_deref(), key, vocal, midlevel)?;
    Ok((ex.vector, ex.missing_chords))
}

fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    require(&a.audio_dir, "audio directory")?;
    if let Some(p) = &a.chords {
        require(p, "chords manifest")?;
    }
    if let Some(p) = &a.midlevel_model {
        require(p, "mid-level model")?;
    }
    let chords = match &a.chords {
        Some(p) => read_chord_manifest(p)?,
        None => BTreeMap::new(),
    };
    let (midlevel, midlevel_bytes) = match &a.midlevel_model {
        Some(p) => {
            let bytes = std::fs::read(p)?;
            (Some(MidLevelModel::load(p)?), Some(bytes))
        }
        None => (None, None),
    };
    let mut files = Vec::new();
    find_audio(&a.audio_dir, &mut files)?;
    let mut seen = HashSet::new();
    let mut tracks = Vec::with_capacity(files.len());
    for f in files {
        let id = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        if !seen.insert(id.clone()) {
            bail!("track id {id:?} appears more than once under {}", a.audio_dir.display());
        }
        tracks.push((id, f));
    }
    tracks.sort();
    log::info!("extracting {} tracks", tracks.len());
    let results: Vec<TrackResult> = tracks
        .par_iter()
        .map(|(id, path)| TrackResult {
            id: id.clone(),
            outcome: extract_one(path, id, chords.get(id), midlevel.as_ref()),
        })
        .collect();
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let mut skipped = 0usize;
    for r in results {
        match r.outcome {
            Ok((v, miss)) => {
                if miss {
                    missing.push(r.id);
                }
                rows.push(v);
            }
            Err(e) => {
                skipped += 1;
                log::warn!("skipping {}: {e:#}", r.id);
            }
        }
    }
    if rows.is_empty() {
        bail!("no track could be extracted ({skipped} skipped)");
    }
    write_store(&a.out, &feature_names(), &rows)?;
    let mut manifest = StoreManifest::canonical(rows.len(), extraction_hash(midlevel_bytes.as_deref()));
    manifest.missing_chords = missing;
    manifest.save(manifest_path_for(&a.out))?;
    if let Some(labels_out) = &a.genre_labels {
        let (all_tracks, labels) = load_gtzan(&a.audio_dir)?;
        let kept: HashSet<&str> = rows.iter().map(|r| r.track_id.as_str()).collect();
        let tracks: Vec<TrackRef> = all_tracks
            .into_iter()
            .filter(|t| kept.contains(t.id.as_str()))
            .map(|t| TrackRef {
                path: t
                    .path
                    .strip_prefix(&a.audio_dir)
                    .map(Path::to_path_buf)
                    .unwrap_or(t.path),
                id: t.id,
            })
            .collect();
        let ids: Vec<String> = tracks.iter().map(|t| t.id.clone()).collect();
        write_label_tsv(labels_out, &tracks, &labels.select(&ids)?)?;
    }
    println!(
        "extracted {} tracks, skipped {skipped}, missing chords {} -> {}",
        rows.len(),
        manifest.missing_chords.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_midlevel(a: &MidlevelArgs) -> Result<()> {
    require(&a.annotations, "annotation file")?;
    require(&a.audio_dir, "audio directory")?;
    if !(a.lambda >= 0.0 && a.lambda.is_finite()) {
        return Err(usage(format!("--lambda must be a finite value >= 0, got {}", a.lambda)));
    }
    let (model, report) = train_from_files(&a.annotations, &a.audio_dir, a.lambda)?;
    model.save(&a.out)?;
    println!(
        "mid-level model from {} clips, lambda {}, train mse {:.6} (baseline {:.6}) -> {}",
        report.rows,
        report.effective_lambda,
        report.train_mse,
        report.baseline_mse,
        a.out.display()
    );
    Ok(())
}

/// Store rows that carry labels, aligned with those labels.
struct Dataset {
    ids: Vec<String>,
    x: Vec<Vec<f64>>,
    names: Vec<String>,
    groups: Vec<FeatureGroup>,
    labels: LabelMatrix,
}

impl Dataset {
    fn rows_for(&self, ids: &[String]) -> Result<Vec<Vec<f64>>> {
        let index: BTreeMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        ids.iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|&i| self.x[i].clone())
                    .ok_or_else(|| anyhow!("track {id:?} is not in the labelled store"))
            })
            .collect()
    }
}

/// Column groups from the store's manifest, or the canonical layout when the
/// manifest is absent and the columns match it.
fn store_groups(store: &Path, names: &[String]) -> Result<Vec<FeatureGroup>> {
    let mpath = manifest_path_for(store);
    if mpath.exists() {
        let m = StoreManifest::load(&mpath)?;
        if m.feature_names != names {
            bail!("manifest {} does not match the store columns", mpath.display());
        }
        return Ok(m.groups);
    }
    let canonical = feature_names();
    if names.len() == canonical.len() && names.iter().zip(&canonical).all(|(a, b)| a == b) {
        return Ok(feature_groups());
    }
    bail!("store {} has no manifest and non-canonical columns", store.display())
}

fn load_dataset(d: &DataArgs) -> Result<Dataset> {
    require(&d.store, "feature store")?;
    require(&d.labels, "label file")?;
    let store = read_store(&d.store)?;
    let groups = store_groups(&d.store, &store.names)?;
    let (_, labels) = load_label_tsv(&d.labels, d.task.into())?;
    let mut ids = Vec::new();
    let mut x = Vec::new();
    for r in &store.rows {
        if labels.contains(&r.track_id) {
            ids.push(r.track_id.clone());
            x.push(r.values.clone());
        }
    }
    let dropped = store.rows.len() - ids.len();
    if dropped > 0 {
        log::warn!("{dropped} store rows have no labels and are ignored");
    }
    if ids.is_empty() {
        bail!("no store row has labels");
    }
    let labels = labels.select(&ids)?;
    Ok(Dataset {
        ids,
        x,
        names: store.names,
        groups,
        labels,
    })
}

fn load_split(path: Option<&PathBuf>, data: &Dataset, seed: u64) -> Result<SplitSpec> {
    let s = match path {
        Some(p) => {
            require(p, "split file")?;
            SplitSpec::load(p)?
        }
        None => split(&data.ids, &data.labels, DEFAULT_FRACTIONS, seed)?,
    };
    if !s.covers(&data.ids) {
        bail!("split does not partition the labelled store rows");
    }
    Ok(s)
}

fn part_ids(s: Option<&SplitSpec>, part: Part, all: &[String]) -> Vec<String> {
    match (s, part) {
        (None, _) | (_, Part::All) => all.to_vec(),
        (Some(s), Part::Train) => s.train.clone(),
        (Some(s), Part::Validation) => s.validation.clone(),
        (Some(s), Part::Test) => s.test.clone(),
    }
}

fn prepare_rows(model: &BoostedModel, names: &[String], rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let cols: Vec<usize> = model
        .feature_names
        .iter()
        .map(|f| {
            names
                .iter()
                .position(|n| n == f)
                .ok_or_else(|| anyhow!("store lacks model feature {f:?}"))
        })
        .collect::<Result<_>>()?;
    rows.iter()
        .map(|r| {
            let picked: Vec<f64> = cols.iter().map(|&c| r[c]).collect();
            Ok(model.prepare(&picked)?)
        })
        .collect()
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    params: &'a Params,
    n_features: usize,
    n_train: usize,
    n_validation: usize,
    final_loss: Vec<f64>,
    degenerate_labels: &'a [String],
    validation: Option<tagscope_core::Metrics>,
    loss_history: &'a [Vec<f64>],
}

fn cmd_train(a: &TrainArgs, seed: u64) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let s = load_split(a.split_in.as_ref(), &data, seed)?;
    if let Some(p) = &a.split_out {
        s.save(p)?;
    }
    let params = a.hyper.params(seed);
    let columns: Vec<usize> = if a.groups.is_empty() {
        (0..data.names.len()).collect()
    } else {
        let wanted: Vec<FeatureGroup> = a.groups.iter().map(|&g| g.into()).collect();
        (0..data.groups.len())
            .filter(|&j| wanted.contains(&data.groups[j]))
            .collect()
    };
    if columns.is_empty() {
        return Err(usage("the selected groups contain no columns"));
    }
    let names: Vec<String> = columns.iter().map(|&c| data.names[c].clone()).collect();
    let project = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter()
            .map(|r| columns.iter().map(|&c| r[c]).collect())
            .collect()
    };
    let x_train = project(data.rows_for(&s.train)?);
    let y_train = data.labels.select(&s.train)?;
    let (model, report) = train_standardized(&x_train, &y_train, &names, &params)?;
    model.save(&a.model)?;
    let validation = if s.validation.is_empty() {
        None
    } else {
        let xv = prepare_rows(&model, &names, &project(data.rows_for(&s.validation)?))?;
        match evaluate(&model, &xv, &data.labels.select(&s.validation)?) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("validation metrics unavailable: {e}");
                None
            }
        }
    };
    let headline = validation.as_ref().and_then(|m| m.headline());
    if let Some(p) = &a.report {
        write_json(
            p,
            &TrainSummary {
                params: &params,
                n_features: names.len(),
                n_train: s.train.len(),
                n_validation: s.validation.len(),
                final_loss: report
                    .loss_history
                    .iter()
                    .map(|h| *h.last().unwrap_or(&f64::NAN))
                    .collect(),
                degenerate_labels: &report.degenerate_labels,
                validation,
                loss_history: &report.loss_history,
            },
        )?;
    }
    println!(
        "trained {} labels x {} trees on {} rows, {} features; validation {} -> {}",
        model.n_labels(),
        params.n_trees,
        s.train.len(),
        names.len(),
        headline.map_or("n/a".to_string(), |v| format!("{v:.4}")),
        a.model.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput {
    part: &'static str,
    #[serde(flatten)]
    metrics: tagscope_core::Metrics,
}

fn part_name(p: Part) -> &'static str {
    match p {
        Part::Train => "train",
        Part::Validation => "validation",
        Part::Test => "test",
        Part::All => "all",
    }
}

fn load_model(path: &Path) -> Result<BoostedModel> {
    require(path, "model")?;
    Ok(BoostedModel::load(path)?)
}

fn load_split_file(path: Option<&PathBuf>) -> Result<Option<SplitSpec>> {
    path.map(|p| {
        require(p, "split file")?;
        Ok(SplitSpec::load(p)?)
    })
    .transpose()
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = load_dataset(&a.data)?;
    let s = load_split_file(a.split.as_ref())?;
    let ids = part_ids(s.as_ref(), a.part, &data.ids);
    if ids.is_empty() {
        bail!("the {} part is empty", part_name(a.part));
    }
    let x = prepare_rows(&model, &data.names, &data.rows_for(&ids)?)?;
    let metrics = evaluate(&model, &x, &data.labels.select(&ids)?)?;
    let headline = metrics.headline();
    let out = EvalOutput {
        part: part_name(a.part),
        metrics,
    };
    match &a.out {
        Some(p) => {
            write_json(p, &out)?;
            println!(
                "{} rows of {}: {} -> {}",
                ids.len(),
                out.part,
                headline.map_or("n/a".to_string(), |v| format!("{v:.4}")),
                p.display()
            );
        }
        None => println!("{}", serde_json::to_string_pretty(&out)?),
    }
    Ok(())
}

#[derive(Serialize)]
struct TrackExplanation {
    track_id: String,
    #[serde(flatten)]
    explanation: ShapExplanation,
}

fn cmd_explain(a: &ExplainArgs, seed: u64) -> Result<()> {
    let model = load_model(&a.model)?;
    let label = a.label.as_deref();
    if a.track.is_some() && a.method != Method::Shap {
        return Err(usage("--track only applies to --method shap"));
    }
    let store_path = || -> Result<&PathBuf> {
        let p = a
            .store
            .as_ref()
            .ok_or_else(|| usage("--store is required for this method"))?;
        require(p, "feature store")?;
        Ok(p)
    };
    let (scores, title) = match a.method {
        Method::Weight | Method::Gain => {
            let report = if a.method == Method::Weight {
                weight_importance(&model, label)?
            } else {
                gain_importance(&model, label)?
            };
            write_json(&a.out, &report)?;
            (
                report.named_scores(),
                format!("{:?} importance", a.method).to_lowercase(),
            )
        }
        Method::Permutation => {
            if let Some(l) = label {
                return Err(usage(format!(
                    "permutation importance scores the whole model; drop --label {l:?}"
                )));
            }
            let labels = a
                .labels
                .clone()
                .ok_or_else(|| usage("--labels is required for permutation importance"))?;
            let data = load_dataset(&DataArgs {
                store: store_path()?.clone(),
                labels,
                task: a.task,
            })?;
            let s = load_split_file(a.split.as_ref())?;
            let ids = part_ids(s.as_ref(), a.part, &data.ids);
            let x = prepare_rows(&model, &data.names, &data.rows_for(&ids)?)?;
            let mut y = data.labels.select(&ids)?;
            y.task = model.task;
            let metric = match a.metric {
                Some(Metric::MacroAuc) => PermutationMetric::MacroAuc,
                Some(Metric::Accuracy) => PermutationMetric::Accuracy,
                None => PermutationMetric::default_for(model.task),
            };
            let report = permutation_importance(&model, &x, &y, metric, a.repeats, seed)?;
            write_json(&a.out, &report)?;
            (
                report.named_scores(),
                format!("permutation importance ({})", metric.as_str()),
            )
        }
        Method::Shap => {
            let store = read_store(store_path()?)?;
            match &a.track {
                Some(track) => {
                    let pos = store
                        .position(track)
                        .ok_or_else(|| usage(format!("track {track:?} is not in the store")))?;
                    let x = prepare_rows(&model, &store.names, std::slice::from_ref(&store.rows[pos].values))?;
                    let name = match label {
                        Some(l) => l.to_string(),
                        None => model
                            .label_names
                            .first()
                            .cloned()
                            .ok_or_else(|| anyhow!("model has no labels"))?,
                    };
                    let e = shap_values(&model, &x[0], &name)?;
                    let scores = e.feature_names.iter().cloned().zip(e.phi.iter().copied()).collect();
                    write_json(
                        &a.out,
                        &TrackExplanation {
                            track_id: track.clone(),
                            explanation: e,
                        },
                    )?;
                    (scores, format!("shap values: {track} ({name})"))
                }
                None => {
                    let s = load_split_file(a.split.as_ref())?;
                    let all = store.ids();
                    let ids = part_ids(s.as_ref(), a.part, &all);
                    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
                    let rows: Vec<Vec<f64>> = store
                        .rows
                        .iter()
                        .filter(|r| wanted.contains(r.track_id.as_str()))
                        .map(|r| r.values.clone())
                        .collect();
                    let x = prepare_rows(&model, &store.names, &rows)?;
                    let report = shap_summary(&model, &x, label, a.max_instances, seed)?;
                    write_json(&a.out, &report)?;
                    (report.named_scores(), "mean |shap value|".to_string())
                }
            }
        }
    };
    if let Some(p) = &a.svg {
        write_text(p, &emit_bar_svg(&scores, &title))?;
    }
    println!("{} -> {}", title, a.out.display());
    Ok(())
}

fn cmd_ablate(a: &AblateArgs, seed: u64) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let s = load_split(a.split.as_ref(), &data, seed)?;
    let params = a.hyper.params(seed);
    let report = ablation(&data.x, &data.ids, &data.labels, &data.groups, &data.names, &s, &params)?;
    write_json(&a.out, &report)?;
    if let Some(p) = &a.svg {
        let scores: Vec<(String, f64)> = report
            .rows
            .iter()
            .map(|r| (r.name.clone(), r.metric.unwrap_or(0.0)))
            .collect();
        write_text(p, &emit_bar_svg(&scores, &format!("ablation ({})", report.metric)))?;
    }
    for r in &report.rows {
        match (r.metric, &r.error) {
            (Some(m), _) => println!("{:<26} {:>3} features  {} {m:.4}", r.name, r.n_features, report.metric),
            (None, Some(e)) => println!("{:<26} {:>3} features  failed: {e}", r.name, r.n_features),
            (None, None) => println!("{:<26} {:>3} features  n/a", r.name, r.n_features),
        }
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let manifest = write_corpus(&a.out, seed).with_context(|| format!("writing corpus to {}", a.out.display()))?;
    println!(
        "wrote {} files ({} fixtures, {} genre clips) -> {}",
        manifest.checksums.len() + 1,
        manifest.fixtures.len(),
        manifest.genre_tracks,
        a.out.display()
    );
    Ok(())
}

fn cmd_features() -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    for (name, group) in feature_names().into_iter().zip(feature_groups()) {
        match writeln!(out, "{name}\t{group}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            r => r?,
        }
    }
    Ok(())
}
