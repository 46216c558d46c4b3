//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without network access on generated data.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tagscope_core::audio::{decode, AudioClip, CANONICAL_RATE};
use tagscope_core::explain::{ablation, permutation_importance, shap_values, weight_importance, PermutationMetric};
use tagscope_core::gbdt::{
    evaluate, metrics_from_margins, multiclass_summary, roc_auc, train, train_standardized, BoostedModel, Node, Params,
    Tree,
};
use tagscope_core::harmony::{analyze_chords, read_lab, ChordEvent, KeyEstimate};
use tagscope_core::signal::{estimate_tempo, mfcc, signal_descriptors, spectral_decrease, FRAME_SIZE};
use tagscope_core::synth::{flat_spectrum, planted_paths, write_corpus, CorpusManifest};
use tagscope_core::tabular::{
    load_label_tsv, manifest_path_for, read_store, split, FeatureGroup, LabelMatrix, StandardScaler, StoreManifest,
    TaskKind, DEFAULT_FRACTIONS,
};
use tagscope_core::VocalFlag;

const SEED: u64 = 42;
const SUITE_BUDGET: Duration = Duration::from_secs(300);

/// Artefacts shared between criteria.
struct Context {
    root: PathBuf,
    manifest: CorpusManifest,
    planted: Option<Planted>,
    genre: Option<(BoostedModel, Vec<Vec<f64>>)>,
}

struct Planted {
    ids: Vec<String>,
    names: Vec<String>,
    groups: Vec<FeatureGroup>,
    x: Vec<Vec<f64>>,
    labels: LabelMatrix,
    split: tagscope_core::SplitSpec,
    model: BoostedModel,
}

impl Planted {
    fn rows(&self, ids: &[String]) -> Vec<Vec<f64>> {
        ids.iter()
            .map(|id| self.x[self.ids.iter().position(|i| i == id).unwrap()].clone())
            .collect()
    }
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn criterion(n: &str, name: &str, budget: Option<Duration>, failed: &mut bool, f: impl FnOnce() -> Check) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let took = start.elapsed();
    let outcome = match (outcome, budget) {
        (Ok(d), Some(b)) if took > b => Err(format!("{d}; over the {:.0} s budget", b.as_secs_f64())),
        (o, _) => o,
    };
    let (tag, detail) = match outcome {
        Ok(d) => ("PASS", d),
        Err(d) => {
            *failed = true;
            ("FAIL", d)
        }
    };
    println!("{tag} {n} {name}: {detail} [{:.1} s]", took.as_secs_f64());
}

fn tagscope(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tagscope"))
        .args(args)
        .env_remove("TAGSCOPE_JOBS")
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "tagscope {args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn read_json(p: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn prepared(model: &BoostedModel, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| model.prepare(r).unwrap()).collect()
}

fn test_auc(model: &BoostedModel, x: &[Vec<f64>], y: &LabelMatrix) -> Result<f64, String> {
    let m = evaluate(model, &prepared(model, x), y).map_err(|e| e.to_string())?;
    m.macro_auc.ok_or_else(|| "macro AUC undefined".to_string())
}

fn planted_benchmark(ctx: &mut Context) -> Check {
    let paths = planted_paths(&ctx.root);
    let store = read_store(&paths.store).map_err(|e| e.to_string())?;
    let groups = StoreManifest::load(manifest_path_for(&paths.store))
        .map_err(|e| e.to_string())?
        .groups;
    let (_, labels) = load_label_tsv(&paths.labels, TaskKind::Multilabel).map_err(|e| e.to_string())?;
    let ids = store.ids();
    let labels = labels.select(&ids).map_err(|e| e.to_string())?;
    ensure(
        ids.len() == 2000 && store.names.len() == 62 && labels.n_labels() == 8,
        "benchmark shape",
    )?;
    let sp = split(&ids, &labels, DEFAULT_FRACTIONS, SEED).map_err(|e| e.to_string())?;
    let x = store.matrix();
    let mut p = Planted {
        ids,
        names: store.names,
        groups,
        x,
        labels,
        split: sp,
        model: BoostedModel {
            params: Params::default(),
            task: TaskKind::Multilabel,
            feature_names: vec![],
            label_names: vec![],
            base_scores: vec![],
            trees: vec![],
            scaler: None,
        },
    };
    let params = Params::default();
    let (x_train, x_test) = (p.rows(&p.split.train), p.rows(&p.split.test));
    let y_train = p.labels.select(&p.split.train).unwrap();
    let y_test = p.labels.select(&p.split.test).unwrap();
    let (model, _) = train_standardized(&x_train, &y_train, &p.names, &params).map_err(|e| e.to_string())?;
    let auc = test_auc(&model, &x_test, &y_test)?;

    // Control: the same pipeline with label rows shuffled across tracks.
    let mut order: Vec<usize> = (0..p.ids.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(SEED));
    let mut shuffled = p.labels.clone();
    shuffled.indicators = order.iter().map(|&i| p.labels.indicators[i].clone()).collect();
    let (control, _) = train_standardized(&x_train, &shuffled.select(&p.split.train).unwrap(), &p.names, &params)
        .map_err(|e| e.to_string())?;
    let control_auc = test_auc(&control, &x_test, &shuffled.select(&p.split.test).unwrap())?;
    p.model = model;
    ctx.planted = Some(p);
    let detail = format!("test macro AUC {auc:.4} (>= 0.95), shuffled-label control {control_auc:.4} (0.5 +- 0.05)");
    ensure(auc >= 0.95 && (control_auc - 0.5).abs() <= 0.05, detail.clone())?;
    Ok(detail)
}

fn genre_pipeline(ctx: &mut Context) -> Check {
    let d = ctx.root.join("genre_run");
    std::fs::create_dir_all(&d).map_err(|e| e.to_string())?;
    let genres = ctx.root.join("genres");
    let (mid, store, labels, model, split_p, metrics) = (
        d.join("midlevel.json"),
        d.join("features.csv"),
        d.join("labels.tsv"),
        d.join("model.json"),
        d.join("split.json"),
        d.join("metrics.json"),
    );
    tagscope(&[
        "midlevel",
        "--annotations",
        s(&ctx.root.join("midlevel_annotations.csv")),
        "--audio-dir",
        s(&genres),
        "--out",
        s(&mid),
    ])?;
    tagscope(&[
        "extract",
        "--audio-dir",
        s(&genres),
        "--chords",
        s(&ctx.root.join("genres_chords.tsv")),
        "--midlevel-model",
        s(&mid),
        "--genre-labels",
        s(&labels),
        "--out",
        s(&store),
    ])?;
    let task = ["--task", "multiclass"];
    let mut train_args = vec![
        "train",
        "--store",
        s(&store),
        "--labels",
        s(&labels),
        "--split-out",
        s(&split_p),
    ];
    train_args.extend(task);
    train_args.extend(["--model", s(&model)]);
    tagscope(&train_args)?;
    let mut eval_args = vec![
        "evaluate",
        "--store",
        s(&store),
        "--labels",
        s(&labels),
        "--model",
        s(&model),
    ];
    eval_args.extend(task);
    eval_args.extend(["--split", s(&split_p), "--part", "test", "--out", s(&metrics)]);
    tagscope(&eval_args)?;
    let m = read_json(&metrics)?;
    let acc = m["accuracy"].as_f64().ok_or("no accuracy")?;
    let n = m["n_rows"].as_u64().unwrap_or(0);
    let model = BoostedModel::load(&model).map_err(|e| e.to_string())?;
    let st = read_store(&store).map_err(|e| e.to_string())?;
    ctx.genre = Some((model, st.matrix()));
    let detail = format!(
        "{} clips, test accuracy {acc:.4} on {n} held-out clips (>= 0.90)",
        st.rows.len()
    );
    ensure(st.rows.len() == 60 && acc >= 0.90, detail.clone())?;
    Ok(detail)
}

/// Same pipeline on user-supplied audio, when the environment names it.
fn user_genre_corpus(audio: &str, chords: &str, work: &Path) -> Check {
    let (store, labels, model, split_p, metrics) = (
        work.join("gtzan.csv"),
        work.join("gtzan_labels.tsv"),
        work.join("gtzan_model.json"),
        work.join("gtzan_split.json"),
        work.join("gtzan_metrics.json"),
    );
    tagscope(&[
        "extract",
        "--audio-dir",
        audio,
        "--chords",
        chords,
        "--genre-labels",
        s(&labels),
        "--out",
        s(&store),
    ])?;
    tagscope(&[
        "train",
        "--store",
        s(&store),
        "--labels",
        s(&labels),
        "--task",
        "multiclass",
        "--split-out",
        s(&split_p),
        "--model",
        s(&model),
    ])?;
    tagscope(&[
        "evaluate",
        "--store",
        s(&store),
        "--labels",
        s(&labels),
        "--task",
        "multiclass",
        "--model",
        s(&model),
        "--split",
        s(&split_p),
        "--out",
        s(&metrics),
    ])?;
    let acc = read_json(&metrics)?["accuracy"].as_f64().ok_or("no accuracy")?;
    let detail = format!("test accuracy {acc:.4} (>= 0.70)");
    ensure(acc >= 0.70, detail.clone())?;
    Ok(detail)
}

fn random_tree(rng: &mut ChaCha8Rng, max_depth: usize, n_features: usize) -> Tree {
    fn build(rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>, depth: usize, max_depth: usize, d: usize) -> usize {
        let i = nodes.len();
        if depth == max_depth || (depth > 0 && rng.random_bool(0.3)) {
            nodes.push(Node::leaf(rng.random_range(-1.0..1.0), rng.random_range(0.5..20.0)));
            return i;
        }
        nodes.push(Node::leaf(0.0, 0.0));
        let f = rng.random_range(0..d);
        let t = rng.random_range(-1.0..1.0);
        let l = build(rng, nodes, depth + 1, max_depth, d);
        let r = build(rng, nodes, depth + 1, max_depth, d);
        let cover = nodes[l].cover + nodes[r].cover;
        nodes[i] = Node::split(f, t, l, r, cover, 1.0);
        i
    }
    let mut nodes = Vec::new();
    build(rng, &mut nodes, 0, max_depth, n_features);
    Tree { nodes }
}

/// Expected output with the features in `known` fixed and the rest
/// averaged by cover.
fn conditional(tree: &Tree, x: &[f64], known: u32, i: usize) -> f64 {
    let n = &tree.nodes[i];
    match n.feature {
        None => n.leaf_value,
        Some(f) if known & (1 << f) != 0 => {
            conditional(tree, x, known, if x[f] < n.threshold { n.left } else { n.right })
        }
        Some(_) => {
            let (l, r) = (&tree.nodes[n.left], &tree.nodes[n.right]);
            (l.cover * conditional(tree, x, known, n.left) + r.cover * conditional(tree, x, known, n.right)) / n.cover
        }
    }
}

fn brute_force(trees: &[Tree], x: &[f64], m: usize) -> Vec<f64> {
    let values: Vec<f64> = (0..1u32 << m)
        .map(|s| trees.iter().map(|t| conditional(t, x, s, 0)).sum())
        .collect();
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    (0..m)
        .map(|i| {
            (0..1u32 << m)
                .filter(|s| s & (1 << i) == 0)
                .map(|s| {
                    let k = s.count_ones() as usize;
                    fact(k) * fact(m - k - 1) / fact(m) * (values[(s | 1 << i) as usize] - values[s as usize])
                })
                .sum()
        })
        .collect()
}

fn max_additivity(model: &BoostedModel, rows: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for r in rows {
        let x = model.prepare(r).unwrap();
        for l in &model.label_names {
            worst = worst.max(shap_values(model, &x, l).unwrap().additivity_error());
        }
    }
    worst
}

fn tree_shap_exactness(ctx: &Context) -> Check {
    const D: usize = 10;
    let mut worst: f64 = 0.0;
    let mut additivity: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees: Vec<Tree> = (0..rng.random_range(1..=5))
            .map(|_| random_tree(&mut rng, 4, D))
            .collect();
        let model = BoostedModel {
            params: Params::default(),
            task: TaskKind::Multilabel,
            feature_names: (0..D).map(|j| format!("f{j}")).collect(),
            label_names: vec!["t".into()],
            base_scores: vec![rng.random_range(-2.0..2.0)],
            trees: vec![trees.clone()],
            scaler: None,
        };
        for _ in 0..10 {
            let x: Vec<f64> = (0..D).map(|_| rng.random_range(-1.2..1.2)).collect();
            let e = shap_values(&model, &x, "t").map_err(|e| e.to_string())?;
            for (a, b) in e.phi.iter().zip(brute_force(&trees, &x, D)) {
                worst = worst.max((a - b).abs());
            }
            additivity = additivity.max(e.additivity_error());
        }
    }
    let mut suites = vec![format!("random forests {additivity:.1e}")];
    if let Some(p) = &ctx.planted {
        let a = max_additivity(&p.model, &p.rows(&p.split.test));
        additivity = additivity.max(a);
        suites.push(format!("planted {a:.1e}"));
    }
    if let Some((m, x)) = &ctx.genre {
        let a = max_additivity(m, x);
        additivity = additivity.max(a);
        suites.push(format!("genre {a:.1e}"));
    }
    let detail = format!(
        "max |phi - brute force| {worst:.1e} (< 1e-9); local accuracy {} (< 1e-6)",
        suites.join(", ")
    );
    ensure(worst < 1e-9 && additivity < 1e-6, detail.clone())?;
    Ok(detail)
}

fn fixture(ctx: &Context, id: &str) -> Result<(AudioClip, std::collections::BTreeMap<String, f64>), String> {
    let f = ctx
        .manifest
        .fixtures
        .iter()
        .find(|f| f.id == id)
        .ok_or(format!("no fixture {id}"))?;
    let clip = decode(ctx.root.join(&f.path), CANONICAL_RATE).map_err(|e| e.to_string())?;
    Ok((clip, f.truth.clone()))
}

fn dsp_oracles(ctx: &Context) -> Check {
    let bin_hz = CANONICAL_RATE as f64 / FRAME_SIZE as f64;
    let nyquist = CANONICAL_RATE as f64 / 2.0;
    let desc = |c: &AudioClip| signal_descriptors(c, None, VocalFlag::Unknown).map_err(|e| e.to_string());
    let mut notes = Vec::new();
    let mut bad = Vec::new();
    let mut check = |ok: bool, note: String| {
        if !ok {
            bad.push(note.clone());
        }
        notes.push(note);
    };

    let (tone, truth) = fixture(ctx, "sine_1000hz")?;
    let d = desc(&tone)?;
    let f0 = truth["frequency_hz"];
    check(
        (d.spectral_centroid - f0).abs() < bin_hz,
        format!("centroid {:.2} Hz", d.spectral_centroid),
    );
    check(d.spectral_flux < 1e-3, format!("flux {:.1e}", d.spectral_flux));

    let (low, truth) = fixture(ctx, "sine_100hz")?;
    let zcr = desc(&low)?.zero_crossing_rate;
    let want = truth["zero_crossing_rate"];
    check((zcr - want).abs() <= 0.005 * want, format!("zcr {zcr:.2}/s"));

    let dec = spectral_decrease(&flat_spectrum(FRAME_SIZE / 2 + 1));
    check(dec == 0.0, format!("flat decrease {dec}"));

    let (noise, _) = fixture(ctx, "white_noise")?;
    let rolloff = desc(&noise)?.spectral_rolloff;
    check(
        (rolloff - 0.85 * nyquist).abs() <= 0.03 * 0.85 * nyquist,
        format!("noise rolloff {rolloff:.0} Hz"),
    );

    for id in ["click_90bpm", "click_120bpm"] {
        let (clip, truth) = fixture(ctx, id)?;
        let bpm = estimate_tempo(&clip).bpm;
        check((bpm - truth["bpm"]).abs() <= 2.0, format!("{id} {bpm:.2}"));
    }

    // Halving keeps the doubled clip inside full scale.
    let quiet = AudioClip::new(
        noise.samples.iter().map(|v| 0.5 * v).collect(),
        noise.sample_rate,
        "quiet",
    );
    let (a, b) = (
        mfcc(&quiet).map_err(|e| e.to_string())?,
        mfcc(&noise).map_err(|e| e.to_string())?,
    );
    let drift = a
        .coefficients
        .iter()
        .zip(&b.coefficients)
        .flat_map(|(r, q)| r[1..].iter().zip(&q[1..]).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    check(drift < 1e-6, format!("mfcc 1-39 drift {drift:.1e}"));

    let detail = notes.join("; ");
    ensure(
        bad.is_empty(),
        format!("{detail}; out of tolerance: {}", bad.join(", ")),
    )?;
    Ok(detail)
}

fn transpose(seq: &[ChordEvent], k: i32) -> Vec<ChordEvent> {
    seq.iter()
        .map(|e| {
            let chord = e.chord.transposed(k);
            ChordEvent {
                chord,
                raw_label: chord.to_string(),
                ..e.clone()
            }
        })
        .collect()
}

fn bits(h: &tagscope_core::HarmonicFeatures) -> Vec<u64> {
    h.to_array().iter().map(|v| v.to_bits()).collect()
}

fn harmonic_fixtures(ctx: &Context) -> Check {
    let cadence = read_lab(ctx.root.join("fixtures/cadence_c_major.lab")).map_err(|e| e.to_string())?;
    let c_major = KeyEstimate::parse("C:maj").map_err(|e| e.to_string())?;
    let (h, _) = analyze_chords(&cadence, Some(c_major));
    ensure(
        h.dominants_ratio == 0.25 && h.subdominants_ratio == 0.25,
        format!("cadence ratios dom {} sub {}", h.dominants_ratio, h.subdominants_ratio),
    )?;
    ensure(h.to_array().len() == 32, "harmonic vector is not 32 wide")?;

    let mut labs = vec![cadence];
    let mut entries: Vec<_> = std::fs::read_dir(ctx.root.join("chords"))
        .map_err(|e| e.to_string())?
        .collect();
    entries.sort_by_key(|e| e.as_ref().map(|e| e.path()).ok());
    for e in entries {
        labs.push(read_lab(e.map_err(|e| e.to_string())?.path()).map_err(|e| e.to_string())?);
    }
    let mut checked = 0;
    for seq in &labs {
        let (h0, k0) = analyze_chords(seq, None);
        let (g0, _) = analyze_chords(seq, Some(c_major));
        for k in 0..12 {
            let t = transpose(seq, k);
            let (h, _) = analyze_chords(&t, None);
            let (g, _) = analyze_chords(&t, Some(c_major.transposed(k)));
            ensure(
                bits(&h) == bits(&h0) && bits(&g) == bits(&g0),
                format!("sequence {checked} (key {k0:?}) changes under +{k} semitones"),
            )?;
            ensure(h.to_array().len() == 32, "harmonic vector is not 32 wide")?;
        }
        checked += 1;
    }
    Ok(format!(
        "cadence dominants 0.25, subdominants 0.25; {checked} sequences bit-exact over 12 transpositions"
    ))
}

fn column_stats(z: &[Vec<f64>], j: usize) -> (f64, f64) {
    let n = z.len() as f64;
    let mean = z.iter().map(|r| r[j]).sum::<f64>() / n;
    let var = z.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn scaler_check(ctx: &Context) -> Check {
    let mut sets: Vec<(&str, Vec<Vec<f64>>)> = Vec::new();
    if let Some(p) = &ctx.planted {
        sets.push(("planted train", p.rows(&p.split.train)));
    }
    if let Some((_, x)) = &ctx.genre {
        sets.push(("genre store", x.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    sets.push((
        "random",
        (0..300)
            .map(|_| {
                (0..20)
                    .map(|j| rng.random_range(-1.0..1.0) * 10f64.powi(j % 7 - 3) + j as f64)
                    .collect()
            })
            .collect(),
    ));
    let (mut worst_mean, mut worst_std): (f64, f64) = (0.0, 0.0);
    for (_, x) in &sets {
        let scaler = StandardScaler::fit(x);
        let z = scaler.transform_all(x);
        for j in 0..scaler.dim() {
            let (m, sd) = column_stats(&z, j);
            worst_mean = worst_mean.max(m.abs());
            if scaler.std[j] > 0.0 {
                worst_std = worst_std.max((sd - 1.0).abs());
            }
        }
    }
    let names: Vec<&str> = sets.iter().map(|s| s.0).collect();
    let detail = format!(
        "{}: max |mean| {worst_mean:.1e} (< 1e-9), max |std - 1| {worst_std:.1e} (< 1e-9)",
        names.join(", ")
    );
    ensure(worst_mean < 1e-9 && worst_std < 1e-9, detail.clone())?;
    Ok(detail)
}

/// Name, rows, labels and feature names of one training set.
type Suite = (String, Vec<Vec<f64>>, LabelMatrix, Vec<String>);

fn boosting_check(ctx: &Context) -> Check {
    let full_rows = Params {
        subsample: 1.0,
        n_trees: 60,
        ..Params::default()
    };
    let mut suites: Vec<Suite> = Vec::new();
    if let Some(p) = &ctx.planted {
        suites.push((
            "planted".into(),
            p.rows(&p.split.train),
            p.labels.select(&p.split.train).unwrap(),
            p.names.clone(),
        ));
    }
    if let Some((m, x)) = &ctx.genre {
        let labels = load_label_tsv(ctx.root.join("genre_run/labels.tsv"), TaskKind::Multiclass)
            .map_err(|e| e.to_string())?
            .1;
        let store = read_store(ctx.root.join("genre_run/features.csv")).map_err(|e| e.to_string())?;
        let y = labels.select(&store.ids()).map_err(|e| e.to_string())?;
        suites.push(("genre".into(), x.clone(), y, m.feature_names.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let x: Vec<Vec<f64>> = (0..400)
        .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let y = LabelMatrix {
        track_ids: (0..400).map(|i| format!("r{i}")).collect(),
        tag_names: vec!["xor".into()],
        indicators: x.iter().map(|r| vec![(r[0] > 0.0) != (r[1] > 0.0)]).collect(),
        task: TaskKind::Multilabel,
    };
    suites.push(("xor".into(), x, y, (0..5).map(|j| format!("f{j}")).collect()));
    let mut rises = Vec::new();
    for (name, x, y, names) in &suites {
        let z = StandardScaler::fit(x).transform_all(x);
        let (_, report) = train(&z, y, names, &full_rows).map_err(|e| e.to_string())?;
        for (l, h) in report.loss_history.iter().enumerate() {
            if let Some(w) = h.windows(2).find(|w| w[1] > w[0]) {
                rises.push(format!("{name} label {l}: {} -> {}", w[0], w[1]));
            }
        }
    }
    ensure(rises.is_empty(), format!("loss increased: {}", rises.join("; ")))?;

    let p = planted_paths(&ctx.root);
    let dir = ctx.root.join("determinism");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for (i, jobs) in ["1", "4", "1", "2"].iter().enumerate() {
        let model = dir.join(format!("model{i}.json"));
        tagscope(&[
            "--jobs",
            jobs,
            "train",
            "--store",
            s(&p.store),
            "--labels",
            s(&p.labels),
            "--n-trees",
            "40",
            "--model",
            s(&model),
        ])?;
        bytes.push(std::fs::read(&model).map_err(|e| e.to_string())?);
    }
    ensure(
        bytes.windows(2).all(|w| w[0] == w[1]),
        "model bytes differ across runs or --jobs values",
    )?;
    let names: Vec<&str> = suites.iter().map(|s| s.0.as_str()).collect();
    Ok(format!(
        "loss non-increasing on {} (subsample 1); model bytes identical for --jobs 1, 4, 1, 2",
        names.join(", ")
    ))
}

fn explanation_check(ctx: &Context) -> Check {
    let p = ctx.planted.as_ref().ok_or("planted benchmark unavailable")?;
    // A shallow model leaves many columns unused.
    let small = Params {
        n_trees: 10,
        max_depth: 2,
        ..Params::default()
    };
    let y_train = p.labels.select(&p.split.train).unwrap();
    let (model, _) =
        train_standardized(&p.rows(&p.split.train), &y_train, &p.names, &small).map_err(|e| e.to_string())?;
    let x_test = prepared(&model, &p.rows(&p.split.test));
    let y_test = p.labels.select(&p.split.test).unwrap();
    let perm = permutation_importance(&model, &x_test, &y_test, PermutationMetric::MacroAuc, 3, SEED)
        .map_err(|e| e.to_string())?;
    let weight = weight_importance(&model, None).map_err(|e| e.to_string())?;
    let unused: Vec<usize> = (0..weight.scores.len()).filter(|&j| weight.scores[j] == 0.0).collect();
    ensure(!unused.is_empty(), "every feature is used; cannot check")?;
    let nonzero: Vec<&str> = unused
        .iter()
        .filter(|&&j| perm.scores[j] != 0.0)
        .map(|&j| p.names[j].as_str())
        .collect();
    ensure(
        nonzero.is_empty(),
        format!("unused features with nonzero importance: {nonzero:?}"),
    )?;

    let report = ablation(
        &p.x,
        &p.ids,
        &p.labels,
        &p.groups,
        &p.names,
        &p.split,
        &Params::default(),
    )
    .map_err(|e| e.to_string())?;
    let metric = |name: &str| report.row(name).and_then(|r| r.metric).ok_or(format!("no {name} row"));
    let (sig, harm) = (metric("signal")?, metric("harmonic")?);
    let detail = format!(
        "{} unused features score exactly 0; ablation signal {sig:.4} vs harmonic {harm:.4} (gap >= 0.1), {} rows",
        unused.len(),
        report.rows.len()
    );
    ensure(sig - harm >= 0.1 && report.rows.len() == 7, detail.clone())?;
    Ok(detail)
}

fn metric_arithmetic() -> Check {
    let auc = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).map_err(|e| e.to_string())?;
    // Confusion {A->A: 2, A->B: 1, B->B: 3}.
    let (acc, f1, _) = multiclass_summary(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 1, 1], 2);
    let two = LabelMatrix {
        track_ids: (0..4).map(|i| format!("r{i}")).collect(),
        tag_names: vec!["perfect".into(), "chance".into()],
        indicators: vec![
            vec![false, false],
            vec![false, true],
            vec![true, false],
            vec![true, true],
        ],
        task: TaskKind::Multilabel,
    };
    let margins = vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0], vec![3.0, 1.0]];
    let macro_auc = metrics_from_margins(&margins, &two)
        .map_err(|e| e.to_string())?
        .macro_auc;
    let detail = format!("AUC {auc}, F1(A) {}, accuracy {acc}, macro AUC {macro_auc:?}", f1[0]);
    ensure(
        auc == 0.75 && f1[0] == 0.8 && acc == 5.0 / 6.0 && macro_auc == Some(0.75),
        detail.clone(),
    )?;
    Ok(detail)
}

fn main() {
    let suite_start = Instant::now();
    let dir = tempfile::tempdir().expect("temporary directory");
    let root = dir.path().join("corpus");
    let manifest = write_corpus(&root, SEED).expect("synthetic corpus");
    let mut ctx = Context {
        root,
        manifest,
        planted: None,
        genre: None,
    };
    let mut failed = false;

    criterion(
        "1",
        "planted multilabel benchmark",
        Some(Duration::from_secs(60)),
        &mut failed,
        || planted_benchmark(&mut ctx),
    );
    criterion(
        "2",
        "three-genre synthetic audio",
        Some(Duration::from_secs(180)),
        &mut failed,
        || genre_pipeline(&mut ctx),
    );
    match (
        std::env::var("TAGSCOPE_GTZAN_AUDIO"),
        std::env::var("TAGSCOPE_GTZAN_CHORDS"),
    ) {
        (Ok(audio), Ok(chords)) => criterion("2", "user genre corpus", None, &mut failed, || {
            user_genre_corpus(&audio, &chords, dir.path())
        }),
        _ => println!("SKIP 2 user genre corpus: set TAGSCOPE_GTZAN_AUDIO and TAGSCOPE_GTZAN_CHORDS to run"),
    }
    criterion("3", "TreeSHAP exactness", None, &mut failed, || {
        tree_shap_exactness(&ctx)
    });
    criterion("4", "DSP oracles", None, &mut failed, || dsp_oracles(&ctx));
    criterion("5", "harmonic fixtures", None, &mut failed, || harmonic_fixtures(&ctx));
    criterion("6", "scaler", None, &mut failed, || scaler_check(&ctx));
    criterion("7", "boosting", None, &mut failed, || boosting_check(&ctx));
    criterion("8", "explanations", None, &mut failed, || explanation_check(&ctx));
    criterion("9", "metric arithmetic", None, &mut failed, metric_arithmetic);

    let total = suite_start.elapsed();
    let within = total <= SUITE_BUDGET;
    println!(
        "{} suite runtime {:.1} s (< {} s)",
        if within { "PASS" } else { "FAIL" },
        total.as_secs_f64(),
        SUITE_BUDGET.as_secs()
    );
    if failed || !within {
        std::process::exit(1);
    }
}
