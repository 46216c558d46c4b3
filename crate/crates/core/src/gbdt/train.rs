use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{BoostedModel, Node, Params, Tree};
use super::GbdtError;
use crate::tabular::{LabelMatrix, StandardScaler};

/// Prior log-odds are clamped to this magnitude.
const BASE_SCORE_LIMIT: f64 = 10.0;
/// Floor on per-row hessians so that every node keeps positive cover.
const MIN_HESSIAN: f64 = 1e-16;

pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^m)` without overflow.
fn softplus(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

/// Mean logistic loss of margins against binary targets.
pub fn logistic_loss(margins: &[f64], y: &[bool]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(y)
        .map(|(&m, &t)| softplus(m) - if t { m } else { 0.0 })
        .sum();
    total / margins.len().max(1) as f64
}

/// `ln(pos / neg)`, clamped to ±10.
pub fn base_score(y: &[bool]) -> f64 {
    let pos = y.iter().filter(|&&t| t).count() as f64;
    let neg = y.len() as f64 - pos;
    (pos.ln() - neg.ln()).clamp(-BASE_SCORE_LIMIT, BASE_SCORE_LIMIT)
}

/// Second-order gain of splitting a node into (GL, HL) and (GR, HR).
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - (gl + gr) * (gl + gr) / (hl + hr + lambda)) - gamma
}

/// Training diagnostics that are not part of the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training logistic loss per label, before the first tree and
    /// after each added tree.
    pub loss_history: Vec<Vec<f64>>,
    /// Labels whose training column has a single class.
    pub degenerate_labels: Vec<String>,
}

/// Base score, trees and loss history of one label.
type LabelFit = (f64, Vec<Tree>, Vec<f64>);

/// Trains one booster per label column of `labels` on the rows of `x`.
pub fn train(
    x: &[Vec<f64>],
    labels: &LabelMatrix,
    feature_names: &[String],
    params: &Params,
) -> Result<(BoostedModel, TrainReport), GbdtError> {
    params.validate()?;
    if x.is_empty() {
        return Err(GbdtError::EmptyData);
    }
    if x.len() != labels.n_rows() {
        return Err(GbdtError::RowMismatch {
            rows: x.len(),
            labels: labels.n_rows(),
        });
    }
    let d = feature_names.len();
    if let Some(bad) = x.iter().find(|r| r.len() != d) {
        return Err(GbdtError::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GbdtError::NumericFailure("non-finite feature value".into()));
    }
    let data = Columns::new(x, d);
    let results: Vec<Result<LabelFit, GbdtError>> = (0..labels.n_labels())
        .into_par_iter()
        .map(|l| boost_label(&data, &labels.column(l), params, l as u64))
        .collect();
    let mut base_scores = Vec::new();
    let mut trees = Vec::new();
    let mut loss_history = Vec::new();
    let mut degenerate_labels = Vec::new();
    for (l, r) in results.into_iter().enumerate() {
        let (b, t, h) = r?;
        if t.is_empty() && params.n_trees > 0 {
            log::warn!(
                "label {:?} has a single class; booster keeps its base score",
                labels.tag_names[l]
            );
            degenerate_labels.push(labels.tag_names[l].clone());
        }
        base_scores.push(b);
        trees.push(t);
        loss_history.push(h);
    }
    let model = BoostedModel {
        params: params.clone(),
        task: labels.task,
        feature_names: feature_names.to_vec(),
        label_names: labels.tag_names.clone(),
        base_scores,
        trees,
        scaler: None,
    };
    Ok((
        model,
        TrainReport {
            loss_history,
            degenerate_labels,
        },
    ))
}

/// Fits a standard scaler on `x`, trains on the standardized rows and
/// stores the scaler in the model so raw rows can be fed to
/// [`BoostedModel::prepare`].
pub fn train_standardized(
    x: &[Vec<f64>],
    labels: &LabelMatrix,
    feature_names: &[String],
    params: &Params,
) -> Result<(BoostedModel, TrainReport), GbdtError> {
    let scaler = StandardScaler::fit(x);
    let z = scaler.transform_all(x);
    let (mut model, report) = train(&z, labels, feature_names, params)?;
    model.scaler = Some(scaler);
    Ok((model, report))
}

/// Column-major copy of the design matrix with per-column sort orders.
struct Columns {
    n: usize,
    cols: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
    /// `sorted[f][i] == cols[f][order[f][i]]`.
    sorted: Vec<Vec<f64>>,
}

impl Columns {
    fn new(x: &[Vec<f64>], d: usize) -> Self {
        let n = x.len();
        let cols: Vec<Vec<f64>> = (0..d).map(|f| x.iter().map(|r| r[f]).collect()).collect();
        let order = cols
            .par_iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect::<Vec<Vec<u32>>>();
        let sorted = order
            .iter()
            .zip(&cols)
            .map(|(o, c)| o.iter().map(|&r| c[r as usize]).collect())
            .collect();
        Self { n, cols, order, sorted }
    }

    fn d(&self) -> usize {
        self.cols.len()
    }

    /// Walks `tree` for row `r` without materializing the row.
    fn predict(&self, tree: &Tree, r: usize) -> f64 {
        let mut i = 0;
        loop {
            let n = &tree.nodes[i];
            match n.feature {
                None => return n.leaf_value,
                Some(f) => i = if self.cols[f][r] < n.threshold { n.left } else { n.right },
            }
        }
    }
}

fn boost_label(
    data: &Columns,
    y: &[bool],
    params: &Params,
    label: u64,
) -> Result<(f64, Vec<Tree>, Vec<f64>), GbdtError> {
    let n = data.n;
    let base = base_score(y);
    let mut margins = vec![base; n];
    let mut history = vec![logistic_loss(&margins, y)];
    let pos = y.iter().filter(|&&t| t).count();
    if pos == 0 || pos == n {
        return Ok((base, Vec::new(), history));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(label);
    let mut trees = Vec::with_capacity(params.n_trees);
    let n_cols = ((params.colsample * data.d() as f64).round() as usize).clamp(1, data.d().max(1));
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for round in 0..params.n_trees {
        for r in 0..n {
            let p = sigmoid(margins[r]);
            g[r] = p - if y[r] { 1.0 } else { 0.0 };
            h[r] = (p * (1.0 - p)).max(MIN_HESSIAN);
        }
        let in_sample: Vec<bool> = if params.subsample < 1.0 {
            let mut s: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < params.subsample).collect();
            if !s.iter().any(|&b| b) {
                s[rng.random_range(0..n)] = true;
            }
            s
        } else {
            vec![true; n]
        };
        let features: Vec<usize> = if n_cols < data.d() {
            let mut all: Vec<usize> = (0..data.d()).collect();
            all.shuffle(&mut rng);
            let mut pick = all[..n_cols].to_vec();
            pick.sort_unstable();
            pick
        } else {
            (0..data.d()).collect()
        };
        let tree = grow_tree(data, &g, &h, &in_sample, &features, params);
        for (r, m) in margins.iter_mut().enumerate() {
            *m += data.predict(&tree, r);
        }
        let loss = logistic_loss(&margins, y);
        if !loss.is_finite() {
            return Err(GbdtError::NumericFailure(format!(
                "non-finite training loss at round {round}"
            )));
        }
        history.push(loss);
        trees.push(tree);
    }
    Ok((base, trees, history))
}

struct Pending {
    g: f64,
    h: f64,
    count: usize,
    depth: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Exact greedy, level-by-level tree growth. Each level costs one pass
/// over every sampled feature's sort order.
fn grow_tree(data: &Columns, g: &[f64], h: &[f64], in_sample: &[bool], features: &[usize], params: &Params) -> Tree {
    const NONE: u32 = u32::MAX;
    let n = data.n;
    let mut pos: Vec<u32> = (0..n).map(|r| if in_sample[r] { 0 } else { NONE }).collect();
    let gh: Vec<(f64, f64)> = g.iter().zip(h).map(|(&a, &b)| (a, b)).collect();
    let (g0, h0, c0) = (0..n)
        .filter(|&r| in_sample[r])
        .fold((0.0, 0.0, 0), |(a, b, c), r| (a + g[r], b + h[r], c + 1));
    let mut pending = vec![Pending {
        g: g0,
        h: h0,
        count: c0,
        depth: 0,
    }];
    let mut splits: Vec<Option<(Candidate, usize, usize)>> = vec![None];
    let mut frontier = vec![0usize];
    let mcw = params.min_child_weight;
    while !frontier.is_empty() {
        let active: Vec<usize> = frontier
            .iter()
            .copied()
            .filter(|&i| {
                let p = &pending[i];
                p.depth < params.max_depth && p.count >= 2 && p.h >= 2.0 * mcw
            })
            .collect();
        if active.is_empty() {
            break;
        }
        let mut slot_of = vec![NONE as usize; pending.len()];
        for (s, &i) in active.iter().enumerate() {
            slot_of[i] = s;
        }
        let totals: Vec<(f64, f64)> = active.iter().map(|&i| (pending[i].g, pending[i].h)).collect();
        let slot_row: Vec<u32> = pos
            .iter()
            .map(|&p| if p == NONE { NONE } else { slot_of[p as usize] as u32 })
            .collect();
        let per_feature: Vec<Vec<Option<Candidate>>> = features
            .par_iter()
            .map(|&f| scan_feature(data, f, &gh, &slot_row, &totals, params))
            .collect();
        let mut best: Vec<Option<Candidate>> = vec![None; active.len()];
        for cands in per_feature {
            for (b, c) in best.iter_mut().zip(cands) {
                if let Some(c) = c {
                    if b.map_or(true, |b| c.gain > b.gain) {
                        *b = Some(c);
                    }
                }
            }
        }
        let mut next = Vec::new();
        let mut child_of: Vec<Option<(usize, usize, usize, f64)>> = vec![None; pending.len()];
        for (s, &i) in active.iter().enumerate() {
            let Some(c) = best[s] else { continue };
            if !(c.gain > 0.0) {
                continue;
            }
            let l = pending.len();
            let depth = pending[i].depth + 1;
            for _ in 0..2 {
                pending.push(Pending {
                    g: 0.0,
                    h: 0.0,
                    count: 0,
                    depth,
                });
                splits.push(None);
            }
            splits[i] = Some((c, l, l + 1));
            child_of[i] = Some((c.feature, l, l + 1, c.threshold));
            next.extend([l, l + 1]);
        }
        for r in 0..n {
            let p = pos[r];
            if p == NONE {
                continue;
            }
            if let Some((f, l, rt, thr)) = child_of[p as usize] {
                let c = if data.cols[f][r] < thr { l } else { rt };
                pos[r] = c as u32;
                let q = &mut pending[c];
                q.g += g[r];
                q.h += h[r];
                q.count += 1;
            }
        }
        frontier = next;
    }
    // Pending nodes are created parent-before-child, so that order is
    // already a valid node array with the root at 0.
    let mut nodes: Vec<Node> = pending
        .iter()
        .zip(&splits)
        .map(|(p, s)| match s {
            Some((c, l, r)) => Node::split(c.feature, c.threshold, *l, *r, 0.0, c.gain),
            None => Node::leaf(-p.g / (p.h + params.lambda) * params.learning_rate, p.h),
        })
        .collect();
    for i in (0..nodes.len()).rev() {
        if !nodes[i].is_leaf() {
            nodes[i].cover = nodes[nodes[i].left].cover + nodes[nodes[i].right].cover;
        }
    }
    Tree { nodes }
}

/// Best split of every active node on feature `f`.
///
/// Candidates are compared by `GL²/(HL+λ) + GR²/(HR+λ)` in cross-multiplied
/// form, which orders them exactly as the gain does without a division per
/// row; the winning gain is then evaluated with [`split_gain`].
fn scan_feature(
    data: &Columns,
    f: usize,
    gh: &[(f64, f64)],
    slot_row: &[u32],
    totals: &[(f64, f64)],
    params: &Params,
) -> Vec<Option<Candidate>> {
    struct Acc {
        gl: f64,
        hl: f64,
        last: f64,
        seen: bool,
        best_num: f64,
        best_den: f64,
        best_at: Option<(f64, f64, f64)>,
    }
    let lambda = params.lambda;
    let mcw = params.min_child_weight;
    let mut acc: Vec<Acc> = totals
        .iter()
        .map(|_| Acc {
            gl: 0.0,
            hl: 0.0,
            last: 0.0,
            seen: false,
            best_num: 0.0,
            best_den: 1.0,
            best_at: None,
        })
        .collect();
    for (&r, &v) in data.order[f].iter().zip(&data.sorted[f]) {
        let s = slot_row[r as usize];
        if s == u32::MAX {
            continue;
        }
        let a = &mut acc[s as usize];
        if a.seen && v > a.last {
            let (gt, ht) = totals[s as usize];
            let hr = ht - a.hl;
            if a.hl >= mcw && hr >= mcw {
                let gr = gt - a.gl;
                let (dl, dr) = (a.hl + lambda, hr + lambda);
                let num = a.gl * a.gl * dr + gr * gr * dl;
                let den = dl * dr;
                if a.best_at.is_none() || num * a.best_den > a.best_num * den {
                    a.best_num = num;
                    a.best_den = den;
                    let mut threshold = 0.5 * a.last + 0.5 * v;
                    if !(threshold > a.last) {
                        threshold = v;
                    }
                    a.best_at = Some((threshold, a.gl, a.hl));
                }
            }
        }
        let (gr, hr) = gh[r as usize];
        a.gl += gr;
        a.hl += hr;
        a.last = v;
        a.seen = true;
    }
    acc.iter()
        .zip(totals)
        .map(|(a, &(gt, ht))| {
            a.best_at.map(|(threshold, gl, hl)| Candidate {
                gain: split_gain(gl, hl, gt - gl, ht - hl, lambda, params.gamma),
                feature: f,
                threshold,
            })
        })
        .collect()
}
