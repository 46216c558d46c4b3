use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::labels::{LabelMatrix, TaskKind};
use super::TabularError;

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.8, 0.1, 0.1];
pub const DEFAULT_SPLIT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn parts(&self) -> [&[String]; 3] {
        [&self.train, &self.validation, &self.test]
    }

    /// Checks pairwise disjointness and that the union is exactly `ids`.
    pub fn covers(&self, ids: &[String]) -> bool {
        let mut seen = HashSet::new();
        for part in self.parts() {
            for id in part {
                if !seen.insert(id.as_str()) {
                    return false;
                }
            }
        }
        seen.len() == ids.len() && ids.iter().all(|i| seen.contains(i.as_str()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TabularError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TabularError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Largest-remainder apportionment of `n` items by `fractions`.
fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: [usize; 3] = std::array::from_fn(|i| quotas[i].floor() as usize);
    let mut rest = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if fractions[i] > 0.0 {
            counts[i] += 1;
            rest -= 1;
        }
    }
    counts
}

/// Splits `ids` (row-aligned with `labels`) into train/validation/test.
///
/// Multiclass data is stratified per class. Multilabel data uses greedy
/// iterative stratification: the rarest remaining tag is distributed first,
/// each row going to the split that most wants that tag.
pub fn split(ids: &[String], labels: &LabelMatrix, fractions: [f64; 3], seed: u64) -> Result<SplitSpec, TabularError> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(TabularError::InvalidFractions(format!("{fractions:?} outside [0, 1]")));
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(TabularError::InvalidFractions(format!("{fractions:?} do not sum to 1")));
    }
    if ids.len() != labels.n_rows() {
        return Err(TabularError::Store(format!(
            "{} ids but {} label rows",
            ids.len(),
            labels.n_rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignment = match labels.task {
        TaskKind::Multiclass => stratify_classes(labels, &fractions, &mut rng)?,
        TaskKind::Multilabel => stratify_tags(labels, &fractions, &mut rng),
    };
    let mut parts: [Vec<String>; 3] = Default::default();
    for (row, &s) in assignment.iter().enumerate() {
        parts[s].push(ids[row].clone());
    }
    let [train, validation, test] = parts;
    Ok(SplitSpec {
        train,
        validation,
        test,
        seed,
    })
}

fn stratify_classes(
    labels: &LabelMatrix,
    fractions: &[f64; 3],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, TabularError> {
    let parts = fractions.iter().filter(|&&f| f > 0.0).count();
    let mut assignment = vec![0usize; labels.n_rows()];
    for class in 0..labels.n_labels() {
        let mut members: Vec<usize> = (0..labels.n_rows())
            .filter(|&r| labels.class_of(r) == Some(class))
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < parts {
            return Err(TabularError::ClassTooSmall {
                class: labels.tag_names[class].clone(),
                members: members.len(),
                parts,
            });
        }
        members.shuffle(rng);
        let counts = apportion(members.len(), fractions);
        let mut it = members.into_iter();
        for (s, &c) in counts.iter().enumerate() {
            for r in it.by_ref().take(c) {
                assignment[r] = s;
            }
        }
    }
    Ok(assignment)
}

fn stratify_tags(labels: &LabelMatrix, fractions: &[f64; 3], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = labels.n_rows();
    let n_tags = labels.n_labels();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut desired: [f64; 3] = std::array::from_fn(|s| fractions[s] * n as f64);
    let mut desired_tag: Vec<[f64; 3]> = (0..n_tags)
        .map(|t| {
            let c = labels.positives(t) as f64;
            std::array::from_fn(|s| fractions[s] * c)
        })
        .collect();
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let pick = |want: &dyn Fn(usize) -> (f64, f64)| -> usize {
        let mut best = 0;
        for s in 1..3 {
            if fractions[s] <= 0.0 {
                continue;
            }
            let (a, b) = want(s);
            let (ba, bb) = want(best);
            if fractions[best] <= 0.0 || a > ba || (a == ba && b > bb) {
                best = s;
            }
        }
        best
    };
    loop {
        let mut remaining = vec![0usize; n_tags];
        for &r in &order {
            if assignment[r].is_none() {
                for (t, &on) in labels.indicators[r].iter().enumerate() {
                    if on {
                        remaining[t] += 1;
                    }
                }
            }
        }
        let Some(tag) = (0..n_tags)
            .filter(|&t| remaining[t] > 0)
            .min_by_key(|&t| (remaining[t], t))
        else {
            break;
        };
        for &r in &order {
            if assignment[r].is_some() || !labels.indicators[r][tag] {
                continue;
            }
            let s = pick(&|s| (desired_tag[tag][s], desired[s]));
            assignment[r] = Some(s);
            desired[s] -= 1.0;
            for (t, &on) in labels.indicators[r].iter().enumerate() {
                if on {
                    desired_tag[t][s] -= 1.0;
                }
            }
        }
    }
    for &r in &order {
        if assignment[r].is_none() {
            let s = pick(&|s| (desired[s], 0.0));
            assignment[r] = Some(s);
            desired[s] -= 1.0;
        }
    }
    assignment.into_iter().map(|a| a.unwrap_or(0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn multiclass(n_classes: usize, per_class: usize) -> (Vec<String>, LabelMatrix) {
        let ids: Vec<String> = (0..n_classes * per_class).map(|i| format!("t{i:03}")).collect();
        let indicators = (0..ids.len())
            .map(|i| (0..n_classes).map(|c| c == i % n_classes).collect())
            .collect();
        let labels = LabelMatrix {
            track_ids: ids.clone(),
            tag_names: (0..n_classes).map(|c| format!("c{c}")).collect(),
            indicators,
            task: TaskKind::Multiclass,
        };
        (ids, labels)
    }

    #[test]
    fn stratified_counts_per_class() {
        let (ids, labels) = multiclass(10, 10);
        let s = split(&ids, &labels, [0.8, 0.1, 0.1], 7).unwrap();
        assert!(s.covers(&ids));
        for (part, want) in s.parts().iter().zip([8, 1, 1]) {
            for c in 0..10 {
                let n = part
                    .iter()
                    .filter(|id| {
                        let row = ids.iter().position(|x| x == *id).unwrap();
                        labels.class_of(row) == Some(c)
                    })
                    .count();
                assert_eq!(n, want);
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let (ids, labels) = multiclass(10, 10);
        let a = split(&ids, &labels, DEFAULT_FRACTIONS, 7).unwrap();
        let b = split(&ids, &labels, DEFAULT_FRACTIONS, 7).unwrap();
        let c = split(&ids, &labels, DEFAULT_FRACTIONS, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn tiny_class_is_rejected() {
        let (ids, labels) = multiclass(2, 2);
        assert!(matches!(
            split(&ids, &labels, DEFAULT_FRACTIONS, 1),
            Err(TabularError::ClassTooSmall { .. })
        ));
        assert!(matches!(
            split(&ids, &labels, [0.5, 0.6, 0.1], 1),
            Err(TabularError::InvalidFractions(_))
        ));
    }

    #[test]
    fn apportionment() {
        assert_eq!(apportion(10, &[0.8, 0.1, 0.1]), [8, 1, 1]);
        assert_eq!(apportion(7, &[0.7, 0.3, 0.0]), [5, 2, 0]);
        assert_eq!(apportion(3, &[1.0 / 3.0; 3]), [1, 1, 1]);
    }

    #[test]
    fn multilabel_balances_rare_tags() {
        let n = 200;
        let ids: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
        let indicators: Vec<Vec<bool>> = (0..n).map(|i| vec![i % 2 == 0, i % 20 == 0, i % 7 == 0]).collect();
        let labels = LabelMatrix {
            track_ids: ids.clone(),
            tag_names: vec!["a".into(), "rare".into(), "b".into()],
            indicators: indicators.clone(),
            task: TaskKind::Multilabel,
        };
        let s = split(&ids, &labels, DEFAULT_FRACTIONS, 3).unwrap();
        assert!(s.covers(&ids));
        assert_eq!(s.train.len(), 160);
        let rare_in = |part: &[String]| {
            part.iter()
                .filter(|id| id[1..].parse::<usize>().unwrap() % 20 == 0)
                .count()
        };
        assert_eq!(rare_in(&s.train), 8);
        assert_eq!(rare_in(&s.validation), 1);
        assert_eq!(rare_in(&s.test), 1);
    }
}
