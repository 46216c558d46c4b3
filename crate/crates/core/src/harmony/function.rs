use serde::{Deserialize, Serialize};

use super::chord::{Chord, ChordEvent, Quality};
use super::key::KeyEstimate;

/// Key-relative role of a chord.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum HarmonicFunction {
    /// Resolution after a dominant, or an opening tonic chord.
    Ton,
    Dom,
    Sub,
    /// Major or dominant-seventh chord on a dominant degree; counts as dominant.
    Glob,
    Other,
}

impl HarmonicFunction {
    pub fn is_dominant(self) -> bool {
        matches!(self, Self::Dom | Self::Glob)
    }

    /// Symbol used when matching the n-gram vocabulary (glob folds into dom).
    fn ngram_symbol(self) -> Option<Symbol> {
        match self {
            Self::Ton => Some(Symbol::Ton),
            Self::Dom | Self::Glob => Some(Symbol::Dom),
            Self::Sub => Some(Symbol::Sub),
            Self::Other => None,
        }
    }
}

const DOMINANT_DEGREES: [u8; 2] = [7, 11];
const SUBDOMINANT_DEGREES: [u8; 2] = [5, 2];

/// Assigns one function to each pitched chord after collapsing runs of
/// identical consecutive chords. No-chord events are dropped first.
pub fn functional_labels(chords: &[ChordEvent], key: &KeyEstimate) -> Vec<HarmonicFunction> {
    let mut collapsed: Vec<(u8, Quality)> = Vec::new();
    for e in chords {
        if let Chord::Pitched { root, quality } = e.chord {
            if collapsed.last() != Some(&(root, quality)) {
                collapsed.push((root, quality));
            }
        }
    }
    let mut out: Vec<HarmonicFunction> = Vec::with_capacity(collapsed.len());
    for (i, &(root, quality)) in collapsed.iter().enumerate() {
        let degree = (root as i32 - key.tonic as i32).rem_euclid(12) as u8;
        let f = if DOMINANT_DEGREES.contains(&degree) {
            if matches!(quality, Quality::Maj | Quality::Dom7) {
                HarmonicFunction::Glob
            } else {
                HarmonicFunction::Dom
            }
        } else if SUBDOMINANT_DEGREES.contains(&degree) {
            HarmonicFunction::Sub
        } else if out.last().is_some_and(|p| p.is_dominant()) || (i == 0 && degree == 0) {
            HarmonicFunction::Ton
        } else {
            HarmonicFunction::Other
        };
        out.push(f);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symbol {
    Ton,
    Dom,
    Sub,
}

impl Symbol {
    const ALL: [Symbol; 3] = [Symbol::Ton, Symbol::Dom, Symbol::Sub];
}

/// Number of n-gram ratio slots.
pub const NGRAM_SLOTS: usize = 30;

/// Trigrams left out of the vocabulary.
const EXCLUDED_TRIGRAMS: [[Symbol; 3]; 6] = [
    [Symbol::Ton, Symbol::Ton, Symbol::Ton],
    [Symbol::Dom, Symbol::Dom, Symbol::Dom],
    [Symbol::Sub, Symbol::Sub, Symbol::Sub],
    [Symbol::Dom, Symbol::Dom, Symbol::Ton],
    [Symbol::Sub, Symbol::Sub, Symbol::Ton],
    [Symbol::Ton, Symbol::Ton, Symbol::Dom],
];

fn bigram_vocabulary() -> Vec<[Symbol; 2]> {
    Symbol::ALL
        .iter()
        .flat_map(|&a| Symbol::ALL.iter().map(move |&b| [a, b]))
        .collect()
}

fn trigram_vocabulary() -> Vec<[Symbol; 3]> {
    Symbol::ALL
        .iter()
        .flat_map(|&a| {
            Symbol::ALL
                .iter()
                .flat_map(move |&b| Symbol::ALL.iter().map(move |&c| [a, b, c]))
        })
        .filter(|t| !EXCLUDED_TRIGRAMS.contains(t))
        .collect()
}

/// Names of the 32 harmonic features in output order.
pub const HARMONIC_FEATURE_NAMES: [&str; 32] = [
    "dominants_ratio",
    "subdominants_ratio",
    "bigram_ton_ton",
    "bigram_ton_dom",
    "bigram_ton_sub",
    "bigram_dom_ton",
    "bigram_dom_dom",
    "bigram_dom_sub",
    "bigram_sub_ton",
    "bigram_sub_dom",
    "bigram_sub_sub",
    "trigram_ton_ton_sub",
    "trigram_ton_dom_ton",
    "trigram_ton_dom_dom",
    "trigram_ton_dom_sub",
    "trigram_ton_sub_ton",
    "trigram_ton_sub_dom",
    "trigram_ton_sub_sub",
    "trigram_dom_ton_ton",
    "trigram_dom_ton_dom",
    "trigram_dom_ton_sub",
    "trigram_dom_dom_sub",
    "trigram_dom_sub_ton",
    "trigram_dom_sub_dom",
    "trigram_dom_sub_sub",
    "trigram_sub_ton_ton",
    "trigram_sub_ton_dom",
    "trigram_sub_ton_sub",
    "trigram_sub_dom_ton",
    "trigram_sub_dom_dom",
    "trigram_sub_dom_sub",
    "trigram_sub_sub_dom",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicFeatures {
    pub dominants_ratio: f64,
    pub subdominants_ratio: f64,
    /// 9 bigram ratios then 21 trigram ratios, in [`HARMONIC_FEATURE_NAMES`] order.
    pub ngram_ratios: [f64; NGRAM_SLOTS],
}

impl Default for HarmonicFeatures {
    fn default() -> Self {
        Self {
            dominants_ratio: 0.0,
            subdominants_ratio: 0.0,
            ngram_ratios: [0.0; NGRAM_SLOTS],
        }
    }
}

impl HarmonicFeatures {
    pub fn to_array(&self) -> [f64; 32] {
        let mut out = [0.0; 32];
        out[0] = self.dominants_ratio;
        out[1] = self.subdominants_ratio;
        out[2..].copy_from_slice(&self.ngram_ratios);
        out
    }
}

/// Ratio features over a function sequence.
///
/// The two ratios divide by the full sequence length. N-gram ratios are
/// counted over the subsequence of non-`Other` functions, where glob counts
/// as dom, and divide by the total number of bigrams or trigrams in it.
pub fn harmonic_features(functions: &[HarmonicFunction]) -> HarmonicFeatures {
    let mut out = HarmonicFeatures::default();
    let n = functions.len();
    if n == 0 {
        return out;
    }
    let doms = functions.iter().filter(|f| f.is_dominant()).count();
    let subs = functions.iter().filter(|&&f| f == HarmonicFunction::Sub).count();
    out.dominants_ratio = doms as f64 / n as f64;
    out.subdominants_ratio = subs as f64 / n as f64;

    let stream: Vec<Symbol> = functions.iter().filter_map(|f| f.ngram_symbol()).collect();
    let bigrams = bigram_vocabulary();
    let trigrams = trigram_vocabulary();
    debug_assert_eq!(bigrams.len() + trigrams.len(), NGRAM_SLOTS);
    if stream.len() >= 2 {
        let total = (stream.len() - 1) as f64;
        for (slot, bg) in bigrams.iter().enumerate() {
            let count = stream.windows(2).filter(|w| w == bg).count();
            out.ngram_ratios[slot] = count as f64 / total;
        }
    }
    if stream.len() >= 3 {
        let total = (stream.len() - 2) as f64;
        for (i, tg) in trigrams.iter().enumerate() {
            let count = stream.windows(3).filter(|w| w == tg).count();
            out.ngram_ratios[bigrams.len() + i] = count as f64 / total;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmony::key::Mode;
    use HarmonicFunction::*;

    fn events(labels: &[&str]) -> Vec<ChordEvent> {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| ChordEvent::new(i as f64, i as f64 + 1.0, l).unwrap())
            .collect()
    }

    fn sym_name(s: Symbol) -> &'static str {
        match s {
            Symbol::Ton => "ton",
            Symbol::Dom => "dom",
            Symbol::Sub => "sub",
        }
    }

    #[test]
    fn names_match_vocabulary() {
        let mut names = vec!["dominants_ratio".to_string(), "subdominants_ratio".to_string()];
        for b in bigram_vocabulary() {
            names.push(format!("bigram_{}_{}", sym_name(b[0]), sym_name(b[1])));
        }
        for t in trigram_vocabulary() {
            names.push(format!(
                "trigram_{}_{}_{}",
                sym_name(t[0]),
                sym_name(t[1]),
                sym_name(t[2])
            ));
        }
        assert_eq!(names, HARMONIC_FEATURE_NAMES);
        // The named exemplar pattern is part of the vocabulary.
        assert!(names.iter().any(|n| n == "trigram_sub_sub_dom"));
    }

    #[test]
    fn rule_table() {
        let c = KeyEstimate::new(0, Mode::Major);
        assert_eq!(functional_labels(&events(&["G:7"]), &c), vec![Glob]);
        assert_eq!(functional_labels(&events(&["F:maj"]), &c), vec![Sub]);
        assert_eq!(functional_labels(&events(&["G:7", "C:maj"]), &c), vec![Glob, Ton]);
        assert_eq!(functional_labels(&events(&["E:min"]), &c), vec![Other]);
        assert_eq!(functional_labels(&events(&["B:dim"]), &c), vec![Dom]);
        assert_eq!(functional_labels(&events(&["D:min", "A:min"]), &c), vec![Sub, Other]);
        assert_eq!(functional_labels(&events(&["G:min", "A:min"]), &c), vec![Dom, Ton]);
    }

    #[test]
    fn identical_neighbours_collapse() {
        let c = KeyEstimate::new(0, Mode::Major);
        let f = functional_labels(&events(&["C:maj", "C:maj", "N", "C:maj", "G:7", "G:7", "C:maj"]), &c);
        assert_eq!(f, vec![Ton, Glob, Ton]);
    }

    #[test]
    fn cadence_fixture() {
        let h = harmonic_features(&[Ton, Sub, Glob, Ton]);
        assert_eq!(h.dominants_ratio, 0.25);
        assert_eq!(h.subdominants_ratio, 0.25);
        let idx = |n: &str| HARMONIC_FEATURE_NAMES.iter().position(|x| *x == n).unwrap();
        let arr = h.to_array();
        assert_eq!(arr[idx("bigram_sub_dom")], 1.0 / 3.0);
        assert_eq!(arr[idx("trigram_sub_dom_ton")], 0.5);
    }

    #[test]
    fn empty_and_short_sequences() {
        assert_eq!(harmonic_features(&[]).to_array(), [0.0; 32]);
        let one = harmonic_features(&[Ton]).to_array();
        assert!(one[2..].iter().all(|&v| v == 0.0));
        let others = harmonic_features(&[Other, Other]).to_array();
        assert_eq!(others, [0.0; 32]);
    }
}
