//! Dataset label structures: the GTZAN genre directory tree and MTG-Jamendo
//! style tab-separated tag files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TabularError;

pub const GTZAN_CLASSES: usize = 10;
pub const JAMENDO_FULL_SIZE: usize = 18_486;
pub const JAMENDO_TAGS: usize = 56;

const AUDIO_EXTENSIONS: [&str; 3] = ["wav", "au", "snd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Multilabel,
    Multiclass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackRef {
    pub id: String,
    pub path: PathBuf,
}

/// Binary indicator matrix, one row per track and one column per tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMatrix {
    pub track_ids: Vec<String>,
    pub tag_names: Vec<String>,
    pub indicators: Vec<Vec<bool>>,
    pub task: TaskKind,
}

impl LabelMatrix {
    pub fn n_rows(&self) -> usize {
        self.track_ids.len()
    }

    pub fn n_labels(&self) -> usize {
        self.tag_names.len()
    }

    pub fn column(&self, label: usize) -> Vec<bool> {
        self.indicators.iter().map(|r| r[label]).collect()
    }

    pub fn positives(&self, label: usize) -> usize {
        self.indicators.iter().filter(|r| r[label]).count()
    }

    /// Class index of a row (first set indicator).
    pub fn class_of(&self, row: usize) -> Option<usize> {
        self.indicators[row].iter().position(|&b| b)
    }

    pub fn classes(&self) -> Vec<usize> {
        (0..self.n_rows()).map(|r| self.class_of(r).unwrap_or(0)).collect()
    }

    /// Checks shape and, for multiclass, that each row has exactly one tag.
    pub fn validate(&self) -> Result<(), TabularError> {
        if self.indicators.len() != self.track_ids.len() {
            return Err(TabularError::Store("label rows do not match track ids".into()));
        }
        for (i, row) in self.indicators.iter().enumerate() {
            if row.len() != self.tag_names.len() {
                return Err(TabularError::MalformedRow {
                    line: i + 1,
                    reason: "indicator row width differs from tag count".into(),
                });
            }
            if self.task == TaskKind::Multiclass && row.iter().filter(|&&b| b).count() != 1 {
                return Err(TabularError::MalformedRow {
                    line: i + 1,
                    reason: format!("multiclass row {} must carry exactly one tag", self.track_ids[i]),
                });
            }
        }
        Ok(())
    }

    /// Rows for `ids`, in that order.
    pub fn select(&self, ids: &[String]) -> Result<LabelMatrix, TabularError> {
        let index: HashMap<&str, usize> = self
            .track_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let rows = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|&i| self.indicators[i].clone())
                    .ok_or_else(|| TabularError::UnknownTrack(id.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LabelMatrix {
            track_ids: ids.to_vec(),
            tag_names: self.tag_names.clone(),
            indicators: rows,
            task: self.task,
        })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.track_ids.iter().any(|t| t == id)
    }
}

fn is_audio(p: &Path) -> bool {
    p.extension()
        .and_then(|x| x.to_str())
        .is_some_and(|x| AUDIO_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, TabularError> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    v.sort();
    Ok(v)
}

/// Loads a `root/<genre>/<audio files>` tree. Genres and files are sorted by
/// name; the track id is the file stem.
pub fn load_gtzan(root: impl AsRef<Path>) -> Result<(Vec<TrackRef>, LabelMatrix), TabularError> {
    let root = root.as_ref();
    let genre_dirs: Vec<PathBuf> = sorted_entries(root)?.into_iter().filter(|p| p.is_dir()).collect();
    if genre_dirs.is_empty() {
        return Err(TabularError::EmptyGenreDir(root.to_path_buf()));
    }
    let mut tracks = Vec::new();
    let mut classes = Vec::new();
    let mut seen = BTreeSet::new();
    let tag_names: Vec<String> = genre_dirs
        .iter()
        .map(|d| d.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    for (class, dir) in genre_dirs.iter().enumerate() {
        let files: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| p.is_file() && is_audio(p))
            .collect();
        if files.is_empty() {
            return Err(TabularError::EmptyGenreDir(dir.clone()));
        }
        for f in files {
            let id = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            if !seen.insert(id.clone()) {
                return Err(TabularError::DuplicateTrackId(id));
            }
            tracks.push(TrackRef { id, path: f });
            classes.push(class);
        }
    }
    let n_classes = tag_names.len();
    let indicators = classes
        .iter()
        .map(|&c| (0..n_classes).map(|k| k == c).collect())
        .collect();
    log::info!(
        "GTZAN tree: {} tracks in {} genres{}",
        tracks.len(),
        n_classes,
        if n_classes == GTZAN_CLASSES {
            ""
        } else {
            " (canonical set has 10)"
        }
    );
    let labels = LabelMatrix {
        track_ids: tracks.iter().map(|t| t.id.clone()).collect(),
        tag_names,
        indicators,
        task: TaskKind::Multiclass,
    };
    Ok((tracks, labels))
}

/// Parses a tab-separated tag file.
///
/// Two layouts are accepted: the published MTG-Jamendo layout with header
/// `TRACK_ID ARTIST_ID ALBUM_ID PATH DURATION TAGS...`, and a plain layout of
/// `track_id path tag...` rows (an optional `track_id` header is skipped).
/// Tags are collected into a sorted vocabulary.
pub fn parse_label_tsv(text: &str, task: TaskKind) -> Result<(Vec<TrackRef>, LabelMatrix), TabularError> {
    let mut lines = text.lines().enumerate().peekable();
    let mut published = false;
    if let Some((_, first)) = lines.peek() {
        let head = first.split('\t').next().unwrap_or("");
        if head == "TRACK_ID" {
            published = true;
            lines.next();
        } else if head == "track_id" {
            lines.next();
        }
    }
    let (path_col, tags_from, min_cols) = if published { (3, 5, 5) } else { (1, 2, 2) };
    let mut tracks = Vec::new();
    let mut row_tags: Vec<Vec<String>> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < min_cols || cols[0].is_empty() {
            return Err(TabularError::MalformedRow {
                line: line_no,
                reason: format!(
                    "expected at least {min_cols} tab-separated columns, found {}",
                    cols.len()
                ),
            });
        }
        let id = cols[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(TabularError::DuplicateTrackId(id));
        }
        tracks.push(TrackRef {
            id,
            path: PathBuf::from(cols[path_col]),
        });
        row_tags.push(
            cols[tags_from.min(cols.len())..]
                .iter()
                .map(|t| t.trim())
                .filter(|t| !t.is_empty())
                .map(String::from)
                .collect(),
        );
    }
    let vocab: BTreeMap<String, usize> = row_tags
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    let indicators = row_tags
        .iter()
        .map(|tags| {
            let mut row = vec![false; vocab.len()];
            for t in tags {
                row[vocab[t]] = true;
            }
            row
        })
        .collect();
    let labels = LabelMatrix {
        track_ids: tracks.iter().map(|t| t.id.clone()).collect(),
        tag_names: vocab.into_keys().collect(),
        indicators,
        task,
    };
    labels.validate()?;
    Ok((tracks, labels))
}

pub fn load_label_tsv(path: impl AsRef<Path>, task: TaskKind) -> Result<(Vec<TrackRef>, LabelMatrix), TabularError> {
    parse_label_tsv(&std::fs::read_to_string(path)?, task)
}

/// Loads an MTG-Jamendo split file as a multilabel matrix.
pub fn load_jamendo(path: impl AsRef<Path>) -> Result<(Vec<TrackRef>, LabelMatrix), TabularError> {
    let (tracks, labels) = load_label_tsv(path, TaskKind::Multilabel)?;
    log::info!(
        "Jamendo file: {} tracks, {} tags (full published set: {} tracks, {} tags)",
        tracks.len(),
        labels.n_labels(),
        JAMENDO_FULL_SIZE,
        JAMENDO_TAGS
    );
    Ok((tracks, labels))
}

/// Writes labels in the plain `track_id path tag...` layout.
pub fn write_label_tsv(path: impl AsRef<Path>, tracks: &[TrackRef], labels: &LabelMatrix) -> Result<(), TabularError> {
    let mut out = String::from("track_id\tpath\ttags\n");
    for (t, row) in tracks.iter().zip(&labels.indicators) {
        out.push_str(&t.id);
        out.push('\t');
        out.push_str(&t.path.to_string_lossy());
        for (k, &on) in row.iter().enumerate() {
            if on {
                out.push('\t');
                out.push_str(&labels.tag_names[k]);
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_row_fixture() {
        let text = "t1\ta.mp3\thappy\nt2\tb.mp3\thappy\tdark\nt3\tc.mp3\n";
        let (tracks, l) = parse_label_tsv(text, TaskKind::Multilabel).unwrap();
        assert_eq!(tracks.len(), 3);
        assert_eq!(l.tag_names, vec!["dark", "happy"]);
        let sums: Vec<usize> = l.indicators.iter().map(|r| r.iter().filter(|&&b| b).count()).collect();
        assert_eq!(sums, vec![1, 2, 0]);
    }

    #[test]
    fn missing_path_column() {
        let err = parse_label_tsv("t1\ta.mp3\tx\nt2\n", TaskKind::Multilabel).unwrap_err();
        assert!(matches!(err, TabularError::MalformedRow { line: 2, .. }));
    }

    #[test]
    fn published_layout() {
        let text = "TRACK_ID\tARTIST_ID\tALBUM_ID\tPATH\tDURATION\tTAGS\n\
                    track_1\tartist_1\talbum_1\t01/1.mp3\t200.0\tmood/theme---happy\tmood/theme---calm\n\
                    track_2\tartist_2\talbum_2\t02/2.mp3\t100.0\tmood/theme---calm\n";
        let (tracks, l) = parse_label_tsv(text, TaskKind::Multilabel).unwrap();
        assert_eq!(tracks[0].path, PathBuf::from("01/1.mp3"));
        assert_eq!(l.n_labels(), 2);
        assert_eq!(l.positives(0), 2);
    }

    #[test]
    fn multiclass_requires_one_tag() {
        assert!(parse_label_tsv("a\tp\tx\ty\n", TaskKind::Multiclass).is_err());
        assert!(parse_label_tsv("a\tp\tx\nb\tq\ty\n", TaskKind::Multiclass).is_ok());
    }

    #[test]
    fn gtzan_tree() {
        let dir = tempfile::tempdir().unwrap();
        for g in ["rock", "blues"] {
            std::fs::create_dir(dir.path().join(g)).unwrap();
            for i in 0..3 {
                std::fs::write(dir.path().join(g).join(format!("{g}.{i:05}.au")), b"x").unwrap();
            }
        }
        std::fs::write(dir.path().join("rock").join("notes.txt"), b"x").unwrap();
        let (tracks, l) = load_gtzan(dir.path()).unwrap();
        assert_eq!(tracks.len(), 6);
        assert_eq!(l.tag_names, vec!["blues", "rock"]);
        assert_eq!(l.class_of(0), Some(0));
        assert_eq!(l.class_of(5), Some(1));
        l.validate().unwrap();
    }

    #[test]
    fn gtzan_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_gtzan(dir.path()), Err(TabularError::EmptyGenreDir(_))));
        std::fs::create_dir(dir.path().join("jazz")).unwrap();
        assert!(matches!(load_gtzan(dir.path()), Err(TabularError::EmptyGenreDir(_))));
        std::fs::write(dir.path().join("jazz").join("x.wav"), b"").unwrap();
        std::fs::create_dir(dir.path().join("pop")).unwrap();
        std::fs::write(dir.path().join("pop").join("x.au"), b"").unwrap();
        assert!(matches!(load_gtzan(dir.path()), Err(TabularError::DuplicateTrackId(_))));
    }
}
