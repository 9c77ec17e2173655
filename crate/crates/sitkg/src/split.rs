//! Repetition-based train/test split.
//!
//! For each (task, subject) pair the highest `test_takes` take indices are
//! held out; components are atomic, so no edge ever crosses the split. The
//! manifest records the assignment and can be loaded back to reproduce an
//! externally published split exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::graph::{RecordingKey, SituationalGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSide {
    Train,
    Test,
}

impl SplitSide {
    pub fn name(self) -> &'static str {
        match self {
            SplitSide::Train => "train",
            SplitSide::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(SplitSide::Train),
            "test" => Some(SplitSide::Test),
            _ => None,
        }
    }
}

/// Recording-key → side assignment, covering every recording exactly once.
pub type Manifest = BTreeMap<RecordingKey, SplitSide>;

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: SituationalGraph,
    /// Full subgraphs of the held-out recordings, in key order.
    pub test_components: Vec<SituationalGraph>,
    pub manifest: Manifest,
}

impl Split {
    pub fn test_keys(&self) -> impl Iterator<Item = &RecordingKey> {
        self.manifest
            .iter()
            .filter(|(_, side)| **side == SplitSide::Test)
            .map(|(key, _)| key)
    }
}

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("task {task:?} subject {subject:?} has {actual} takes, fewer than test_takes={wanted}")]
    InsufficientTakes {
        task: String,
        subject: String,
        actual: usize,
        wanted: usize,
    },
    #[error("manifest does not cover recording {0}")]
    UncoveredRecording(RecordingKey),
    #[error("manifest names recording {0} which is not in the graph")]
    UnknownRecording(RecordingKey),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// Holds out the `test_takes` highest take indices per (task, subject).
pub fn split_by_take(graph: &SituationalGraph, test_takes: usize) -> Result<Split, SplitError> {
    let keys = graph.recording_keys();
    let mut groups: BTreeMap<(String, String), Vec<u32>> = BTreeMap::new();
    for key in &keys {
        groups
            .entry((key.task.clone(), key.subject.clone()))
            .or_default()
            .push(key.take);
    }
    let mut manifest = Manifest::new();
    for ((task, subject), mut takes) in groups {
        if takes.len() < test_takes {
            return Err(SplitError::InsufficientTakes {
                task,
                subject,
                actual: takes.len(),
                wanted: test_takes,
            });
        }
        takes.sort_unstable();
        let cut = takes.len() - test_takes;
        for (i, take) in takes.into_iter().enumerate() {
            let side = if i < cut {
                SplitSide::Train
            } else {
                SplitSide::Test
            };
            manifest.insert(RecordingKey::new(task.clone(), subject.clone(), take), side);
        }
    }
    Ok(apply_manifest_unchecked(graph, manifest))
}

/// Applies an externally provided manifest; it must cover exactly the
/// graph's recordings.
pub fn apply_manifest(graph: &SituationalGraph, manifest: Manifest) -> Result<Split, SplitError> {
    let keys = graph.recording_keys();
    for key in &keys {
        if !manifest.contains_key(key) {
            return Err(SplitError::UncoveredRecording(key.clone()));
        }
    }
    for key in manifest.keys() {
        if !keys.contains(key) {
            return Err(SplitError::UnknownRecording(key.clone()));
        }
    }
    Ok(apply_manifest_unchecked(graph, manifest))
}

fn apply_manifest_unchecked(graph: &SituationalGraph, manifest: Manifest) -> Split {
    let train_keys: Vec<&RecordingKey> = manifest
        .iter()
        .filter(|(_, side)| **side == SplitSide::Train)
        .map(|(key, _)| key)
        .collect();
    let train = graph.subgraph(train_keys);
    let test_components: Vec<SituationalGraph> = manifest
        .iter()
        .filter(|(_, side)| **side == SplitSide::Test)
        .map(|(key, _)| graph.subgraph([key]))
        .collect();
    Split {
        train,
        test_components,
        manifest,
    }
}

/// Renders the manifest as `task<TAB>subject<TAB>take<TAB>side` lines.
pub fn render_manifest(manifest: &Manifest) -> String {
    let mut out = String::new();
    for (key, side) in manifest {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            key.task,
            key.subject,
            key.take,
            side.name()
        ));
    }
    out
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<(), SplitError> {
    fs::write(path, render_manifest(manifest)).map_err(|source| SplitError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest, SplitError> {
    let mut manifest = Manifest::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(SplitError::Parse {
                path: path.display().to_string(),
                line: lineno,
                message: format!("expected 4 tab-separated columns, found {}", cols.len()),
            });
        }
        let take: u32 = cols[2].parse().map_err(|_| SplitError::Parse {
            path: path.display().to_string(),
            line: lineno,
            message: format!("take {:?} is not an integer", cols[2]),
        })?;
        let side = SplitSide::parse(cols[3]).ok_or_else(|| SplitError::Parse {
            path: path.display().to_string(),
            line: lineno,
            message: format!("side {:?} is neither train nor test", cols[3]),
        })?;
        manifest.insert(RecordingKey::new(cols[0], cols[1], take), side);
    }
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, SplitError> {
    let text = fs::read_to_string(path).map_err(|source| SplitError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    use crate::ingest::AssociationPolicy;
    use crate::synth::{components_from_annotations, generate_synthetic, SynthConfig};
    use crate::vocab::Vocabulary;

    fn graph(tasks: usize, subjects: usize, takes: usize) -> SituationalGraph {
        let annotations =
            generate_synthetic(&SynthConfig::new(tasks, subjects, takes), 1).unwrap();
        let components = components_from_annotations(&annotations, &AssociationPolicy::default());
        SituationalGraph::build_graph(&components, &Vocabulary::default()).unwrap()
    }

    #[test]
    fn highest_takes_are_held_out() {
        let g = graph(1, 1, 3);
        let split = split_by_take(&g, 2).unwrap();
        let test_takes: BTreeSet<u32> = split.test_keys().map(|k| k.take).collect();
        assert_eq!(test_takes, BTreeSet::from([2, 3]));
        assert_eq!(split.test_components.len(), 2);
    }

    #[test]
    fn full_shape_yields_108_test_components() {
        let g = graph(9, 6, 10);
        let split = split_by_take(&g, 2).unwrap();
        assert_eq!(split.test_components.len(), 108);
        assert_eq!(
            split
                .manifest
                .values()
                .filter(|s| **s == SplitSide::Train)
                .count(),
            432
        );
    }

    #[test]
    fn insufficient_takes_is_an_error() {
        let g = graph(2, 1, 1);
        let err = split_by_take(&g, 2).unwrap_err();
        assert!(matches!(err, SplitError::InsufficientTakes { .. }));
    }

    #[test]
    fn split_partitions_triples() {
        let g = graph(3, 2, 4);
        let split = split_by_take(&g, 2).unwrap();
        let train: BTreeSet<_> = split.train.triples().cloned().collect();
        let mut test = BTreeSet::new();
        for c in &split.test_components {
            test.extend(c.triples().cloned());
        }
        assert!(train.is_disjoint(&test));
        let all: BTreeSet<_> = g.triples().cloned().collect();
        let union: BTreeSet<_> = train.union(&test).cloned().collect();
        assert_eq!(union, all);
    }

    #[test]
    fn manifest_is_reproducible_and_round_trips() {
        let g = graph(2, 2, 3);
        let a = split_by_take(&g, 1).unwrap();
        let b = split_by_take(&g, 1).unwrap();
        assert_eq!(render_manifest(&a.manifest), render_manifest(&b.manifest));

        let text = render_manifest(&a.manifest);
        let parsed = parse_manifest(&text, Path::new("manifest.tsv")).unwrap();
        assert_eq!(parsed, a.manifest);
        let reapplied = apply_manifest(&g, parsed).unwrap();
        assert_eq!(reapplied.train, a.train);
    }

    #[test]
    fn manifest_must_cover_graph() {
        let g = graph(1, 1, 2);
        let mut manifest = split_by_take(&g, 1).unwrap().manifest;
        manifest.remove(&RecordingKey::new("cooking", "subject_1", 1));
        assert!(matches!(
            apply_manifest(&g, manifest).unwrap_err(),
            SplitError::UncoveredRecording(_)
        ));
        let mut manifest = split_by_take(&g, 1).unwrap().manifest;
        manifest.insert(
            RecordingKey::new("sawing", "subject_9", 1),
            SplitSide::Test,
        );
        assert!(matches!(
            apply_manifest(&g, manifest).unwrap_err(),
            SplitError::UnknownRecording(_)
        ));
    }
}
