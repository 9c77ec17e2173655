//! Frequency baselines for parent-action and subsequent-action prediction.
//!
//! Baseline1 keys on the sub-action label alone; Baseline2 keys on
//! (sub-action label, associated object label) pairs, falling back to the
//! objectless key for sub-actions without objects. Predictions are full
//! rankings over the closed candidate vocabulary, ordered by count
//! descending with lexicographic tie-breaks, with back-off B2 → B1 → global
//! frequency for unknown keys.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::graph::{NodeId, NodeKind, RelationKind, SituationalGraph};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PredictionTask {
    Parent,
    Next,
}

impl PredictionTask {
    pub fn name(self) -> &'static str {
        match self {
            PredictionTask::Parent => "parent",
            PredictionTask::Next => "next",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "parent" => Some(PredictionTask::Parent),
            "next" => Some(PredictionTask::Next),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    B1,
    B2,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::B1 => "b1",
            Variant::B2 => "b2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "b1" => Some(Variant::B1),
            "b2" => Some(Variant::B2),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training graph has no triples")]
    EmptyTrainingGraph,
    #[error("label {0:?} is not in the sub-action vocabulary")]
    UnknownLabel(String),
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
    #[error("label {0:?} contains a comma, which the table format reserves")]
    UnserializableLabel(String),
}

type Counts = BTreeMap<String, u64>;

/// Fitted frequency table for one (task, variant) pair.
///
/// `pair_counts` is populated for B2 only; `label_counts` is the B1 level
/// and also serves as B2's first back-off; `global` is the last resort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    pub task: PredictionTask,
    pub variant: Variant,
    pair_counts: BTreeMap<(String, Option<String>), Counts>,
    label_counts: BTreeMap<String, Counts>,
    global: Counts,
    candidates: Vec<String>,
    sub_vocabulary: BTreeSet<String>,
}

/// Count desc, then label ascending.
fn ranked(counts: &Counts) -> Vec<(&str, u64)> {
    let mut entries: Vec<(&str, u64)> = counts.iter().map(|(l, c)| (l.as_str(), *c)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries
}

fn top_of(counts: &Counts) -> Option<(&str, u64)> {
    ranked(counts).into_iter().next()
}

impl FrequencyTable {
    /// Counts for a key after back-off: B2 pair keys (summed over the given
    /// objects) → B1 label counts → global counts.
    fn resolve(&self, label: &str, objects: &BTreeSet<String>) -> Counts {
        if self.variant == Variant::B2 {
            let keys: Vec<(String, Option<String>)> = if objects.is_empty() {
                vec![(label.to_string(), None)]
            } else {
                objects
                    .iter()
                    .map(|o| (label.to_string(), Some(o.clone())))
                    .collect()
            };
            let mut merged = Counts::new();
            let mut any = false;
            for key in &keys {
                if let Some(counts) = self.pair_counts.get(key) {
                    any = true;
                    for (candidate, count) in counts {
                        *merged.entry(candidate.clone()).or_insert(0) += count;
                    }
                }
            }
            if any {
                return merged;
            }
        }
        self.label_counts
            .get(label)
            .cloned()
            .unwrap_or_else(|| self.global.clone())
    }

    /// Global candidate frequencies, ranked, padded with the rest of the
    /// vocabulary lexicographically.
    pub fn global_ranking(&self) -> Vec<String> {
        let mut order: Vec<String> = ranked(&self.global)
            .into_iter()
            .filter(|(label, _)| self.candidates.iter().any(|c| c == label))
            .map(|(l, _)| l.to_string())
            .collect();
        for candidate in &self.candidates {
            if !order.contains(candidate) {
                order.push(candidate.clone());
            }
        }
        order
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }
}

/// Object labels associated to each sub-action instance, via has_object.
fn objects_by_sub(graph: &SituationalGraph) -> BTreeMap<&NodeId, BTreeSet<&str>> {
    let mut map: BTreeMap<&NodeId, BTreeSet<&str>> = BTreeMap::new();
    for t in graph.triples() {
        if t.relation == RelationKind::HasObject {
            map.entry(&t.head)
                .or_default()
                .insert(graph.node(&t.tail).expect("endpoint exists").label.as_str());
        }
    }
    map
}

/// Fits the parent-task table: B1 counts (sub-action label → parent label)
/// over has_element triples; B2 additionally counts
/// ((sub-action, object) → parent), with the objectless key for sub-actions
/// that have no objects.
pub fn fit_parent(
    train: &SituationalGraph,
    variant: Variant,
    vocab: &Vocabulary,
) -> Result<FrequencyTable, BaselineError> {
    if train.triple_count() == 0 {
        return Err(BaselineError::EmptyTrainingGraph);
    }
    let objects = objects_by_sub(train);
    let mut table = FrequencyTable {
        task: PredictionTask::Parent,
        variant,
        pair_counts: BTreeMap::new(),
        label_counts: BTreeMap::new(),
        global: Counts::new(),
        candidates: vocab.parents().to_vec(),
        sub_vocabulary: vocab.sub_actions().iter().cloned().collect(),
    };
    for node in train.nodes() {
        if node.kind == NodeKind::ParentAction {
            *table.global.entry(node.label.clone()).or_insert(0) += 1;
        }
    }
    for t in train.triples() {
        if t.relation != RelationKind::HasElement {
            continue;
        }
        let parent = &train.node(&t.head).expect("endpoint exists").label;
        let sub = &train.node(&t.tail).expect("endpoint exists").label;
        *table
            .label_counts
            .entry(sub.clone())
            .or_default()
            .entry(parent.clone())
            .or_insert(0) += 1;
        if variant == Variant::B2 {
            match objects.get(&t.tail) {
                Some(objs) if !objs.is_empty() => {
                    for object in objs {
                        *table
                            .pair_counts
                            .entry((sub.clone(), Some(object.to_string())))
                            .or_default()
                            .entry(parent.clone())
                            .or_insert(0) += 1;
                    }
                }
                _ => {
                    *table
                        .pair_counts
                        .entry((sub.clone(), None))
                        .or_default()
                        .entry(parent.clone())
                        .or_insert(0) += 1;
                }
            }
        }
    }
    Ok(table)
}

/// Fits the next-task table: B1 counts (current label → next label) over
/// has_next triples; B2 keys add the current sub-action's objects.
pub fn fit_next(
    train: &SituationalGraph,
    variant: Variant,
    vocab: &Vocabulary,
) -> Result<FrequencyTable, BaselineError> {
    if train.triple_count() == 0 {
        return Err(BaselineError::EmptyTrainingGraph);
    }
    let objects = objects_by_sub(train);
    let mut table = FrequencyTable {
        task: PredictionTask::Next,
        variant,
        pair_counts: BTreeMap::new(),
        label_counts: BTreeMap::new(),
        global: Counts::new(),
        candidates: vocab.sub_actions().to_vec(),
        sub_vocabulary: vocab.sub_actions().iter().cloned().collect(),
    };
    for t in train.triples() {
        if t.relation != RelationKind::HasNext {
            continue;
        }
        let current = &train.node(&t.head).expect("endpoint exists").label;
        let next = &train.node(&t.tail).expect("endpoint exists").label;
        *table.global.entry(next.clone()).or_insert(0) += 1;
        *table
            .label_counts
            .entry(current.clone())
            .or_default()
            .entry(next.clone())
            .or_insert(0) += 1;
        if variant == Variant::B2 {
            match objects.get(&t.head) {
                Some(objs) if !objs.is_empty() => {
                    for object in objs {
                        *table
                            .pair_counts
                            .entry((current.clone(), Some(object.to_string())))
                            .or_default()
                            .entry(next.clone())
                            .or_insert(0) += 1;
                    }
                }
                _ => {
                    *table
                        .pair_counts
                        .entry((current.clone(), None))
                        .or_default()
                        .entry(next.clone())
                        .or_insert(0) += 1;
                }
            }
        }
    }
    Ok(table)
}

/// Ranks all 9 parent labels for a component given as (sub-action label,
/// associated objects) instances. Each instance votes for its key's top
/// candidate (B2 casts one vote per (label, object) pair); parents are
/// ranked by votes, then summed vote-weighted counts, then lexicographic;
/// unvoted parents follow in global-frequency order.
pub fn predict_parent(subs: &[(String, BTreeSet<String>)], table: &FrequencyTable) -> Vec<String> {
    let mut votes: BTreeMap<String, u64> = BTreeMap::new();
    let mut weight: BTreeMap<String, u64> = BTreeMap::new();
    {
        let mut cast = |counts: Counts| {
            if let Some((winner, count)) = top_of(&counts) {
                if table.candidates.iter().any(|c| c == winner) {
                    *votes.entry(winner.to_string()).or_insert(0) += 1;
                    *weight.entry(winner.to_string()).or_insert(0) += count;
                }
            }
        };
        for (label, objects) in subs {
            match table.variant {
                Variant::B1 => cast(table.resolve(label, &BTreeSet::new())),
                Variant::B2 => {
                    if objects.is_empty() {
                        cast(table.resolve(label, objects));
                    } else {
                        // One vote per (label, object) pair.
                        for object in objects {
                            let single: BTreeSet<String> = [object.clone()].into();
                            cast(table.resolve(label, &single));
                        }
                    }
                }
            }
        }
    }

    let mut voted: Vec<&String> = votes.keys().collect();
    voted.sort_by(|a, b| {
        votes[*b]
            .cmp(&votes[*a])
            .then_with(|| weight[*b].cmp(&weight[*a]))
            .then_with(|| a.cmp(b))
    });
    let mut ranking: Vec<String> = voted.into_iter().cloned().collect();
    for candidate in table.global_ranking() {
        if !ranking.contains(&candidate) {
            ranking.push(candidate);
        }
    }
    ranking
}

/// Ranks all 14 sub-action labels as successors of `current` with the given
/// associated objects. Candidates seen at the resolved table level come
/// first (count desc, lexicographic ties); the remaining vocabulary labels
/// are appended in lexicographic order.
pub fn predict_next(
    current: &str,
    objects: &BTreeSet<String>,
    table: &FrequencyTable,
) -> Result<Vec<String>, BaselineError> {
    if !table.sub_vocabulary.contains(current) {
        return Err(BaselineError::UnknownLabel(current.to_string()));
    }
    let counts = table.resolve(current, objects);
    let mut ranking: Vec<String> = ranked(&counts)
        .into_iter()
        .filter(|(label, _)| table.candidates.iter().any(|c| c == label))
        .map(|(label, _)| label.to_string())
        .collect();
    let mut remaining: Vec<&String> = table
        .candidates
        .iter()
        .filter(|c| !ranking.contains(c))
        .collect();
    remaining.sort();
    ranking.extend(remaining.into_iter().cloned());
    Ok(ranking)
}

/// Serializes a fitted table as `key<TAB>candidate<TAB>count` lines. Pair
/// keys render as `label,object` (empty object for the objectless key),
/// label keys as the bare label, and global counts under the key `*`.
pub fn render_table(table: &FrequencyTable) -> Result<String, BaselineError> {
    let mut out = String::new();
    let check = |label: &str| -> Result<(), BaselineError> {
        if label.contains(',') || label.contains('\t') {
            return Err(BaselineError::UnserializableLabel(label.to_string()));
        }
        Ok(())
    };
    for (candidate, count) in &table.global {
        check(candidate)?;
        out.push_str(&format!("*\t{candidate}\t{count}\n"));
    }
    for (label, counts) in &table.label_counts {
        check(label)?;
        for (candidate, count) in counts {
            check(candidate)?;
            out.push_str(&format!("{label}\t{candidate}\t{count}\n"));
        }
    }
    for ((label, object), counts) in &table.pair_counts {
        check(label)?;
        let object = object.as_deref().unwrap_or("");
        check(object)?;
        for (candidate, count) in counts {
            check(candidate)?;
            out.push_str(&format!("{label},{object}\t{candidate}\t{count}\n"));
        }
    }
    Ok(out)
}

pub fn write_table(table: &FrequencyTable, path: &Path) -> Result<(), BaselineError> {
    fs::write(path, render_table(table)?).map_err(|source| BaselineError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses a table rendered by [`render_table`]; task/variant/vocabulary are
/// not stored in the file and must be supplied.
pub fn parse_table(
    text: &str,
    path: &Path,
    task: PredictionTask,
    variant: Variant,
    vocab: &Vocabulary,
) -> Result<FrequencyTable, BaselineError> {
    let mut table = FrequencyTable {
        task,
        variant,
        pair_counts: BTreeMap::new(),
        label_counts: BTreeMap::new(),
        global: Counts::new(),
        candidates: match task {
            PredictionTask::Parent => vocab.parents().to_vec(),
            PredictionTask::Next => vocab.sub_actions().to_vec(),
        },
        sub_vocabulary: vocab.sub_actions().iter().cloned().collect(),
    };
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(BaselineError::Parse {
                path: path.display().to_string(),
                line: lineno,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let count: u64 = cols[2].parse().map_err(|_| BaselineError::Parse {
            path: path.display().to_string(),
            line: lineno,
            message: format!("count {:?} is not an integer", cols[2]),
        })?;
        let candidate = cols[1].to_string();
        if cols[0] == "*" {
            table.global.insert(candidate, count);
        } else if let Some((label, object)) = cols[0].split_once(',') {
            let object = if object.is_empty() {
                None
            } else {
                Some(object.to_string())
            };
            table
                .pair_counts
                .entry((label.to_string(), object))
                .or_default()
                .insert(candidate, count);
        } else {
            table
                .label_counts
                .entry(cols[0].to_string())
                .or_default()
                .insert(candidate, count);
        }
    }
    Ok(table)
}

pub fn read_table(
    path: &Path,
    task: PredictionTask,
    variant: Variant,
    vocab: &Vocabulary,
) -> Result<FrequencyTable, BaselineError> {
    let text = fs::read_to_string(path).map_err(|source| BaselineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_table(&text, path, task, variant, vocab)
}
