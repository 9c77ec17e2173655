//! Closed label vocabularies for parent actions and sub-actions.
//!
//! Parent-action and sub-action labels are closed sets (9 and 14 labels);
//! actor and object labels are open. The defaults below match the household
//! activity dataset the toolkit targets, and can be overridden with a
//! vocabulary file (see [`Vocabulary::from_file`]).

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// The 9 parent-action labels, in canonical order.
pub const PARENT_ACTIONS: [&str; 9] = [
    "cooking",
    "cooking_with_bowls",
    "pouring",
    "wiping",
    "cereals",
    "hard_drive",
    "free_hard_drive",
    "hammering",
    "sawing",
];

/// The 14 sub-action labels, in canonical order.
pub const SUB_ACTIONS: [&str; 14] = [
    "idle", "approach", "retreat", "lift", "place", "hold", "stir", "pour", "cut", "drink",
    "wipe", "hammer", "saw", "screw",
];

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("failed to read vocabulary file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("vocabulary line {line}: label outside any section")]
    LabelOutsideSection { line: usize },
    #[error("vocabulary line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("vocabulary line {line}: duplicate label {label:?}")]
    DuplicateLabel { line: usize, label: String },
    #[error("vocabulary is missing section [{name}]")]
    MissingSection { name: String },
}

/// Closed candidate vocabularies for the two prediction tasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    parents: Vec<String>,
    sub_actions: Vec<String>,
    parent_set: BTreeSet<String>,
    sub_set: BTreeSet<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new(
            PARENT_ACTIONS.iter().map(|s| s.to_string()).collect(),
            SUB_ACTIONS.iter().map(|s| s.to_string()).collect(),
        )
    }
}

impl Vocabulary {
    fn new(parents: Vec<String>, sub_actions: Vec<String>) -> Self {
        let parent_set = parents.iter().cloned().collect();
        let sub_set = sub_actions.iter().cloned().collect();
        Self {
            parents,
            sub_actions,
            parent_set,
            sub_set,
        }
    }

    /// Parent-action labels in canonical order.
    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    /// Sub-action labels in canonical order.
    pub fn sub_actions(&self) -> &[String] {
        &self.sub_actions
    }

    pub fn is_parent(&self, label: &str) -> bool {
        self.parent_set.contains(label)
    }

    pub fn is_sub_action(&self, label: &str) -> bool {
        self.sub_set.contains(label)
    }

    /// Parses a vocabulary file: `[parent_actions]` and `[sub_actions]`
    /// section headers followed by one label per line. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, VocabError> {
        let mut parents: Vec<String> = Vec::new();
        let mut subs: Vec<String> = Vec::new();
        let mut section: Option<&str> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = match name {
                    "parent_actions" => Some("parent_actions"),
                    "sub_actions" => Some("sub_actions"),
                    other => {
                        return Err(VocabError::UnknownSection {
                            line: lineno,
                            name: other.to_string(),
                        })
                    }
                };
                continue;
            }
            let target = match section {
                Some("parent_actions") => &mut parents,
                Some("sub_actions") => &mut subs,
                _ => return Err(VocabError::LabelOutsideSection { line: lineno }),
            };
            if target.iter().any(|l| l == line) {
                return Err(VocabError::DuplicateLabel {
                    line: lineno,
                    label: line.to_string(),
                });
            }
            target.push(line.to_string());
        }
        if parents.is_empty() {
            return Err(VocabError::MissingSection {
                name: "parent_actions".to_string(),
            });
        }
        if subs.is_empty() {
            return Err(VocabError::MissingSection {
                name: "sub_actions".to_string(),
            });
        }
        Ok(Self::new(parents, subs))
    }

    pub fn from_file(path: &Path) -> Result<Self, VocabError> {
        let text = fs::read_to_string(path).map_err(|source| VocabError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_cardinalities() {
        let v = Vocabulary::default();
        assert_eq!(v.parents().len(), 9);
        assert_eq!(v.sub_actions().len(), 14);
        assert!(v.is_parent("cooking_with_bowls"));
        assert!(v.is_sub_action("screw"));
        assert!(!v.is_parent("stir"));
        assert!(!v.is_sub_action("cooking"));
    }

    #[test]
    fn parse_round_trip() {
        let text = "[parent_actions]\ncooking\nsawing # workshop\n\n[sub_actions]\nstir\npour\n";
        let v = Vocabulary::parse(text).unwrap();
        assert_eq!(v.parents(), &["cooking".to_string(), "sawing".to_string()]);
        assert_eq!(v.sub_actions(), &["stir".to_string(), "pour".to_string()]);
    }

    #[test]
    fn parse_rejects_stray_labels() {
        assert!(matches!(
            Vocabulary::parse("cooking\n"),
            Err(VocabError::LabelOutsideSection { line: 1 })
        ));
        assert!(matches!(
            Vocabulary::parse("[nope]\n"),
            Err(VocabError::UnknownSection { line: 1, .. })
        ));
        assert!(matches!(
            Vocabulary::parse("[parent_actions]\ncooking\ncooking\n"),
            Err(VocabError::DuplicateLabel { line: 3, .. })
        ));
    }
}
