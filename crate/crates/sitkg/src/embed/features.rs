//! Textual literal features: hashed character 3-gram counts, L2-normalized.
//!
//! Labels are short literal strings, so a fixed-length hashed n-gram vector
//! is a deterministic, vocabulary-free encoding. Hashing uses an inline
//! FNV-1a so feature vectors never depend on the standard library's hasher.

use std::collections::BTreeMap;

/// Default feature vector length.
pub const DEFAULT_FEATURE_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct LiteralFeatures {
    dim: usize,
    table: BTreeMap<String, Vec<f64>>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Feature vector for one label: counts of character 3-grams of `^label$`,
/// bucketed by hash, then L2-normalized.
pub fn featurize(label: &str, dim: usize) -> Vec<f64> {
    let mut vector = vec![0.0; dim];
    let padded: Vec<char> = std::iter::once('^')
        .chain(label.chars())
        .chain(std::iter::once('$'))
        .collect();
    if padded.len() < 3 {
        return vector;
    }
    for window in padded.windows(3) {
        let gram: String = window.iter().collect();
        let bucket = (fnv1a(gram.as_bytes()) % dim as u64) as usize;
        vector[bucket] += 1.0;
    }
    let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut vector {
            *v /= norm;
        }
    }
    vector
}

impl LiteralFeatures {
    pub fn build<'a>(labels: impl IntoIterator<Item = &'a str>, dim: usize) -> Self {
        let table = labels
            .into_iter()
            .map(|label| (label.to_string(), featurize(label, dim)))
            .collect();
        LiteralFeatures { dim, table }
    }

    pub fn from_table(dim: usize, table: BTreeMap<String, Vec<f64>>) -> Self {
        LiteralFeatures { dim, table }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.table.get(label).map(Vec::as_slice)
    }

    pub fn labels(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.table.iter().map(|(l, v)| (l.as_str(), v.as_slice()))
    }
}
