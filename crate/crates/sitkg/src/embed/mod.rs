//! Knowledge-graph embedding models, written from first principles.
//!
//! Implements translational (TransE, TransR, RotatE) and bilinear
//! (DistMult, ComplEx) scoring functions plus literal-gated variants of
//! DistMult and ComplEx, trained on the label-projected graph with filtered
//! negative sampling and mini-batch gradient descent using per-parameter
//! adaptive moments. Complex-valued vectors are stored as interleaved
//! (re, im) pairs. All math is `f64` and every analytic gradient is checked
//! against central differences (see [`train::gradient_check`]).

mod checkpoint;
mod features;
mod score;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use features::{featurize, LiteralFeatures, DEFAULT_FEATURE_DIM};
pub use train::{
    gradient_check, gradient_check_with_direction, negative_sample, train, LabelTriple,
    TrainOutcome,
};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::RelationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    TransE,
    TransR,
    DistMult,
    ComplEx,
    RotatE,
    DistMultLiteral,
    ComplExLiteral,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::TransE,
        ModelKind::TransR,
        ModelKind::DistMult,
        ModelKind::ComplEx,
        ModelKind::RotatE,
        ModelKind::DistMultLiteral,
        ModelKind::ComplExLiteral,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransE => "transe",
            ModelKind::TransR => "transr",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
            ModelKind::RotatE => "rotate",
            ModelKind::DistMultLiteral => "distmult-lit",
            ModelKind::ComplExLiteral => "complex-lit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Real numbers stored per entity: d, or 2d for complex-valued models.
    pub fn entity_dim(self, dim: usize) -> usize {
        match self {
            ModelKind::ComplEx | ModelKind::RotatE | ModelKind::ComplExLiteral => 2 * dim,
            _ => dim,
        }
    }

    pub fn relation_dim(self, dim: usize) -> usize {
        match self {
            ModelKind::ComplEx | ModelKind::RotatE | ModelKind::ComplExLiteral => 2 * dim,
            _ => dim,
        }
    }

    pub fn uses_projection_matrix(self) -> bool {
        self == ModelKind::TransR
    }

    pub fn uses_literals(self) -> bool {
        matches!(self, ModelKind::DistMultLiteral | ModelKind::ComplExLiteral)
    }

    /// Translational models train with the margin loss by default; bilinear
    /// ones with the softplus loss.
    pub fn default_loss(self) -> LossKind {
        match self {
            ModelKind::TransE | ModelKind::TransR | ModelKind::RotatE => LossKind::Margin,
            _ => LossKind::Softplus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Margin,
    Softplus,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Margin => "margin",
            LossKind::Softplus => "softplus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "margin" => Some(LossKind::Margin),
            "softplus" => Some(LossKind::Softplus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    pub model: ModelKind,
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub negatives: usize,
    pub margin: f64,
    /// None picks the model's default loss.
    pub loss: Option<LossKind>,
    pub seed: u64,
    pub reg_weight: f64,
    pub feature_dim: usize,
    /// Workers for the opt-in sharded training mode; 1 is the
    /// bit-reproducible single-threaded default.
    pub threads: usize,
}

impl EmbeddingConfig {
    pub fn new(model: ModelKind) -> Self {
        EmbeddingConfig {
            model,
            dim: 64,
            epochs: 200,
            learning_rate: 0.01,
            batch_size: 128,
            negatives: 4,
            margin: 1.0,
            loss: None,
            seed: 0,
            reg_weight: 1e-5,
            feature_dim: DEFAULT_FEATURE_DIM,
            threads: 1,
        }
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss.unwrap_or_else(|| self.model.default_loss())
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim == 0 {
            return Err(EmbedError::InvalidConfig("dim must be >= 1".into()));
        }
        if self.negatives == 0 {
            return Err(EmbedError::InvalidConfig("negatives must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(EmbedError::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.margin <= 0.0 {
            return Err(EmbedError::InvalidConfig("margin must be > 0".into()));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(EmbedError::InvalidConfig(
                "learning rate must be finite and >= 0".into(),
            ));
        }
        if self.reg_weight < 0.0 {
            return Err(EmbedError::InvalidConfig("reg weight must be >= 0".into()));
        }
        if self.model.uses_literals() && self.feature_dim == 0 {
            return Err(EmbedError::InvalidConfig(
                "feature dim must be >= 1 for literal models".into(),
            ));
        }
        if self.threads == 0 {
            return Err(EmbedError::InvalidConfig("threads must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("entity {0:?} is not in the embedding table")]
    UnknownEntity(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no valid corruption exists for the triple (vocabulary exhausted)")]
    NoValidCorruption,
    #[error("training diverged to a non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("projection has no triples to train on")]
    EmptyProjection,
    #[error("invalid embedding config: {0}")]
    InvalidConfig(String),
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

/// Sigmoid-gated combination of an entity vector with its literal features:
/// `g ∘ tanh(Wz·[e; l]) + (1 − g) ∘ e` with `g = σ(Wg·[e; l] + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiteralGate {
    pub entity_dim: usize,
    pub feat_dim: usize,
    /// Row-major `entity_dim × (entity_dim + feat_dim)`.
    pub w_gate: Vec<f64>,
    /// Row-major `entity_dim × (entity_dim + feat_dim)`.
    pub w_transform: Vec<f64>,
    pub bias: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LiteralGate {
    pub fn in_dim(&self) -> usize {
        self.entity_dim + self.feat_dim
    }

    /// Applies the gate to one entity vector.
    pub fn apply(&self, entity: &[f64], features: &[f64]) -> Result<Vec<f64>, EmbedError> {
        if entity.len() != self.entity_dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.entity_dim,
                got: entity.len(),
            });
        }
        if features.len() != self.feat_dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.feat_dim,
                got: features.len(),
            });
        }
        let in_dim = self.in_dim();
        let mut out = vec![0.0; self.entity_dim];
        for i in 0..self.entity_dim {
            let row_g = &self.w_gate[i * in_dim..(i + 1) * in_dim];
            let row_z = &self.w_transform[i * in_dim..(i + 1) * in_dim];
            let mut acc_g = self.bias[i];
            let mut acc_z = 0.0;
            for (j, e) in entity.iter().enumerate() {
                acc_g += row_g[j] * e;
                acc_z += row_z[j] * e;
            }
            for (j, l) in features.iter().enumerate() {
                acc_g += row_g[self.entity_dim + j] * l;
                acc_z += row_z[self.entity_dim + j] * l;
            }
            let g = sigmoid(acc_g);
            out[i] = g * acc_z.tanh() + (1.0 - g) * entity[i];
        }
        Ok(out)
    }
}

/// Offsets into the flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub entity_dim: usize,
    pub relation_dim: usize,
    pub entity_count: usize,
    pub relations_off: usize,
    pub transr_off: Option<usize>,
    pub gate_off: Option<usize>,
    pub feat_dim: usize,
    pub len: usize,
}

impl Layout {
    pub(crate) fn new(kind: ModelKind, dim: usize, feat_dim: usize, entity_count: usize) -> Self {
        let entity_dim = kind.entity_dim(dim);
        let relation_dim = kind.relation_dim(dim);
        let relations_off = entity_count * entity_dim;
        let mut cursor = relations_off + RelationKind::ALL.len() * relation_dim;
        let transr_off = if kind.uses_projection_matrix() {
            let off = cursor;
            cursor += RelationKind::ALL.len() * dim * dim;
            Some(off)
        } else {
            None
        };
        let gate_off = if kind.uses_literals() {
            let off = cursor;
            let in_dim = entity_dim + feat_dim;
            cursor += 2 * entity_dim * in_dim + entity_dim;
            Some(off)
        } else {
            None
        };
        Layout {
            entity_dim,
            relation_dim,
            entity_count,
            relations_off,
            transr_off,
            gate_off,
            feat_dim: if kind.uses_literals() { feat_dim } else { 0 },
            len: cursor,
        }
    }

    pub(crate) fn entity_range(&self, idx: usize) -> std::ops::Range<usize> {
        idx * self.entity_dim..(idx + 1) * self.entity_dim
    }

    pub(crate) fn relation_range(&self, idx: usize) -> std::ops::Range<usize> {
        let start = self.relations_off + idx * self.relation_dim;
        start..start + self.relation_dim
    }

    pub(crate) fn transr_range(&self, idx: usize, dim: usize) -> std::ops::Range<usize> {
        let base = self.transr_off.expect("TransR layout");
        let start = base + idx * dim * dim;
        start..start + dim * dim
    }

    /// (w_gate, w_transform, bias) ranges.
    pub(crate) fn gate_ranges(
        &self,
    ) -> (
        std::ops::Range<usize>,
        std::ops::Range<usize>,
        std::ops::Range<usize>,
    ) {
        let base = self.gate_off.expect("literal layout");
        let in_dim = self.entity_dim + self.feat_dim;
        let block = self.entity_dim * in_dim;
        (
            base..base + block,
            base + block..base + 2 * block,
            base + 2 * block..base + 2 * block + self.entity_dim,
        )
    }
}

/// Trained model parameters: a flat `f64` buffer plus label/relation
/// indices, and (for literal variants) the fixed feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub dim: usize,
    pub(crate) entity_index: BTreeMap<String, usize>,
    pub(crate) labels_by_idx: Vec<String>,
    pub(crate) data: Vec<f64>,
    pub(crate) layout: Layout,
    pub(crate) literals: Option<LiteralFeatures>,
}

impl ModelParams {
    pub fn entity_labels(&self) -> impl Iterator<Item = &str> {
        self.entity_index.keys().map(String::as_str)
    }

    pub fn has_entity(&self, label: &str) -> bool {
        self.entity_index.contains_key(label)
    }

    pub fn entity_vector(&self, label: &str) -> Option<&[f64]> {
        let idx = *self.entity_index.get(label)?;
        Some(&self.data[self.layout.entity_range(idx)])
    }

    pub fn relation_vector(&self, relation: RelationKind) -> &[f64] {
        &self.data[self.layout.relation_range(relation_index(relation))]
    }

    pub fn projection_matrix(&self, relation: RelationKind) -> Option<&[f64]> {
        self.layout.transr_off?;
        Some(&self.data[self.layout.transr_range(relation_index(relation), self.dim)])
    }

    /// Materializes the literal gate parameters, if this is a literal model.
    pub fn literal_gate(&self) -> Option<LiteralGate> {
        let (wg, wz, b) = match self.layout.gate_off {
            Some(_) => self.layout.gate_ranges(),
            None => return None,
        };
        Some(LiteralGate {
            entity_dim: self.layout.entity_dim,
            feat_dim: self.layout.feat_dim,
            w_gate: self.data[wg].to_vec(),
            w_transform: self.data[wz].to_vec(),
            bias: self.data[b].to_vec(),
        })
    }

    pub fn literal_features(&self) -> Option<&LiteralFeatures> {
        self.literals.as_ref()
    }

    pub(crate) fn entity_idx(&self, label: &str) -> Result<usize, EmbedError> {
        self.entity_index
            .get(label)
            .copied()
            .ok_or_else(|| EmbedError::UnknownEntity(label.to_string()))
    }
}

pub(crate) fn relation_index(relation: RelationKind) -> usize {
    RelationKind::ALL
        .iter()
        .position(|r| *r == relation)
        .expect("relation listed")
}

/// Scores one label-level triple under the model. Higher is more plausible.
pub fn score(
    params: &ModelParams,
    head: &str,
    relation: RelationKind,
    tail: &str,
) -> Result<f64, EmbedError> {
    let h = params.entity_idx(head)?;
    let t = params.entity_idx(tail)?;
    Ok(score::score_indices(
        params,
        h,
        relation_index(relation),
        t,
    ))
}

/// A ranking query over kind-compatible candidate labels.
pub enum RankQuery<'a> {
    /// Score each parent candidate as the head of the component's
    /// has_element triples plus its has_actor triple.
    Parent {
        sub_labels: &'a [String],
        actor: &'a str,
        candidates: &'a [String],
    },
    /// Score each candidate as the tail of (current, has_next, candidate).
    Next {
        current: &'a str,
        candidates: &'a [String],
    },
}

/// Sorts candidates by score descending, lexicographic on ties.
pub fn rank_candidates(
    params: &ModelParams,
    query: &RankQuery,
) -> Result<Vec<String>, EmbedError> {
    let mut scored: Vec<(String, f64)> = Vec::new();
    match query {
        RankQuery::Parent {
            sub_labels,
            actor,
            candidates,
        } => {
            for candidate in *candidates {
                let mut total = score(params, candidate, RelationKind::HasActor, actor)?;
                for sub in *sub_labels {
                    total += score(params, candidate, RelationKind::HasElement, sub)?;
                }
                scored.push((candidate.clone(), total));
            }
        }
        RankQuery::Next {
            current,
            candidates,
        } => {
            for candidate in *candidates {
                let s = score(params, current, RelationKind::HasNext, candidate)?;
                scored.push((candidate.clone(), s));
            }
        }
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(scored.into_iter().map(|(label, _)| label).collect())
}
