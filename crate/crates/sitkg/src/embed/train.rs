//! Training loop: count-weighted positive sampling, filtered corruption,
//! mini-batch descent with per-parameter adaptive moments, and a
//! central-difference gradient checker.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::score::{project_rotate_relations, score_with_grad};
use super::{
    relation_index, EmbedError, EmbeddingConfig, Layout, LiteralFeatures, LossKind, ModelParams,
};
use crate::graph::{LabelProjection, NodeKind, RelationKind};
use crate::vocab::Vocabulary;

/// A label-level triple (the unit embeddings are trained on).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LabelTriple {
    pub head: String,
    pub relation: RelationKind,
    pub tail: String,
}

impl LabelTriple {
    pub fn new(head: impl Into<String>, relation: RelationKind, tail: impl Into<String>) -> Self {
        LabelTriple {
            head: head.into(),
            relation,
            tail: tail.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean pair loss per epoch.
    pub epoch_losses: Vec<f64>,
}

type IndexTriple = (usize, usize, usize);

struct TrainSetup {
    params: ModelParams,
    positives: Vec<IndexTriple>,
    cumulative_weights: Vec<f64>,
    positive_set: BTreeSet<IndexTriple>,
    /// Per relation: [head candidates, tail candidates] as entity indices.
    candidates: Vec<[Vec<usize>; 2]>,
}

fn init_params(
    config: &EmbeddingConfig,
    labels: &BTreeMap<String, BTreeSet<NodeKind>>,
    rng: &mut ChaCha8Rng,
) -> ModelParams {
    let kind = config.model;
    let feat_dim = if kind.uses_literals() {
        config.feature_dim
    } else {
        0
    };
    let layout = Layout::new(kind, config.dim, feat_dim, labels.len());
    let mut data = vec![0.0; layout.len];
    let bound = 0.5 / (config.dim as f64).sqrt();

    for i in 0..layout.relations_off {
        data[i] = rng.random_range(-bound..=bound);
    }
    for relation in RelationKind::ALL {
        let range = layout.relation_range(relation_index(relation));
        if kind == super::ModelKind::RotatE {
            // Unit-modulus phases.
            for i in 0..config.dim {
                let phase = rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI);
                data[range.start + 2 * i] = phase.cos();
                data[range.start + 2 * i + 1] = phase.sin();
            }
        } else {
            for i in range {
                data[i] = rng.random_range(-bound..=bound);
            }
        }
    }
    if kind.uses_projection_matrix() {
        for relation in RelationKind::ALL {
            let range = layout.transr_range(relation_index(relation), config.dim);
            for (offset, i) in range.enumerate() {
                data[i] = if offset % (config.dim + 1) == 0 { 1.0 } else { 0.0 };
            }
        }
    }
    if kind.uses_literals() {
        let (wg, wz, bias) = layout.gate_ranges();
        for i in wg.chain(wz) {
            data[i] = rng.random_range(-bound..=bound);
        }
        for i in bias {
            data[i] = 0.0;
        }
    }

    let entity_index: BTreeMap<String, usize> = labels
        .keys()
        .enumerate()
        .map(|(i, l)| (l.clone(), i))
        .collect();
    let labels_by_idx: Vec<String> = labels.keys().cloned().collect();
    let literals = if kind.uses_literals() {
        Some(LiteralFeatures::build(
            labels_by_idx.iter().map(String::as_str),
            config.feature_dim,
        ))
    } else {
        None
    };
    ModelParams {
        kind,
        dim: config.dim,
        entity_index,
        labels_by_idx,
        data,
        layout,
        literals,
    }
}

/// Entity universe: projection labels per kind, plus the closed parent and
/// sub-action vocabularies so every rankable candidate has an embedding.
fn collect_labels(
    projection: &LabelProjection,
    vocab: &Vocabulary,
) -> BTreeMap<String, BTreeSet<NodeKind>> {
    let mut labels: BTreeMap<String, BTreeSet<NodeKind>> = BTreeMap::new();
    for kind in NodeKind::ALL {
        for label in projection.labels_of_kind(kind) {
            labels.entry(label.to_string()).or_default().insert(kind);
        }
    }
    for parent in vocab.parents() {
        labels
            .entry(parent.clone())
            .or_default()
            .insert(NodeKind::ParentAction);
    }
    for sub in vocab.sub_actions() {
        labels
            .entry(sub.clone())
            .or_default()
            .insert(NodeKind::SubAction);
    }
    labels
}

fn setup(
    projection: &LabelProjection,
    config: &EmbeddingConfig,
    vocab: &Vocabulary,
    rng: &mut ChaCha8Rng,
) -> Result<TrainSetup, EmbedError> {
    if projection.is_empty() {
        return Err(EmbedError::EmptyProjection);
    }
    let labels = collect_labels(projection, vocab);
    let params = init_params(config, &labels, rng);

    let mut positives = Vec::new();
    let mut weights = Vec::new();
    let mut positive_set = BTreeSet::new();
    for relation in RelationKind::ALL {
        let r = relation_index(relation);
        for (head, tail, count) in projection.pairs(relation) {
            let triple = (params.entity_index[head], r, params.entity_index[tail]);
            positives.push(triple);
            weights.push(count as f64);
            positive_set.insert(triple);
        }
    }

    let by_kind = |kind: NodeKind| -> Vec<usize> {
        labels
            .iter()
            .filter(|(_, kinds)| kinds.contains(&kind))
            .map(|(label, _)| params.entity_index[label])
            .collect()
    };
    let candidates: Vec<[Vec<usize>; 2]> = RelationKind::ALL
        .iter()
        .map(|relation| [by_kind(relation.head_kind()), by_kind(relation.tail_kind())])
        .collect();

    // A positive whose every kind-compatible corruption is itself a known
    // positive (a saturated relation slice) carries no contrastive signal;
    // give it zero sampling weight but keep it in the filter set.
    let has_corruption = |&(h, r, t): &IndexTriple| -> bool {
        candidates[r][0]
            .iter()
            .any(|&c| c != h && !positive_set.contains(&(c, r, t)))
            || candidates[r][1]
                .iter()
                .any(|&c| c != t && !positive_set.contains(&(h, r, c)))
    };
    let mut cumulative_weights = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for (triple, w) in positives.iter().zip(weights) {
        if has_corruption(triple) {
            acc += w;
        }
        cumulative_weights.push(acc);
    }
    if acc <= 0.0 {
        return Err(EmbedError::NoValidCorruption);
    }

    Ok(TrainSetup {
        params,
        positives,
        cumulative_weights,
        positive_set,
        candidates,
    })
}

fn sample_positive(setup: &TrainSetup, rng: &mut ChaCha8Rng) -> IndexTriple {
    let total = *setup.cumulative_weights.last().expect("non-empty positives");
    let roll = rng.random_range(0.0..total);
    let idx = setup
        .cumulative_weights
        .partition_point(|acc| *acc <= roll)
        .min(setup.positives.len() - 1);
    setup.positives[idx]
}

/// Corrupts head or tail (fair coin) with a uniform kind-compatible label,
/// filtered against known positives. Falls back to the other side when one
/// side has no valid corruption.
fn corrupt(
    positive: IndexTriple,
    positive_set: &BTreeSet<IndexTriple>,
    candidates: &[[Vec<usize>; 2]],
    rng: &mut ChaCha8Rng,
) -> Result<IndexTriple, EmbedError> {
    let (h, r, t) = positive;
    let head_first = rng.random_bool(0.5);
    let sides = if head_first { [0usize, 1] } else { [1, 0] };
    for side in sides {
        let pool = &candidates[r][side];
        let valid: Vec<usize> = pool
            .iter()
            .copied()
            .filter(|&candidate| {
                let corrupted = if side == 0 {
                    (candidate, r, t)
                } else {
                    (h, r, candidate)
                };
                corrupted != positive && !positive_set.contains(&corrupted)
            })
            .collect();
        if !valid.is_empty() {
            let pick = valid[rng.random_range(0..valid.len())];
            return Ok(if side == 0 { (pick, r, t) } else { (h, r, pick) });
        }
    }
    Err(EmbedError::NoValidCorruption)
}

/// Filtered corruption of one label triple, drawing from the projection's
/// kind-compatible label sets. Deterministic per seed.
pub fn negative_sample(
    positive: &LabelTriple,
    projection: &LabelProjection,
    k: usize,
    seed: u64,
) -> Result<Vec<LabelTriple>, EmbedError> {
    if k == 0 {
        return Err(EmbedError::InvalidConfig("k must be >= 1".into()));
    }
    let mut labels: Vec<String> = Vec::new();
    let mut kinds: BTreeMap<String, BTreeSet<NodeKind>> = BTreeMap::new();
    for kind in NodeKind::ALL {
        for label in projection.labels_of_kind(kind) {
            kinds.entry(label.to_string()).or_default().insert(kind);
        }
    }
    for label in kinds.keys() {
        labels.push(label.clone());
    }
    let index: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let lookup = |label: &str| -> Result<usize, EmbedError> {
        index
            .get(label)
            .copied()
            .ok_or_else(|| EmbedError::UnknownEntity(label.to_string()))
    };

    let r = relation_index(positive.relation);
    let positive_idx = (lookup(&positive.head)?, r, lookup(&positive.tail)?);
    let mut positive_set = BTreeSet::new();
    for relation in RelationKind::ALL {
        let ri = relation_index(relation);
        for (head, tail, _) in projection.pairs(relation) {
            positive_set.insert((index[head], ri, index[tail]));
        }
    }
    let by_kind = |kind: NodeKind| -> Vec<usize> {
        labels
            .iter()
            .enumerate()
            .filter(|(_, l)| kinds[*l].contains(&kind))
            .map(|(i, _)| i)
            .collect()
    };
    let candidates: Vec<[Vec<usize>; 2]> = RelationKind::ALL
        .iter()
        .map(|relation| [by_kind(relation.head_kind()), by_kind(relation.tail_kind())])
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let (h, _, t) = corrupt(positive_idx, &positive_set, &candidates, &mut rng)?;
        out.push(LabelTriple::new(
            labels[h].clone(),
            positive.relation,
            labels[t].clone(),
        ));
    }
    Ok(out)
}

type Batch = Vec<(IndexTriple, Vec<IndexTriple>)>;

fn sample_batch(
    setup: &TrainSetup,
    config: &EmbeddingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Batch, EmbedError> {
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.batch_size {
        let positive = sample_positive(setup, rng);
        let mut negatives = Vec::with_capacity(config.negatives);
        for _ in 0..config.negatives {
            negatives.push(corrupt(
                positive,
                &setup.positive_set,
                &setup.candidates,
                rng,
            )?);
        }
        batch.push((positive, negatives));
    }
    Ok(batch)
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean pair loss over the batch plus L2 regularization; optionally
/// accumulates the full gradient. This single definition is shared by the
/// optimizer and the gradient checker.
fn batch_loss_and_grad(
    params: &ModelParams,
    batch: &Batch,
    loss_kind: LossKind,
    margin: f64,
    reg_weight: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let pair_count: usize = batch.iter().map(|(_, negs)| negs.len()).sum();
    if pair_count == 0 {
        return 0.0;
    }
    let scale = 1.0 / pair_count as f64;
    let mut total = 0.0;
    let mut scratch: Vec<f64> = Vec::new();
    for ((ph, pr, pt), negatives) in batch {
        let s_pos = super::score::score_indices(params, *ph, *pr, *pt);
        let mut pos_upstream = 0.0;
        for (nh, nr, nt) in negatives {
            let s_neg = super::score::score_indices(params, *nh, *nr, *nt);
            let (loss, d_pos, d_neg) = match loss_kind {
                LossKind::Margin => {
                    let residual = margin - s_pos + s_neg;
                    if residual > 0.0 {
                        (residual, -1.0, 1.0)
                    } else {
                        (0.0, 0.0, 0.0)
                    }
                }
                LossKind::Softplus => (
                    softplus(-s_pos) + softplus(s_neg),
                    -sigmoid(-s_pos),
                    sigmoid(s_neg),
                ),
            };
            total += loss;
            pos_upstream += d_pos;
            if let Some(grad) = grad.as_deref_mut() {
                if d_neg != 0.0 {
                    score_with_grad(params, *nh, *nr, *nt, d_neg * scale, grad);
                }
            }
        }
        if let Some(grad) = grad.as_deref_mut() {
            if pos_upstream != 0.0 {
                score_with_grad(params, *ph, *pr, *pt, pos_upstream * scale, grad);
            }
        }
        let _ = &mut scratch;
    }
    let mut loss = total * scale;
    if reg_weight > 0.0 {
        loss += reg_weight * params.data.iter().map(|v| v * v).sum::<f64>();
        if let Some(grad) = grad.as_deref_mut() {
            for (g, v) in grad.iter_mut().zip(&params.data) {
                *g += 2.0 * reg_weight * v;
            }
        }
    }
    loss
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const BETA1: f64 = 0.9;
        const BETA2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let correction1 = 1.0 - BETA1.powi(self.t as i32);
        let correction2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * grad[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            let m_hat = self.m[i] / correction1;
            let v_hat = self.v[i] / correction2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
        }
    }
}

/// Trains a model on the label projection. Single-threaded mode is
/// bit-reproducible per seed; `threads > 1` shards each epoch's batches
/// across workers and averages parameters at epoch end (reproducible for a
/// fixed thread count, but not bit-identical to the single-threaded run).
pub fn train(
    projection: &LabelProjection,
    config: &EmbeddingConfig,
    vocab: &Vocabulary,
) -> Result<TrainOutcome, EmbedError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut setup = setup(projection, config, vocab, &mut rng)?;
    let loss_kind = config.loss_kind();
    let batches_per_epoch = setup.positives.len().div_ceil(config.batch_size).max(1);

    let mut adam = Adam::new(setup.params.data.len());
    let mut grad = vec![0.0; setup.params.data.len()];
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let batches: Vec<Batch> = (0..batches_per_epoch)
            .map(|_| sample_batch(&setup, config, &mut rng))
            .collect::<Result<_, _>>()?;
        let epoch_loss = if config.threads <= 1 {
            let mut acc = 0.0;
            for batch in &batches {
                grad.fill(0.0);
                let loss = batch_loss_and_grad(
                    &setup.params,
                    batch,
                    loss_kind,
                    config.margin,
                    config.reg_weight,
                    Some(&mut grad),
                );
                if !loss.is_finite() {
                    return Err(EmbedError::NonFiniteLoss { epoch });
                }
                adam.step(&mut setup.params.data, &grad, config.learning_rate);
                project_rotate_relations(&mut setup.params);
                acc += loss;
            }
            acc / batches.len() as f64
        } else {
            let shard_count = config.threads.min(batches.len().max(1));
            let shards: Vec<Vec<&Batch>> = (0..shard_count)
                .map(|w| batches.iter().skip(w).step_by(shard_count).collect())
                .collect();
            let results: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>, u64, f64), EmbedError>> =
                std::thread::scope(|scope| {
                    let handles: Vec<_> = shards
                        .iter()
                        .map(|shard| {
                            let params = setup.params.clone();
                            let adam_m = adam.m.clone();
                            let adam_v = adam.v.clone();
                            let adam_t = adam.t;
                            scope.spawn(move || {
                                let mut params = params;
                                let mut worker_adam = Adam {
                                    m: adam_m,
                                    v: adam_v,
                                    t: adam_t,
                                };
                                let mut grad = vec![0.0; params.data.len()];
                                let mut acc = 0.0;
                                for batch in shard {
                                    grad.fill(0.0);
                                    let loss = batch_loss_and_grad(
                                        &params,
                                        batch,
                                        loss_kind,
                                        config.margin,
                                        config.reg_weight,
                                        Some(&mut grad),
                                    );
                                    if !loss.is_finite() {
                                        return Err(EmbedError::NonFiniteLoss { epoch });
                                    }
                                    worker_adam.step(
                                        &mut params.data,
                                        &grad,
                                        config.learning_rate,
                                    );
                                    project_rotate_relations(&mut params);
                                    acc += loss;
                                }
                                Ok((params.data, worker_adam.m, worker_adam.v, worker_adam.t, acc))
                            })
                        })
                        .collect();
                    handles.into_iter().map(|h| h.join().unwrap()).collect()
                });
            let mut merged_data = vec![0.0; setup.params.data.len()];
            let mut merged_m = vec![0.0; adam.m.len()];
            let mut merged_v = vec![0.0; adam.v.len()];
            let mut max_t = adam.t;
            let mut acc = 0.0;
            let worker_count = results.len() as f64;
            for result in results {
                let (data, m, v, t, loss) = result?;
                for i in 0..merged_data.len() {
                    merged_data[i] += data[i] / worker_count;
                    merged_m[i] += m[i] / worker_count;
                    merged_v[i] += v[i] / worker_count;
                }
                max_t = max_t.max(t);
                acc += loss;
            }
            setup.params.data = merged_data;
            adam.m = merged_m;
            adam.v = merged_v;
            adam.t = max_t;
            project_rotate_relations(&mut setup.params);
            acc / batches.len() as f64
        };
        epoch_losses.push(epoch_loss);
    }

    Ok(TrainOutcome {
        params: setup.params,
        epoch_losses,
    })
}

/// Small fixed projection used as the gradient-check workload.
fn gradcheck_projection() -> LabelProjection {
    let mut p = LabelProjection::default();
    p.add_label(NodeKind::ParentAction, "cooking");
    p.add_label(NodeKind::ParentAction, "sawing");
    p.add_label(NodeKind::Actor, "subject_1");
    for sub in ["approach", "lift", "stir", "place"] {
        p.add_label(NodeKind::SubAction, sub);
    }
    p.add_label(NodeKind::Object, "whisk");
    p.add_label(NodeKind::Object, "pot");
    p.add(RelationKind::HasActor, "cooking", "subject_1", 3);
    p.add(RelationKind::HasElement, "cooking", "approach", 3);
    p.add(RelationKind::HasElement, "cooking", "stir", 2);
    p.add(RelationKind::HasElement, "sawing", "lift", 1);
    p.add(RelationKind::HasNext, "approach", "lift", 3);
    p.add(RelationKind::HasNext, "lift", "stir", 2);
    p.add(RelationKind::HasNext, "stir", "place", 4);
    p.add(RelationKind::HasObject, "stir", "whisk", 2);
    p.add(RelationKind::HasObject, "stir", "pot", 1);
    p.add(RelationKind::HasObject, "lift", "whisk", 2);
    p
}

/// Relative error between the analytic directional derivative of the batch
/// loss and its central-difference estimate, at a seeded random point along
/// a seeded random direction.
pub fn gradient_check(
    config: &EmbeddingConfig,
    point_seed: u64,
    direction_seed: u64,
    step: f64,
) -> Result<f64, EmbedError> {
    let mut direction_rng = ChaCha8Rng::seed_from_u64(direction_seed);
    gradient_check_impl(config, point_seed, step, |len| {
        (0..len)
            .map(|_| direction_rng.random_range(-1.0..1.0))
            .collect()
    })
}

/// Gradient check along an explicit direction (zero direction returns 0).
pub fn gradient_check_with_direction(
    config: &EmbeddingConfig,
    point_seed: u64,
    direction: &[f64],
    step: f64,
) -> Result<f64, EmbedError> {
    let owned = direction.to_vec();
    gradient_check_impl(config, point_seed, step, move |len| {
        if owned.len() == len {
            owned.clone()
        } else {
            let mut padded = owned.clone();
            padded.resize(len, 0.0);
            padded
        }
    })
}

fn gradient_check_impl(
    config: &EmbeddingConfig,
    point_seed: u64,
    step: f64,
    make_direction: impl FnOnce(usize) -> Vec<f64>,
) -> Result<f64, EmbedError> {
    config.validate()?;
    if !(1e-6..=1e-3).contains(&step) {
        return Err(EmbedError::InvalidConfig(format!(
            "gradient-check step {step} is outside [1e-6, 1e-3]"
        )));
    }
    let projection = gradcheck_projection();
    let vocab = Vocabulary::default();
    let mut rng = ChaCha8Rng::seed_from_u64(point_seed);
    let setup = setup(&projection, config, &vocab, &mut rng)?;
    let batch = sample_batch(&setup, config, &mut rng)?;
    let loss_kind = config.loss_kind();

    let mut direction = make_direction(setup.params.data.len());
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    for v in &mut direction {
        *v /= norm;
    }

    let mut grad = vec![0.0; setup.params.data.len()];
    batch_loss_and_grad(
        &setup.params,
        &batch,
        loss_kind,
        config.margin,
        config.reg_weight,
        Some(&mut grad),
    );
    let analytic: f64 = grad.iter().zip(&direction).map(|(g, u)| g * u).sum();

    let eval_at = |offset: f64| -> f64 {
        let mut shifted = setup.params.clone();
        for (p, u) in shifted.data.iter_mut().zip(&direction) {
            *p += offset * u;
        }
        batch_loss_and_grad(
            &shifted,
            &batch,
            loss_kind,
            config.margin,
            config.reg_weight,
            None,
        )
    };
    let numeric = (eval_at(step) - eval_at(-step)) / (2.0 * step);

    let denom = analytic.abs().max(numeric.abs()).max(1e-12);
    Ok((analytic - numeric).abs() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{rank_candidates, score, ModelKind, RankQuery};

    fn small_config(model: ModelKind) -> EmbeddingConfig {
        let mut config = EmbeddingConfig::new(model);
        config.dim = 8;
        config.feature_dim = 16;
        config.batch_size = 16;
        config.epochs = 10;
        config
    }

    #[test]
    fn gradient_checks_pass_for_all_models_and_losses() {
        for model in ModelKind::ALL {
            let config = small_config(model);
            let err = gradient_check(&config, 7, 11, 1e-5).unwrap();
            assert!(
                err < 1e-4,
                "gradient check failed for {} (rel err {err:.3e})",
                model.name()
            );
        }
        // Cross-check each scorer under the other loss as well.
        for model in ModelKind::ALL {
            for loss in [LossKind::Margin, LossKind::Softplus] {
                let mut config = small_config(model);
                config.loss = Some(loss);
                let err = gradient_check(&config, 3, 5, 1e-5).unwrap();
                assert!(
                    err < 1e-4,
                    "gradient check failed for {} with {} loss (rel err {err:.3e})",
                    model.name(),
                    loss.name()
                );
            }
        }
    }

    #[test]
    fn gradient_check_zero_direction_is_zero() {
        let config = small_config(ModelKind::TransE);
        let err =
            gradient_check_with_direction(&config, 7, &[0.0, 0.0, 0.0], 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn gradient_check_rejects_out_of_range_step() {
        let config = small_config(ModelKind::TransE);
        assert!(matches!(
            gradient_check(&config, 1, 2, 1e-2),
            Err(EmbedError::InvalidConfig(_))
        ));
    }

    #[test]
    fn negative_sample_forced_choice() {
        // Head vocabulary has a single label, tail has two, one positive:
        // the corruption must always be the other tail.
        let mut p = LabelProjection::default();
        p.add_label(NodeKind::SubAction, "stir");
        p.add_label(NodeKind::Object, "whisk");
        p.add_label(NodeKind::Object, "pot");
        p.add(RelationKind::HasObject, "stir", "whisk", 1);
        let positive = LabelTriple::new("stir", RelationKind::HasObject, "whisk");
        for seed in 0..20 {
            let negs = negative_sample(&positive, &p, 3, seed).unwrap();
            for neg in negs {
                assert_eq!(neg, LabelTriple::new("stir", RelationKind::HasObject, "pot"));
            }
        }
    }

    #[test]
    fn negative_sample_is_deterministic_per_seed() {
        let p = gradcheck_projection();
        let positive = LabelTriple::new("approach", RelationKind::HasNext, "lift");
        let a = negative_sample(&positive, &p, 10, 42).unwrap();
        let b = negative_sample(&positive, &p, 10, 42).unwrap();
        assert_eq!(a, b);
        let c = negative_sample(&positive, &p, 10, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn negative_sample_exhausted_vocabulary_errors() {
        let mut p = LabelProjection::default();
        p.add_label(NodeKind::SubAction, "stir");
        p.add_label(NodeKind::Object, "whisk");
        p.add(RelationKind::HasObject, "stir", "whisk", 1);
        let positive = LabelTriple::new("stir", RelationKind::HasObject, "whisk");
        assert!(matches!(
            negative_sample(&positive, &p, 1, 0),
            Err(EmbedError::NoValidCorruption)
        ));
    }

    /// Corruption draws are uniform over the valid labels (chi-squared).
    #[test]
    fn negative_sample_is_uniform() {
        let mut p = LabelProjection::default();
        p.add_label(NodeKind::SubAction, "stir");
        for obj in ["a", "b", "c", "d", "e", "f"] {
            p.add_label(NodeKind::Object, obj);
        }
        p.add(RelationKind::HasObject, "stir", "a", 1);
        let positive = LabelTriple::new("stir", RelationKind::HasObject, "a");
        let negs = negative_sample(&positive, &p, 10_000, 123).unwrap();
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for neg in negs {
            *counts.entry(neg.tail).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 5);
        let expected = 10_000.0 / 5.0;
        let chi2: f64 = counts
            .values()
            .map(|&o| {
                let d = o as f64 - expected;
                d * d / expected
            })
            .sum();
        // 0.999 quantile of chi-squared with 4 degrees of freedom.
        assert!(chi2 < 18.47, "chi-squared {chi2:.2}");
    }

    #[test]
    fn zero_learning_rate_leaves_initialization_unchanged() {
        let p = gradcheck_projection();
        let vocab = Vocabulary::default();
        let mut config = small_config(ModelKind::TransE);
        config.learning_rate = 0.0;
        config.epochs = 5;
        let outcome = train(&p, &config, &vocab).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let fresh = setup(&p, &config, &vocab, &mut rng).unwrap();
        assert_eq!(outcome.params.data, fresh.params.data);
    }

    #[test]
    fn training_is_bit_reproducible_single_threaded() {
        let p = gradcheck_projection();
        let vocab = Vocabulary::default();
        let mut config = small_config(ModelKind::DistMult);
        config.epochs = 15;
        config.seed = 9;
        let a = train(&p, &config, &vocab).unwrap();
        let b = train(&p, &config, &vocab).unwrap();
        assert_eq!(a.params.data, b.params.data);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn sharded_training_runs_and_stays_finite() {
        let p = gradcheck_projection();
        let vocab = Vocabulary::default();
        let mut config = small_config(ModelKind::TransE);
        config.threads = 3;
        config.epochs = 5;
        let outcome = train(&p, &config, &vocab).unwrap();
        assert!(outcome.params.data.iter().all(|v| v.is_finite()));
        assert_eq!(outcome.epoch_losses.len(), 5);
    }

    #[test]
    fn rotate_relations_stay_unit_modulus_throughout_training() {
        let p = gradcheck_projection();
        let vocab = Vocabulary::default();
        let mut config = small_config(ModelKind::RotatE);
        config.epochs = 20;
        let outcome = train(&p, &config, &vocab).unwrap();
        for relation in RelationKind::ALL {
            let w = outcome.params.relation_vector(relation);
            for i in 0..outcome.params.dim {
                let modulus = (w[2 * i] * w[2 * i] + w[2 * i + 1] * w[2 * i + 1]).sqrt();
                assert!((modulus - 1.0).abs() < 1e-9);
            }
        }
    }

    /// A 3-entity chain is learnable by TransE: both positives end up
    /// scoring above all 7 other candidate triples.
    #[test]
    fn transe_separates_three_entity_chain() {
        let mut p = LabelProjection::default();
        for s in ["approach", "lift", "stir"] {
            p.add_label(NodeKind::SubAction, s);
        }
        p.add(RelationKind::HasNext, "approach", "lift", 1);
        p.add(RelationKind::HasNext, "lift", "stir", 1);
        let vocab = Vocabulary::default();
        let mut config = EmbeddingConfig::new(ModelKind::TransE);
        config.dim = 16;
        config.epochs = 200;
        config.batch_size = 8;
        config.seed = 4;
        let outcome = train(&p, &config, &vocab).unwrap();

        let labels = ["approach", "lift", "stir"];
        let mut positive_scores = Vec::new();
        let mut negative_scores = Vec::new();
        for h in labels {
            for t in labels {
                let s = score(&outcome.params, h, RelationKind::HasNext, t).unwrap();
                if (h, t) == ("approach", "lift") || (h, t) == ("lift", "stir") {
                    positive_scores.push(s);
                } else {
                    negative_scores.push(s);
                }
            }
        }
        let min_pos = positive_scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_neg = negative_scores
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            min_pos > max_neg,
            "positives ({min_pos:.4}) do not separate from corruptions ({max_neg:.4})"
        );
    }

    /// After training on deterministic gold transitions, every training
    /// query ranks its gold successor first.
    #[test]
    fn trained_toy_model_ranks_gold_first() {
        let mut p = LabelProjection::default();
        let chain = ["approach", "lift", "stir", "place"];
        for s in chain {
            p.add_label(NodeKind::SubAction, s);
        }
        for w in chain.windows(2) {
            p.add(RelationKind::HasNext, w[0], w[1], 5);
        }
        let vocab = Vocabulary::default();
        let mut config = EmbeddingConfig::new(ModelKind::TransE);
        config.dim = 16;
        config.epochs = 200;
        config.batch_size = 16;
        config.seed = 2;
        let outcome = train(&p, &config, &vocab).unwrap();
        let candidates: Vec<String> = chain.iter().map(|s| s.to_string()).collect();
        for w in chain.windows(2) {
            let ranking = rank_candidates(
                &outcome.params,
                &RankQuery::Next {
                    current: w[0],
                    candidates: &candidates,
                },
            )
            .unwrap();
            assert_eq!(ranking[0], w[1], "gold successor of {}", w[0]);
        }
    }

    /// A saturated relation slice (every parent-actor pair observed) must
    /// not stall training; its positives are filtered, the rest train.
    #[test]
    fn saturated_relation_is_skipped_not_fatal() {
        let mut p = LabelProjection::default();
        for parent in ["cooking", "sawing"] {
            p.add_label(NodeKind::ParentAction, parent);
        }
        for actor in ["subject_1", "subject_2"] {
            p.add_label(NodeKind::Actor, actor);
        }
        for parent in ["cooking", "sawing"] {
            for actor in ["subject_1", "subject_2"] {
                p.add(RelationKind::HasActor, parent, actor, 1);
            }
        }
        p.add_label(NodeKind::SubAction, "approach");
        p.add_label(NodeKind::SubAction, "lift");
        p.add(RelationKind::HasNext, "approach", "lift", 2);
        let mut config = small_config(ModelKind::RotatE);
        config.epochs = 3;
        let outcome = train(&p, &config, &Vocabulary::default()).unwrap();
        assert!(outcome.params.data.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_projection_is_rejected() {
        let p = LabelProjection::default();
        let config = small_config(ModelKind::TransE);
        assert!(matches!(
            train(&p, &config, &Vocabulary::default()),
            Err(EmbedError::EmptyProjection)
        ));
    }
}
