//! Query construction, Hits@k, and the evaluation harness.
//!
//! Both prediction tasks are closed-vocabulary label-ranking problems: one
//! parent query per test component (9 candidates) and one next query per
//! has_next edge (14 candidates). Predictors return a total ranking per
//! query, or abstain, which counts as a miss at every k.

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

use crate::baselines::{self, FrequencyTable, PredictionTask};
use crate::embed::{self, ModelParams, RankQuery};
use crate::graph::{RecordingKey, RelationKind, SituationalGraph};
use crate::util::parallel_map;
use crate::vocab::Vocabulary;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("predictions ({predictions}) and golds ({golds}) differ in length")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("no queries to evaluate")]
    EmptyQuerySet,
    #[error("k must be >= 1")]
    ZeroK,
    #[error("component {key} lacks a parent or actor node")]
    MalformedComponent { key: RecordingKey },
    #[error("component {key}: gold label {gold:?} is not among the candidates")]
    GoldOutsideCandidates { key: RecordingKey, gold: String },
    #[error("predictor failed on query {query}: {message}")]
    Predictor { query: String, message: String },
    #[error("predictor returned a non-total ranking on query {query}: {details}")]
    InvalidRanking { query: String, details: String },
    #[error("{path}:{line}: {message}")]
    CsvParse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Rank the 9 parent labels for a component whose parent is masked.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentQuery {
    pub key: RecordingKey,
    pub gold: String,
    pub candidates: Vec<String>,
    pub actor: String,
    /// (sub-action label, associated objects) in chain order.
    pub subs: Vec<(String, BTreeSet<String>)>,
    /// Ordered label triples of the component (unmasked).
    pub triples: Vec<(String, RelationKind, String)>,
}

/// Rank the 14 sub-action labels as successors of `current`.
#[derive(Debug, Clone, PartialEq)]
pub struct NextQuery {
    pub key: RecordingKey,
    /// Edge position within the component, for deterministic ordering.
    pub position: usize,
    pub current: String,
    pub objects: BTreeSet<String>,
    pub gold: String,
    pub candidates: Vec<String>,
}

/// One query per component and one per has_next edge, ordered by recording
/// key and then edge position.
pub fn build_queries(
    test_components: &[SituationalGraph],
    vocab: &Vocabulary,
) -> Result<(Vec<ParentQuery>, Vec<NextQuery>), EvalError> {
    let mut views = Vec::new();
    for component in test_components {
        for key in component.recording_keys() {
            let view = component
                .component_view(&key)
                .map_err(|_| EvalError::MalformedComponent { key: key.clone() })?;
            if view.parent.is_empty() || view.actor.is_empty() {
                return Err(EvalError::MalformedComponent { key: key.clone() });
            }
            views.push(view);
        }
    }
    views.sort_by(|a, b| a.key.cmp(&b.key));

    let mut parent_queries = Vec::with_capacity(views.len());
    let mut next_queries = Vec::new();
    for view in &views {
        if !vocab.is_parent(&view.parent) {
            return Err(EvalError::GoldOutsideCandidates {
                key: view.key.clone(),
                gold: view.parent.clone(),
            });
        }
        let subs: Vec<(String, BTreeSet<String>)> = view
            .sub_instances()
            .map(|s| (s.label.clone(), s.objects.clone()))
            .collect();
        parent_queries.push(ParentQuery {
            key: view.key.clone(),
            gold: view.parent.clone(),
            candidates: vocab.parents().to_vec(),
            actor: view.actor.clone(),
            subs,
            triples: view.ordered_label_triples(),
        });
        let mut position = 0usize;
        for chain in &view.chains {
            for pair in chain.windows(2) {
                if !vocab.is_sub_action(&pair[1].label) {
                    return Err(EvalError::GoldOutsideCandidates {
                        key: view.key.clone(),
                        gold: pair[1].label.clone(),
                    });
                }
                next_queries.push(NextQuery {
                    key: view.key.clone(),
                    position,
                    current: pair[0].label.clone(),
                    objects: pair[0].objects.clone(),
                    gold: pair[1].label.clone(),
                    candidates: vocab.sub_actions().to_vec(),
                });
                position += 1;
            }
        }
    }
    Ok((parent_queries, next_queries))
}

/// A predictor's answer to one query.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Ranked(Vec<String>),
    /// No usable answer; scored as incorrect at every k.
    Abstain,
}

pub trait ParentPredictor: Sync {
    fn name(&self) -> String;
    fn predict_parent(&self, query: &ParentQuery) -> Result<Prediction, EvalError>;
}

pub trait NextPredictor: Sync {
    fn name(&self) -> String;
    fn predict_next(&self, query: &NextQuery) -> Result<Prediction, EvalError>;
}

/// Fraction of queries whose gold label appears within the first k ranks.
pub fn hits_at_k(
    predictions: &[Prediction],
    golds: &[String],
    k: usize,
) -> Result<f64, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if golds.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    let hits = predictions
        .iter()
        .zip(golds)
        .filter(|(prediction, gold)| match prediction {
            Prediction::Ranked(ranking) => ranking.iter().take(k).any(|l| l == *gold),
            Prediction::Abstain => false,
        })
        .count();
    Ok(hits as f64 / golds.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub model: String,
    pub task: PredictionTask,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_5: f64,
    pub queries: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

fn check_ranking(
    prediction: &Prediction,
    candidates: &[String],
    query: &str,
) -> Result<(), EvalError> {
    let Prediction::Ranked(ranking) = prediction else {
        return Ok(());
    };
    if ranking.len() != candidates.len() {
        return Err(EvalError::InvalidRanking {
            query: query.to_string(),
            details: format!(
                "ranking has {} entries for {} candidates",
                ranking.len(),
                candidates.len()
            ),
        });
    }
    let unique: BTreeSet<&String> = ranking.iter().collect();
    if unique.len() != ranking.len() {
        return Err(EvalError::InvalidRanking {
            query: query.to_string(),
            details: "ranking contains duplicates".to_string(),
        });
    }
    Ok(())
}

pub fn evaluate_parent(
    predictor: &dyn ParentPredictor,
    queries: &[ParentQuery],
    threads: usize,
) -> Result<MetricsRow, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let outcomes = parallel_map(queries, threads, |query| {
        predictor
            .predict_parent(query)
            .and_then(|prediction| {
                check_ranking(&prediction, &query.candidates, &query.key.to_string())?;
                Ok(prediction)
            })
            .map_err(|e| match e {
                e @ (EvalError::Predictor { .. } | EvalError::InvalidRanking { .. }) => e,
                other => EvalError::Predictor {
                    query: query.key.to_string(),
                    message: other.to_string(),
                },
            })
    });
    let predictions = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let golds: Vec<String> = queries.iter().map(|q| q.gold.clone()).collect();
    Ok(MetricsRow {
        model: predictor.name(),
        task: PredictionTask::Parent,
        hits_at_1: hits_at_k(&predictions, &golds, 1)?,
        hits_at_3: hits_at_k(&predictions, &golds, 3)?,
        hits_at_5: hits_at_k(&predictions, &golds, 5)?,
        queries: queries.len(),
    })
}

pub fn evaluate_next(
    predictor: &dyn NextPredictor,
    queries: &[NextQuery],
    threads: usize,
) -> Result<MetricsRow, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let outcomes = parallel_map(queries, threads, |query| {
        let id = format!("{}#{}", query.key, query.position);
        predictor
            .predict_next(query)
            .and_then(|prediction| {
                check_ranking(&prediction, &query.candidates, &id)?;
                Ok(prediction)
            })
            .map_err(|e| match e {
                e @ (EvalError::Predictor { .. } | EvalError::InvalidRanking { .. }) => e,
                other => EvalError::Predictor {
                    query: id.clone(),
                    message: other.to_string(),
                },
            })
    });
    let predictions = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let golds: Vec<String> = queries.iter().map(|q| q.gold.clone()).collect();
    Ok(MetricsRow {
        model: predictor.name(),
        task: PredictionTask::Next,
        hits_at_1: hits_at_k(&predictions, &golds, 1)?,
        hits_at_3: hits_at_k(&predictions, &golds, 3)?,
        hits_at_5: hits_at_k(&predictions, &golds, 5)?,
        queries: queries.len(),
    })
}

// ---------------------------------------------------------------------------
// Predictors
// ---------------------------------------------------------------------------

/// Uniform random total ranking, derived per query from (seed, query id) so
/// evaluation order and repetition never change the outcome.
pub struct RandomRanker {
    pub seed: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

impl RandomRanker {
    fn shuffled(&self, id: &str, candidates: &[String]) -> Vec<String> {
        use rand::seq::SliceRandom;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(id.as_bytes()));
        let mut ranking = candidates.to_vec();
        ranking.shuffle(&mut rng);
        ranking
    }
}

impl ParentPredictor for RandomRanker {
    fn name(&self) -> String {
        "random".to_string()
    }

    fn predict_parent(&self, query: &ParentQuery) -> Result<Prediction, EvalError> {
        let id = format!("parent:{}", query.key);
        Ok(Prediction::Ranked(self.shuffled(&id, &query.candidates)))
    }
}

impl NextPredictor for RandomRanker {
    fn name(&self) -> String {
        "random".to_string()
    }

    fn predict_next(&self, query: &NextQuery) -> Result<Prediction, EvalError> {
        let id = format!("next:{}#{}", query.key, query.position);
        Ok(Prediction::Ranked(self.shuffled(&id, &query.candidates)))
    }
}

/// Places the gold label first; test and acceptance utility.
pub struct OracleRanker;

impl ParentPredictor for OracleRanker {
    fn name(&self) -> String {
        "oracle".to_string()
    }

    fn predict_parent(&self, query: &ParentQuery) -> Result<Prediction, EvalError> {
        Ok(Prediction::Ranked(gold_first(&query.gold, &query.candidates)))
    }
}

impl NextPredictor for OracleRanker {
    fn name(&self) -> String {
        "oracle".to_string()
    }

    fn predict_next(&self, query: &NextQuery) -> Result<Prediction, EvalError> {
        Ok(Prediction::Ranked(gold_first(&query.gold, &query.candidates)))
    }
}

/// Places the gold label last; test and acceptance utility.
pub struct AntiOracleRanker;

impl ParentPredictor for AntiOracleRanker {
    fn name(&self) -> String {
        "anti-oracle".to_string()
    }

    fn predict_parent(&self, query: &ParentQuery) -> Result<Prediction, EvalError> {
        Ok(Prediction::Ranked(gold_last(&query.gold, &query.candidates)))
    }
}

impl NextPredictor for AntiOracleRanker {
    fn name(&self) -> String {
        "anti-oracle".to_string()
    }

    fn predict_next(&self, query: &NextQuery) -> Result<Prediction, EvalError> {
        Ok(Prediction::Ranked(gold_last(&query.gold, &query.candidates)))
    }
}

fn gold_first(gold: &str, candidates: &[String]) -> Vec<String> {
    let mut ranking = vec![gold.to_string()];
    ranking.extend(candidates.iter().filter(|c| *c != gold).cloned());
    ranking
}

fn gold_last(gold: &str, candidates: &[String]) -> Vec<String> {
    let mut ranking: Vec<String> = candidates.iter().filter(|c| *c != gold).cloned().collect();
    ranking.push(gold.to_string());
    ranking
}

/// Frequency-baseline predictor over a fitted table.
pub struct BaselinePredictor {
    pub table: FrequencyTable,
}

impl ParentPredictor for BaselinePredictor {
    fn name(&self) -> String {
        format!("baseline-{}", self.table.variant.name())
    }

    fn predict_parent(&self, query: &ParentQuery) -> Result<Prediction, EvalError> {
        Ok(Prediction::Ranked(baselines::predict_parent(
            &query.subs,
            &self.table,
        )))
    }
}

impl NextPredictor for BaselinePredictor {
    fn name(&self) -> String {
        format!("baseline-{}", self.table.variant.name())
    }

    fn predict_next(&self, query: &NextQuery) -> Result<Prediction, EvalError> {
        baselines::predict_next(&query.current, &query.objects, &self.table)
            .map(Prediction::Ranked)
            .map_err(|e| EvalError::Predictor {
                query: format!("{}#{}", query.key, query.position),
                message: e.to_string(),
            })
    }
}

/// Embedding-model predictor over trained parameters.
pub struct EmbedPredictor {
    pub params: ModelParams,
}

impl ParentPredictor for EmbedPredictor {
    fn name(&self) -> String {
        self.params.kind.name().to_string()
    }

    fn predict_parent(&self, query: &ParentQuery) -> Result<Prediction, EvalError> {
        let sub_labels: Vec<String> = query.subs.iter().map(|(l, _)| l.clone()).collect();
        embed::rank_candidates(
            &self.params,
            &RankQuery::Parent {
                sub_labels: &sub_labels,
                actor: &query.actor,
                candidates: &query.candidates,
            },
        )
        .map(Prediction::Ranked)
        .map_err(|e| EvalError::Predictor {
            query: query.key.to_string(),
            message: e.to_string(),
        })
    }
}

impl NextPredictor for EmbedPredictor {
    fn name(&self) -> String {
        self.params.kind.name().to_string()
    }

    fn predict_next(&self, query: &NextQuery) -> Result<Prediction, EvalError> {
        embed::rank_candidates(
            &self.params,
            &RankQuery::Next {
                current: &query.current,
                candidates: &query.candidates,
            },
        )
        .map(Prediction::Ranked)
        .map_err(|e| EvalError::Predictor {
            query: format!("{}#{}", query.key, query.position),
            message: e.to_string(),
        })
    }
}

/// Resamples queries with replacement; deterministic per seed.
pub fn bootstrap<T: Clone>(items: &[T], n: usize, seed: u64) -> Vec<T> {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| items[rng.random_range(0..items.len())].clone())
        .collect()
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "text" => Some(ReportFormat::Text),
            "csv" => Some(ReportFormat::Csv),
            "markdown" => Some(ReportFormat::Markdown),
            _ => None,
        }
    }
}

const CSV_HEADER: &str = "model,task,hits_at_1,hits_at_3,hits_at_5,queries";

pub fn report(table: &MetricsTable, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = format!("{CSV_HEADER}\n");
            for row in &table.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    row.model,
                    row.task.name(),
                    row.hits_at_1,
                    row.hits_at_3,
                    row.hits_at_5,
                    row.queries
                ));
            }
            out
        }
        ReportFormat::Text => {
            let mut out = format!(
                "{:<16} {:<8} {:>8} {:>8} {:>8} {:>8}\n",
                "model", "task", "hits@1", "hits@3", "hits@5", "queries"
            );
            for row in &table.rows {
                out.push_str(&format!(
                    "{:<16} {:<8} {:>8.4} {:>8.4} {:>8.4} {:>8}\n",
                    row.model,
                    row.task.name(),
                    row.hits_at_1,
                    row.hits_at_3,
                    row.hits_at_5,
                    row.queries
                ));
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::from(
                "| model | task | hits@1 | hits@3 | hits@5 | queries |\n|---|---|---|---|---|---|\n",
            );
            for row in &table.rows {
                out.push_str(&format!(
                    "| {} | {} | {:.4} | {:.4} | {:.4} | {} |\n",
                    row.model,
                    row.task.name(),
                    row.hits_at_1,
                    row.hits_at_3,
                    row.hits_at_5,
                    row.queries
                ));
            }
            out
        }
    }
}

pub fn parse_csv(text: &str, path: &Path) -> Result<MetricsTable, EvalError> {
    let err = |line: usize, message: String| EvalError::CsvParse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => return Err(err(1, format!("unexpected header {header:?}"))),
        None => return Err(err(1, "empty report".to_string())),
    }
    let mut table = MetricsTable::default();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(err(lineno, format!("expected 6 columns, found {}", cols.len())));
        }
        let task = PredictionTask::parse(cols[1])
            .ok_or_else(|| err(lineno, format!("unknown task {:?}", cols[1])))?;
        let f = |s: &str| -> Result<f64, EvalError> {
            s.parse().map_err(|_| err(lineno, format!("bad float {s:?}")))
        };
        table.rows.push(MetricsRow {
            model: cols[0].to_string(),
            task,
            hits_at_1: f(cols[2])?,
            hits_at_3: f(cols[3])?,
            hits_at_5: f(cols[4])?,
            queries: cols[5]
                .parse()
                .map_err(|_| err(lineno, format!("bad count {:?}", cols[5])))?,
        });
    }
    Ok(table)
}

pub fn write_report(
    table: &MetricsTable,
    format: ReportFormat,
    path: &Path,
) -> Result<(), EvalError> {
    std::fs::write(path, report(table, format)).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<MetricsTable, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AssociationPolicy;
    use crate::split::split_by_take;
    use crate::synth::{components_from_annotations, generate_synthetic, SynthConfig};

    fn test_split(tasks: usize, subjects: usize, takes: usize, seed: u64) -> crate::split::Split {
        let annotations =
            generate_synthetic(&SynthConfig::new(tasks, subjects, takes), seed).unwrap();
        let components = components_from_annotations(&annotations, &AssociationPolicy::default());
        let graph = SituationalGraph::build_graph(&components, &Vocabulary::default()).unwrap();
        split_by_take(&graph, 2).unwrap()
    }

    #[test]
    fn one_parent_query_per_component_and_counts_match() {
        let split = test_split(3, 2, 4, 1);
        let vocab = Vocabulary::default();
        let (parents, nexts) = build_queries(&split.test_components, &vocab).unwrap();
        assert_eq!(parents.len(), split.test_components.len());
        // Next queries equal the number of has_next edges in test components.
        let expected: usize = split
            .test_components
            .iter()
            .map(|c| {
                c.triples()
                    .filter(|t| t.relation == RelationKind::HasNext)
                    .count()
            })
            .sum();
        assert_eq!(nexts.len(), expected);
        for q in &parents {
            assert!(q.candidates.contains(&q.gold));
            assert_eq!(q.candidates.len(), 9);
        }
        for q in &nexts {
            assert!(q.candidates.contains(&q.gold));
            assert_eq!(q.candidates.len(), 14);
        }
    }

    #[test]
    fn chain_of_five_yields_four_next_queries() {
        use crate::graph::{ChainStep, RecordingComponent, RecordingKey};
        let component = RecordingComponent {
            key: RecordingKey::new("wiping", "subject_1", 1),
            chains: vec![vec![
                ChainStep::new("approach", []),
                ChainStep::new("lift", []),
                ChainStep::new("wipe", []),
                ChainStep::new("place", []),
                ChainStep::new("retreat", []),
            ]],
        };
        let graph = SituationalGraph::build_graph(&[component], &Vocabulary::default()).unwrap();
        let (parents, nexts) = build_queries(&[graph], &Vocabulary::default()).unwrap();
        assert_eq!(parents.len(), 1);
        assert_eq!(nexts.len(), 4);
    }

    #[test]
    fn hits_at_k_basics() {
        let predictions = vec![
            Prediction::Ranked(vec!["a".into(), "b".into(), "c".into(), "d".into()]),
            Prediction::Ranked(vec!["b".into(), "c".into(), "d".into(), "a".into()]),
        ];
        let golds = vec!["a".to_string(), "a".to_string()];
        // Golds at ranks 1 and 4: Hits@3 = 0.5.
        assert_eq!(hits_at_k(&predictions, &golds, 3).unwrap(), 0.5);
        // k >= candidate count: gold always present.
        assert_eq!(hits_at_k(&predictions, &golds, 4).unwrap(), 1.0);
        assert!(matches!(
            hits_at_k(&predictions, &golds[..1], 1),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn abstain_counts_as_miss() {
        let predictions = vec![Prediction::Abstain];
        let golds = vec!["a".to_string()];
        assert_eq!(hits_at_k(&predictions, &golds, 5).unwrap(), 0.0);
    }

    #[test]
    fn oracle_and_anti_oracle() {
        let split = test_split(3, 2, 3, 2);
        let vocab = Vocabulary::default();
        let (parents, nexts) = build_queries(&split.test_components, &vocab).unwrap();
        let row = evaluate_parent(&OracleRanker, &parents, 1).unwrap();
        assert_eq!(row.hits_at_1, 1.0);
        assert_eq!(row.hits_at_5, 1.0);
        let row = evaluate_next(&OracleRanker, &nexts, 1).unwrap();
        assert_eq!(row.hits_at_1, 1.0);
        // Anti-oracle over 14 candidates never reaches the top 5.
        let row = evaluate_next(&AntiOracleRanker, &nexts, 1).unwrap();
        assert_eq!(row.hits_at_5, 0.0);
    }

    #[test]
    fn random_ranker_matches_uniform_rate() {
        // The ranker derives its shuffle from (seed, query id), so repeated
        // queries repeat rankings; independent draws come from fresh seeds.
        let split = test_split(9, 2, 3, 3);
        let vocab = Vocabulary::default();
        let (parents, _) = build_queries(&split.test_components, &vocab).unwrap();
        let mut hits1 = 0.0;
        let mut hits3 = 0.0;
        let mut total = 0usize;
        for seed in 0..300 {
            let row = evaluate_parent(&RandomRanker { seed }, &parents, 2).unwrap();
            assert!(row.hits_at_1 <= row.hits_at_3);
            assert!(row.hits_at_3 <= row.hits_at_5);
            hits1 += row.hits_at_1 * row.queries as f64;
            hits3 += row.hits_at_3 * row.queries as f64;
            total += row.queries;
        }
        assert!(total >= 10_000);
        let rate1 = hits1 / total as f64;
        let rate3 = hits3 / total as f64;
        assert!((rate1 - 1.0 / 9.0).abs() <= 0.01, "hits@1 {rate1} vs 1/9");
        assert!((rate3 - 3.0 / 9.0).abs() <= 0.01, "hits@3 {rate3} vs 3/9");
    }

    #[test]
    fn bootstrap_is_deterministic_and_sized() {
        let items: Vec<u32> = (0..17).collect();
        let a = bootstrap(&items, 100, 3);
        let b = bootstrap(&items, 100, 3);
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!(a.iter().all(|v| items.contains(v)));
    }

    #[test]
    fn evaluation_is_deterministic_and_thread_invariant() {
        let split = test_split(4, 2, 3, 4);
        let vocab = Vocabulary::default();
        let (parents, nexts) = build_queries(&split.test_components, &vocab).unwrap();
        let ranker = RandomRanker { seed: 11 };
        let a = evaluate_parent(&ranker, &parents, 1).unwrap();
        let b = evaluate_parent(&ranker, &parents, 4).unwrap();
        assert_eq!(a, b);
        let c = evaluate_next(&ranker, &nexts, 1).unwrap();
        let d = evaluate_next(&ranker, &nexts, 3).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn invalid_rankings_are_rejected() {
        struct Short;
        impl ParentPredictor for Short {
            fn name(&self) -> String {
                "short".to_string()
            }
            fn predict_parent(&self, _query: &ParentQuery) -> Result<Prediction, EvalError> {
                Ok(Prediction::Ranked(vec!["cooking".to_string()]))
            }
        }
        let split = test_split(2, 1, 3, 5);
        let vocab = Vocabulary::default();
        let (parents, _) = build_queries(&split.test_components, &vocab).unwrap();
        assert!(matches!(
            evaluate_parent(&Short, &parents, 1),
            Err(EvalError::InvalidRanking { .. })
        ));
    }

    #[test]
    fn csv_report_round_trips() {
        let table = MetricsTable {
            rows: vec![
                MetricsRow {
                    model: "baseline-b2".to_string(),
                    task: PredictionTask::Parent,
                    hits_at_1: 0.7592592592592593,
                    hits_at_3: 1.0,
                    hits_at_5: 1.0,
                    queries: 108,
                },
                MetricsRow {
                    model: "rotate".to_string(),
                    task: PredictionTask::Next,
                    hits_at_1: 0.5216,
                    hits_at_3: 0.5767,
                    hits_at_5: 0.58,
                    queries: 1500,
                },
            ],
        };
        let csv = report(&table, ReportFormat::Csv);
        let parsed = parse_csv(&csv, Path::new("report.csv")).unwrap();
        assert_eq!(parsed, table);

        // Header-only document for an empty table.
        let empty = report(&MetricsTable::default(), ReportFormat::Csv);
        assert_eq!(empty.lines().count(), 1);
        let text = report(&table, ReportFormat::Text);
        assert_eq!(text.lines().count(), 3);
        let md = report(&table, ReportFormat::Markdown);
        assert!(md.starts_with("| model |"));
        assert_eq!(md.lines().count(), 4);
    }
}
