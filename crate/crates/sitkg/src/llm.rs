//! Chat-completion bridge: few-shot prompts over serialized components, an
//! OpenAI-compatible HTTP transport, a scripted mock transport, and answer
//! parsing back into label rankings.
//!
//! The evaluation path never requires network access: the mock transport
//! replays scripted responses and error injections from a JSON file.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{EvalError, NextPredictor, NextQuery, ParentPredictor, ParentQuery, Prediction};
use crate::graph::{RelationKind, SituationalGraph};
use crate::split::{Manifest, SplitSide};
use crate::vocab::Vocabulary;

pub const PARENT_PLACEHOLDER: &str = "PARENT";

/// Fixed instruction header; the first message of every parent-task prompt.
pub const PARENT_SYSTEM_PROMPT: &str = "You are a knowledgeable assistant. Given a set of triples representing sub-actions, predict the most likely parent action.";

/// Instruction header for the subsequent-action task.
pub const NEXT_SYSTEM_PROMPT: &str = "You are a knowledgeable assistant. Given the current sub-action and its associated objects, predict the most likely next sub-action.";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by the endpoint")]
    RateLimited,
    #[error("request timed out")]
    Timeout,
    #[error("no training example available for class {0:?}")]
    InsufficientExamples(String),
    #[error("answer {0:?} matches no candidate label")]
    UnparseableAnswer(String),
    #[error("endpoint is not configured (set SITKG_LLM_ENDPOINT or use a mock script)")]
    MissingEndpoint,
    #[error("{path}: {message}")]
    Script { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptConfig {
    pub examples_per_class: usize,
    pub max_triples_per_example: usize,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_retries: usize,
    pub initial_backoff: Duration,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            examples_per_class: 1,
            max_triples_per_example: 40,
            endpoint: std::env::var("SITKG_LLM_ENDPOINT").ok(),
            api_key: std::env::var("SITKG_LLM_KEY").ok(),
            model: "gpt-4o-mini".to_string(),
            temperature: 0.0,
            timeout: Duration::from_secs(60),
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".to_string(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".to_string(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatOutcome {
    pub text: String,
    pub usage: Option<Usage>,
}

/// One full request/response exchange, kept for provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatExchange {
    pub request: ChatRequest,
    pub response: String,
    pub usage: Option<Usage>,
}

pub trait ChatTransport: Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatOutcome, LlmError>;
}

impl ChatTransport for Box<dyn ChatTransport> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatOutcome, LlmError> {
        (**self).complete(request)
    }
}

// ---------------------------------------------------------------------------
// Transports
// ---------------------------------------------------------------------------

/// OpenAI-compatible HTTP transport: POST {model, messages, temperature},
/// read choices[0].message.content.
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: ChatMessage,
}

impl HttpTransport {
    pub fn new(config: &PromptConfig) -> Result<Self, LlmError> {
        let endpoint = config.endpoint.clone().ok_or(LlmError::MissingEndpoint)?;
        let agent = ureq::AgentBuilder::new()
            .timeout_read(config.timeout)
            .timeout_write(config.timeout)
            .timeout_connect(config.timeout)
            .build();
        Ok(HttpTransport {
            endpoint,
            api_key: config.api_key.clone(),
            agent,
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<ChatOutcome, LlmError> {
        let body = serde_json::to_value(request)
            .map_err(|e| LlmError::Transport(format!("serialize request: {e}")))?;
        let mut http = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            http = http.set("Authorization", &format!("Bearer {key}"));
        }
        let response = match http.send_json(body) {
            Ok(response) => response,
            Err(ureq::Error::Status(429, _)) => return Err(LlmError::RateLimited),
            Err(ureq::Error::Status(code, response)) => {
                let detail = response.into_string().unwrap_or_default();
                return Err(LlmError::Transport(format!("HTTP {code}: {detail}")));
            }
            Err(ureq::Error::Transport(t)) => {
                let message = t.to_string();
                if message.contains("timed out") || message.contains("timeout") {
                    return Err(LlmError::Timeout);
                }
                return Err(LlmError::Transport(message));
            }
        };
        let wire: WireResponse = response
            .into_json()
            .map_err(|e| LlmError::Transport(format!("decode response: {e}")))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| LlmError::Transport("response has no choices".to_string()))?;
        Ok(ChatOutcome {
            text: choice.message.content,
            usage: wire.usage,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptEntry {
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    error: Option<String>,
}

/// Scripted transport: entries are consumed in order and cycle when
/// exhausted. `{"response": "..."}` yields text; `{"error": "transport" |
/// "rate_limited" | "timeout"}` injects the corresponding failure.
pub struct MockTransport {
    entries: Vec<ScriptEntry>,
    cursor: Mutex<usize>,
}

impl MockTransport {
    pub fn from_script(text: &str, path: &str) -> Result<Self, LlmError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(text).map_err(|e| LlmError::Script {
                path: path.to_string(),
                message: e.to_string(),
            })?;
        if entries.is_empty() {
            return Err(LlmError::Script {
                path: path.to_string(),
                message: "script has no entries".to_string(),
            });
        }
        Ok(MockTransport {
            entries,
            cursor: Mutex::new(0),
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Script {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_script(&text, &path.display().to_string())
    }

    /// Convenience for tests: a script of plain responses.
    pub fn with_responses(responses: &[&str]) -> Self {
        MockTransport {
            entries: responses
                .iter()
                .map(|r| ScriptEntry {
                    response: Some(r.to_string()),
                    error: None,
                })
                .collect(),
            cursor: Mutex::new(0),
        }
    }
}

impl ChatTransport for MockTransport {
    fn complete(&self, _request: &ChatRequest) -> Result<ChatOutcome, LlmError> {
        let mut cursor = self.cursor.lock().unwrap();
        let entry = &self.entries[*cursor % self.entries.len()];
        *cursor += 1;
        if let Some(error) = &entry.error {
            return match error.as_str() {
                "transport" => Err(LlmError::Transport("scripted failure".to_string())),
                "rate_limited" => Err(LlmError::RateLimited),
                "timeout" => Err(LlmError::Timeout),
                other => Err(LlmError::Transport(format!("scripted failure {other:?}"))),
            };
        }
        Ok(ChatOutcome {
            text: entry.response.clone().unwrap_or_default(),
            usage: None,
        })
    }
}

/// Sends a request, retrying transient failures (transport, rate limit,
/// timeout) with exponential backoff, at most `max_retries` retries.
pub fn chat_complete(
    transport: &dyn ChatTransport,
    request: &ChatRequest,
    max_retries: usize,
    initial_backoff: Duration,
) -> Result<ChatOutcome, LlmError> {
    let mut backoff = initial_backoff;
    let mut attempt = 0;
    loop {
        match transport.complete(request) {
            Ok(outcome) => return Ok(outcome),
            Err(e @ (LlmError::Transport(_) | LlmError::RateLimited | LlmError::Timeout)) => {
                if attempt >= max_retries {
                    return Err(e);
                }
                if !backoff.is_zero() {
                    std::thread::sleep(backoff);
                }
                backoff *= 2;
                attempt += 1;
            }
            Err(other) => return Err(other),
        }
    }
}

// ---------------------------------------------------------------------------
// Prompt construction
// ---------------------------------------------------------------------------

/// One line per triple: `head_label, relation, tail_label`. Labels equal to
/// `mask` are replaced by the placeholder, so a masked test serialization
/// never contains the gold parent label.
pub fn serialize_component(
    triples: &[(String, RelationKind, String)],
    mask: Option<&str>,
) -> String {
    let render = |label: &str| -> String {
        match mask {
            Some(masked) if label == masked => PARENT_PLACEHOLDER.to_string(),
            _ => label.to_string(),
        }
    };
    triples
        .iter()
        .map(|(head, relation, tail)| format!("{}, {}, {}\n", render(head), relation.name(), render(tail)))
        .collect()
}

fn truncated_block(serialized: &str, max_triples: usize) -> String {
    let lines: Vec<&str> = serialized.lines().collect();
    if lines.len() <= max_triples {
        return serialized.to_string();
    }
    let mut out = lines[..max_triples].join("\n");
    out.push_str(&format!(
        "\n... ({} more triples omitted)\n",
        lines.len() - max_triples
    ));
    out
}

/// A labeled training example: class label plus its ordered triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub class: String,
    pub triples: Vec<(String, RelationKind, String)>,
}

/// Deterministic example selection: for each parent class, the first
/// `examples_per_class` training recordings in (subject, take) order.
pub fn select_parent_examples(
    train: &SituationalGraph,
    manifest: &Manifest,
    examples_per_class: usize,
    vocab: &Vocabulary,
) -> Result<Vec<TrainExample>, LlmError> {
    let mut by_class: BTreeMap<&str, Vec<TrainExample>> = BTreeMap::new();
    for (key, side) in manifest {
        if *side != SplitSide::Train {
            continue;
        }
        let Some(class) = vocab.parents().iter().find(|p| **p == key.task) else {
            continue;
        };
        let class_examples = by_class.entry(class).or_default();
        if class_examples.len() >= examples_per_class {
            continue;
        }
        let view = train
            .component_view(key)
            .map_err(|e| LlmError::Transport(format!("train graph: {e}")))?;
        class_examples.push(TrainExample {
            class: class.clone(),
            triples: view.ordered_label_triples(),
        });
    }
    // Class-name order; every class must be covered.
    let mut classes: Vec<&String> = vocab.parents().iter().collect();
    classes.sort();
    let mut out = Vec::new();
    for class in classes {
        match by_class.get(class.as_str()) {
            Some(examples) if examples.len() >= examples_per_class => {
                out.extend(examples.iter().cloned());
            }
            _ => return Err(LlmError::InsufficientExamples(class.clone())),
        }
    }
    Ok(out)
}

/// Few-shot prompt for parent-action prediction: instruction header,
/// labeled example blocks in class-name order, the masked test triples, and
/// the closing constraint naming all 9 labels.
pub fn build_parent_prompt(
    train_examples: &[TrainExample],
    query: &ParentQuery,
    config: &PromptConfig,
    vocab: &Vocabulary,
) -> Vec<ChatMessage> {
    let mut user = String::from(
        "Below are examples of parent actions and their corresponding sequences of sub-actions. Each triple represents a head, relation, and tail from the knowledge graph describing the parent action.\n\n",
    );
    for example in train_examples {
        user.push_str(&format!("Parent action: {}\nTriples:\n", example.class));
        let serialized = serialize_component(&example.triples, None);
        user.push_str(&truncated_block(&serialized, config.max_triples_per_example));
        user.push('\n');
    }
    user.push_str("What is the parent action for the following graph?\n\n");
    user.push_str(&serialize_component(&query.triples, Some(&query.gold)));
    user.push('\n');
    user.push_str(&format!(
        "Answer nothing but one of the {} possible parent actions: {}.",
        vocab.parents().len(),
        vocab.parents().join(", ")
    ));
    vec![
        ChatMessage::system(PARENT_SYSTEM_PROMPT),
        ChatMessage::user(user),
    ]
}

/// A sub-action transition example for the next-action prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionExample {
    pub current: String,
    pub objects: Vec<String>,
    pub next: String,
}

/// Deterministic transition examples: for each observed next-label class,
/// the first `examples_per_class` training transitions in key order.
pub fn select_next_examples(
    train: &SituationalGraph,
    manifest: &Manifest,
    examples_per_class: usize,
) -> Result<Vec<TransitionExample>, LlmError> {
    let mut by_class: BTreeMap<String, Vec<TransitionExample>> = BTreeMap::new();
    for (key, side) in manifest {
        if *side != SplitSide::Train {
            continue;
        }
        let view = train
            .component_view(key)
            .map_err(|e| LlmError::Transport(format!("train graph: {e}")))?;
        for chain in &view.chains {
            for pair in chain.windows(2) {
                let class_examples = by_class.entry(pair[1].label.clone()).or_default();
                if class_examples.len() < examples_per_class {
                    class_examples.push(TransitionExample {
                        current: pair[0].label.clone(),
                        objects: pair[0].objects.iter().cloned().collect(),
                        next: pair[1].label.clone(),
                    });
                }
            }
        }
    }
    let out: Vec<TransitionExample> = by_class.into_values().flatten().collect();
    if out.is_empty() {
        return Err(LlmError::InsufficientExamples("any".to_string()));
    }
    Ok(out)
}

/// Analogous few-shot prompt for subsequent-action prediction with the
/// 14-label closing constraint.
pub fn build_next_prompt(
    train_examples: &[TransitionExample],
    query: &NextQuery,
    _config: &PromptConfig,
    vocab: &Vocabulary,
) -> Vec<ChatMessage> {
    let objects_line = |objects: &[String]| -> String {
        if objects.is_empty() {
            "none".to_string()
        } else {
            objects.join(", ")
        }
    };
    let mut user = String::from(
        "Below are examples of sub-action transitions observed in household activities.\n\n",
    );
    for example in train_examples {
        user.push_str(&format!(
            "Current sub-action: {}\nAssociated objects: {}\nNext sub-action: {}\n\n",
            example.current,
            objects_line(&example.objects),
            example.next
        ));
    }
    let query_objects: Vec<String> = query.objects.iter().cloned().collect();
    user.push_str("What is the next sub-action for the following situation?\n\n");
    user.push_str(&format!(
        "Current sub-action: {}\nAssociated objects: {}\n\n",
        query.current,
        objects_line(&query_objects)
    ));
    user.push_str(&format!(
        "Answer nothing but one of the {} possible sub-actions: {}.",
        vocab.sub_actions().len(),
        vocab.sub_actions().join(", ")
    ));
    vec![
        ChatMessage::system(NEXT_SYSTEM_PROMPT),
        ChatMessage::user(user),
    ]
}

// ---------------------------------------------------------------------------
// Answer parsing
// ---------------------------------------------------------------------------

/// Matches the answer against the candidate labels (exact after
/// normalization, then longest-label-first substring). The matched label
/// ranks first; the rest follow in `fallback_order`.
pub fn parse_answer(
    text: &str,
    labels: &[String],
    fallback_order: &[String],
) -> Result<Vec<String>, LlmError> {
    let normalized: String = text
        .to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '_' {
                c
            } else {
                ' '
            }
        })
        .collect();
    let trimmed = normalized.trim();

    let exact = labels.iter().find(|l| l.as_str() == trimmed);
    let matched = match exact {
        Some(label) => label.clone(),
        None => {
            let mut by_length: Vec<&String> = labels.iter().collect();
            by_length.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            by_length
                .into_iter()
                .find(|l| trimmed.contains(l.as_str()))
                .cloned()
                .ok_or_else(|| LlmError::UnparseableAnswer(text.to_string()))?
        }
    };
    let mut ranking = vec![matched.clone()];
    for label in fallback_order {
        if *label != matched && !ranking.contains(label) {
            ranking.push(label.clone());
        }
    }
    for label in labels {
        if !ranking.contains(label) {
            ranking.push(label.clone());
        }
    }
    Ok(ranking)
}

// ---------------------------------------------------------------------------
// Predictor
// ---------------------------------------------------------------------------

/// Evaluation-harness predictor that prompts a chat endpoint per query.
/// Unparseable answers abstain (scored as incorrect) and are logged.
pub struct LlmPredictor<T: ChatTransport> {
    pub transport: T,
    pub config: PromptConfig,
    pub vocab: Vocabulary,
    pub parent_examples: Vec<TrainExample>,
    pub next_examples: Vec<TransitionExample>,
    /// Global parent/sub-action label orderings used as parse fallback.
    pub parent_fallback: Vec<String>,
    pub next_fallback: Vec<String>,
    exchanges: Mutex<Vec<ChatExchange>>,
    unparseable: Mutex<Vec<String>>,
    not_before: Mutex<Option<Instant>>,
}

impl<T: ChatTransport> LlmPredictor<T> {
    pub fn new(
        transport: T,
        config: PromptConfig,
        vocab: Vocabulary,
        parent_examples: Vec<TrainExample>,
        next_examples: Vec<TransitionExample>,
        parent_fallback: Vec<String>,
        next_fallback: Vec<String>,
    ) -> Self {
        LlmPredictor {
            transport,
            config,
            vocab,
            parent_examples,
            next_examples,
            parent_fallback,
            next_fallback,
            exchanges: Mutex::new(Vec::new()),
            unparseable: Mutex::new(Vec::new()),
            not_before: Mutex::new(None),
        }
    }

    pub fn exchanges(&self) -> Vec<ChatExchange> {
        self.exchanges.lock().unwrap().clone()
    }

    pub fn unparseable_answers(&self) -> Vec<String> {
        self.unparseable.lock().unwrap().clone()
    }

    fn ask(&self, messages: Vec<ChatMessage>) -> Result<String, LlmError> {
        // Global rate-limit gate shared by all in-flight workers.
        let wait = {
            let gate = self.not_before.lock().unwrap();
            gate.map(|t| t.saturating_duration_since(Instant::now()))
        };
        if let Some(wait) = wait {
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        let request = ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature: self.config.temperature,
        };
        let result = chat_complete(
            &self.transport,
            &request,
            self.config.max_retries,
            self.config.initial_backoff,
        );
        match result {
            Ok(outcome) => {
                self.exchanges.lock().unwrap().push(ChatExchange {
                    request,
                    response: outcome.text.clone(),
                    usage: outcome.usage.clone(),
                });
                Ok(outcome.text)
            }
            Err(e) => {
                if matches!(e, LlmError::RateLimited) {
                    let mut gate = self.not_before.lock().unwrap();
                    *gate = Some(Instant::now() + self.config.initial_backoff);
                }
                Err(e)
            }
        }
    }
}

impl<T: ChatTransport> ParentPredictor for LlmPredictor<T> {
    fn name(&self) -> String {
        "llm".to_string()
    }

    fn predict_parent(&self, query: &ParentQuery) -> Result<Prediction, EvalError> {
        let messages = build_parent_prompt(&self.parent_examples, query, &self.config, &self.vocab);
        let text = self.ask(messages).map_err(|e| EvalError::Predictor {
            query: query.key.to_string(),
            message: e.to_string(),
        })?;
        match parse_answer(&text, &query.candidates, &self.parent_fallback) {
            Ok(ranking) => Ok(Prediction::Ranked(ranking)),
            Err(LlmError::UnparseableAnswer(answer)) => {
                self.unparseable.lock().unwrap().push(answer);
                Ok(Prediction::Abstain)
            }
            Err(e) => Err(EvalError::Predictor {
                query: query.key.to_string(),
                message: e.to_string(),
            }),
        }
    }
}

impl<T: ChatTransport> NextPredictor for LlmPredictor<T> {
    fn name(&self) -> String {
        "llm".to_string()
    }

    fn predict_next(&self, query: &NextQuery) -> Result<Prediction, EvalError> {
        let messages = build_next_prompt(&self.next_examples, query, &self.config, &self.vocab);
        let id = format!("{}#{}", query.key, query.position);
        let text = self.ask(messages).map_err(|e| EvalError::Predictor {
            query: id.clone(),
            message: e.to_string(),
        })?;
        match parse_answer(&text, &query.candidates, &self.next_fallback) {
            Ok(ranking) => Ok(Prediction::Ranked(ranking)),
            Err(LlmError::UnparseableAnswer(answer)) => {
                self.unparseable.lock().unwrap().push(answer);
                Ok(Prediction::Abstain)
            }
            Err(e) => Err(EvalError::Predictor {
                query: id,
                message: e.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use std::sync::atomic::{AtomicUsize, Ordering};

    use crate::graph::RecordingKey;

    fn parent_query() -> ParentQuery {
        let vocab = Vocabulary::default();
        ParentQuery {
            key: RecordingKey::new("cooking", "subject_1", 9),
            gold: "cooking".to_string(),
            candidates: vocab.parents().to_vec(),
            actor: "subject_1".to_string(),
            subs: vec![("stir".to_string(), BTreeSet::from(["whisk".to_string()]))],
            triples: vec![
                (
                    "cooking".to_string(),
                    RelationKind::HasActor,
                    "subject_1".to_string(),
                ),
                (
                    "stir".to_string(),
                    RelationKind::HasObject,
                    "whisk".to_string(),
                ),
                (
                    "cooking".to_string(),
                    RelationKind::HasElement,
                    "stir".to_string(),
                ),
            ],
        }
    }

    #[test]
    fn serialization_masks_the_parent_label() {
        let query = parent_query();
        let text = serialize_component(&query.triples, Some(&query.gold));
        assert_eq!(text.lines().count(), query.triples.len());
        assert!(!text.contains("cooking"));
        assert!(text.contains("PARENT, has_actor, subject_1"));
        assert!(text.contains("PARENT, has_element, stir"));
        // Unmasked serialization keeps the label and stays stable.
        let unmasked = serialize_component(&query.triples, None);
        assert!(unmasked.starts_with("cooking, has_actor, subject_1\n"));
        assert_eq!(unmasked, serialize_component(&query.triples, None));
    }

    #[test]
    fn parent_prompt_matches_template() {
        let vocab = Vocabulary::default();
        let examples = vec![TrainExample {
            class: "sawing".to_string(),
            triples: vec![(
                "sawing".to_string(),
                RelationKind::HasActor,
                "subject_2".to_string(),
            )],
        }];
        let config = PromptConfig {
            endpoint: None,
            api_key: None,
            ..Default::default()
        };
        let messages = build_parent_prompt(&examples, &parent_query(), &config, &vocab);
        assert_eq!(messages.len(), 2);
        assert_eq!(messages[0].role, "system");
        assert_eq!(messages[0].content, PARENT_SYSTEM_PROMPT);
        let user = &messages[1].content;
        assert!(user.starts_with("Below are examples of parent actions"));
        assert!(user.contains("What is the parent action for the following graph?"));
        assert!(user.ends_with(
            "Answer nothing but one of the 9 possible parent actions: cooking, cooking_with_bowls, pouring, wiping, cereals, hard_drive, free_hard_drive, hammering, sawing."
        ));
    }

    #[test]
    fn examples_are_truncated_with_marker() {
        let vocab = Vocabulary::default();
        let triples: Vec<(String, RelationKind, String)> = (0..12)
            .map(|i| {
                (
                    "stir".to_string(),
                    RelationKind::HasNext,
                    format!("pour{i}"),
                )
            })
            .collect();
        let examples = vec![TrainExample {
            class: "cooking".to_string(),
            triples,
        }];
        let config = PromptConfig {
            max_triples_per_example: 5,
            endpoint: None,
            api_key: None,
            ..Default::default()
        };
        let messages = build_parent_prompt(&examples, &parent_query(), &config, &vocab);
        let user = &messages[1].content;
        assert!(user.contains("... (7 more triples omitted)"));
        let example_block = user
            .split("What is the parent action")
            .next()
            .unwrap()
            .to_string();
        let triple_lines = example_block
            .lines()
            .filter(|l| l.contains(", has_next, "))
            .count();
        assert_eq!(triple_lines, 5);
    }

    #[test]
    fn parse_answer_normalizes_and_matches() {
        let vocab = Vocabulary::default();
        let labels = vocab.parents().to_vec();
        let fallback = labels.clone();
        let ranked = parse_answer("Cooking.", &labels, &fallback).unwrap();
        assert_eq!(ranked[0], "cooking");
        assert_eq!(ranked.len(), 9);
        let ranked = parse_answer("I think it is hard_drive", &labels, &fallback).unwrap();
        assert_eq!(ranked[0], "hard_drive");
        // Longer labels win the substring race.
        let ranked = parse_answer("cooking_with_bowls!", &labels, &fallback).unwrap();
        assert_eq!(ranked[0], "cooking_with_bowls");
        assert!(matches!(
            parse_answer("sandwich", &labels, &fallback),
            Err(LlmError::UnparseableAnswer(_))
        ));
    }

    #[test]
    fn parse_answer_round_trips_all_labels() {
        let vocab = Vocabulary::default();
        let labels = vocab.parents().to_vec();
        for label in &labels {
            let ranked = parse_answer(label, &labels, &labels).unwrap();
            assert_eq!(&ranked[0], label);
        }
    }

    #[test]
    fn mock_transport_replays_and_cycles() {
        let script = r#"[{"response": "cooking"}, {"response": "sawing"}]"#;
        let transport = MockTransport::from_script(script, "script.json").unwrap();
        let request = ChatRequest {
            model: "m".to_string(),
            messages: vec![ChatMessage::user("q")],
            temperature: 0.0,
        };
        assert_eq!(transport.complete(&request).unwrap().text, "cooking");
        assert_eq!(transport.complete(&request).unwrap().text, "sawing");
        assert_eq!(transport.complete(&request).unwrap().text, "cooking");
    }

    #[test]
    fn chat_complete_retries_transient_failures() {
        let script = r#"[{"error": "transport"}, {"error": "rate_limited"}, {"response": "cooking"}]"#;
        let transport = MockTransport::from_script(script, "script.json").unwrap();
        let request = ChatRequest {
            model: "m".to_string(),
            messages: vec![ChatMessage::user("q")],
            temperature: 0.0,
        };
        let outcome = chat_complete(&transport, &request, 3, Duration::ZERO).unwrap();
        assert_eq!(outcome.text, "cooking");
    }

    #[test]
    fn chat_complete_gives_up_after_max_retries() {
        struct AlwaysTimeout(AtomicUsize);
        impl ChatTransport for AlwaysTimeout {
            fn complete(&self, _request: &ChatRequest) -> Result<ChatOutcome, LlmError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Err(LlmError::Timeout)
            }
        }
        let transport = AlwaysTimeout(AtomicUsize::new(0));
        let request = ChatRequest {
            model: "m".to_string(),
            messages: vec![ChatMessage::user("q")],
            temperature: 0.0,
        };
        let err = chat_complete(&transport, &request, 3, Duration::ZERO).unwrap_err();
        assert!(matches!(err, LlmError::Timeout));
        assert_eq!(transport.0.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn unparseable_answers_abstain_and_are_logged() {
        let vocab = Vocabulary::default();
        let transport = MockTransport::with_responses(&["sandwich"]);
        let predictor = LlmPredictor::new(
            transport,
            PromptConfig {
                endpoint: None,
                api_key: None,
                initial_backoff: Duration::ZERO,
                ..Default::default()
            },
            vocab.clone(),
            vec![],
            vec![],
            vocab.parents().to_vec(),
            vocab.sub_actions().to_vec(),
        );
        let prediction = predictor.predict_parent(&parent_query()).unwrap();
        assert_eq!(prediction, Prediction::Abstain);
        assert_eq!(predictor.unparseable_answers(), vec!["sandwich".to_string()]);
        assert_eq!(predictor.exchanges().len(), 1);
    }
}
