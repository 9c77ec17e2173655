//! Instance-level situational graph: nodes, relations, triples, components.
//!
//! A [`SituationalGraph`] is a directed labeled multigraph in which every
//! recorded activity forms its own weakly connected component. Nodes are
//! per-instance (two `stir` segments in the same recording are two nodes);
//! the label-level view used by embedding models is [`LabelProjection`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::vocab::Vocabulary;

/// Role a node plays in the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    ParentAction,
    SubAction,
    Actor,
    Object,
}

impl NodeKind {
    pub const ALL: [NodeKind; 4] = [
        NodeKind::ParentAction,
        NodeKind::SubAction,
        NodeKind::Actor,
        NodeKind::Object,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::ParentAction => "parent_action",
            NodeKind::SubAction => "sub_action",
            NodeKind::Actor => "actor",
            NodeKind::Object => "object",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The four edge types. Each has a fixed endpoint-kind signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationKind {
    HasActor,
    HasObject,
    HasElement,
    HasNext,
}

impl RelationKind {
    pub const ALL: [RelationKind; 4] = [
        RelationKind::HasActor,
        RelationKind::HasObject,
        RelationKind::HasElement,
        RelationKind::HasNext,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationKind::HasActor => "has_actor",
            RelationKind::HasObject => "has_object",
            RelationKind::HasElement => "has_element",
            RelationKind::HasNext => "has_next",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == s)
    }

    pub fn head_kind(self) -> NodeKind {
        match self {
            RelationKind::HasActor | RelationKind::HasElement => NodeKind::ParentAction,
            RelationKind::HasObject | RelationKind::HasNext => NodeKind::SubAction,
        }
    }

    pub fn tail_kind(self) -> NodeKind {
        match self {
            RelationKind::HasActor => NodeKind::Actor,
            RelationKind::HasObject => NodeKind::Object,
            RelationKind::HasElement | RelationKind::HasNext => NodeKind::SubAction,
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Opaque graph-wide unique node identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
}

/// Directed labeled edge between two node instances.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: NodeId,
    pub relation: RelationKind,
    pub tail: NodeId,
}

impl Triple {
    pub fn new(head: NodeId, relation: RelationKind, tail: NodeId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Identifies one recording: which task, performed by whom, which repetition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordingKey {
    pub task: String,
    pub subject: String,
    pub take: u32,
}

impl RecordingKey {
    pub fn new(task: impl Into<String>, subject: impl Into<String>, take: u32) -> Self {
        RecordingKey {
            task: task.into(),
            subject: subject.into(),
            take,
        }
    }
}

impl fmt::Display for RecordingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.task, self.subject, self.take)
    }
}

impl FromStr for RecordingKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(format!("recording key {s:?} is not task/subject/take"));
        }
        let take: u32 = parts[2]
            .parse()
            .map_err(|_| format!("recording key {s:?} has non-integer take"))?;
        if parts[0].is_empty() || parts[1].is_empty() {
            return Err(format!("recording key {s:?} has an empty field"));
        }
        Ok(RecordingKey::new(parts[0], parts[1], take))
    }
}

/// One sub-action step of a hand chain, with the objects associated to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainStep {
    pub label: String,
    pub objects: BTreeSet<String>,
}

impl ChainStep {
    pub fn new(label: impl Into<String>, objects: impl IntoIterator<Item = String>) -> Self {
        ChainStep {
            label: label.into(),
            objects: objects.into_iter().collect(),
        }
    }
}

/// Everything needed to emit one graph component: the recording key (task is
/// the parent label, subject the actor label) and per-hand sub-action chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordingComponent {
    pub key: RecordingKey,
    pub chains: Vec<Vec<ChainStep>>,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("duplicate recording key {0}")]
    DuplicateRecordingKey(RecordingKey),
    #[error("label {label:?} is not in the closed {kind} vocabulary (recording {key})")]
    VocabularyViolation {
        key: RecordingKey,
        kind: NodeKind,
        label: String,
    },
    #[error("label {label:?} contains a forbidden character (recording {key})")]
    InvalidLabel { key: RecordingKey, label: String },
    #[error("built graph violates invariants: {0}")]
    Invariant(Violations),
}

/// Wrapper so a violation list can be carried inside an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violations(pub Vec<Violation>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rendered: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&rendered.join("; "))
    }
}

/// A structural invariant broken by a graph, naming the node/triple at fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    RelationSignature { triple: Triple },
    DanglingEndpoint { triple: Triple },
    ReciprocalEdge { forward: Triple, backward: Triple },
    CrossRecordingEdge { triple: Triple },
    Cycle { node: NodeId },
    EmptyLabel { node: NodeId },
    VocabularyViolation { node: NodeId },
    ComponentCountMismatch { components: usize, recordings: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RelationSignature { triple } => write!(
                f,
                "relation signature violated by ({}, {}, {})",
                triple.head, triple.relation, triple.tail
            ),
            Violation::DanglingEndpoint { triple } => write!(
                f,
                "triple ({}, {}, {}) references a missing node",
                triple.head, triple.relation, triple.tail
            ),
            Violation::ReciprocalEdge { forward, backward } => write!(
                f,
                "reciprocal edges ({}, {}, {}) and ({}, {}, {})",
                forward.head,
                forward.relation,
                forward.tail,
                backward.head,
                backward.relation,
                backward.tail
            ),
            Violation::CrossRecordingEdge { triple } => write!(
                f,
                "edge ({}, {}, {}) crosses recordings",
                triple.head, triple.relation, triple.tail
            ),
            Violation::Cycle { node } => write!(f, "node {node} lies on a directed cycle"),
            Violation::EmptyLabel { node } => write!(f, "node {node} has an empty label"),
            Violation::VocabularyViolation { node } => {
                write!(f, "node {node} has a label outside its closed vocabulary")
            }
            Violation::ComponentCountMismatch {
                components,
                recordings,
            } => write!(
                f,
                "{components} weakly connected components but {recordings} recordings"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate node id {0}")]
    DuplicateNodeId(NodeId),
    #[error("triple references unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no recording {0} in graph")]
    UnknownRecording(RecordingKey),
}

/// Per-relation co-occurrence counts over node labels, plus per-kind label
/// sets. Collapsing instances to labels is what lets transductive embedding
/// models score test components whose instance nodes were never trained on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelProjection {
    counts: BTreeMap<RelationKind, BTreeMap<(String, String), u64>>,
    labels: BTreeMap<NodeKind, BTreeSet<String>>,
}

impl LabelProjection {
    pub fn count(&self, relation: RelationKind, head: &str, tail: &str) -> u64 {
        self.counts
            .get(&relation)
            .and_then(|m| m.get(&(head.to_string(), tail.to_string())))
            .copied()
            .unwrap_or(0)
    }

    /// All (head label, tail label) → count entries for one relation.
    pub fn pairs(&self, relation: RelationKind) -> impl Iterator<Item = (&str, &str, u64)> {
        self.counts
            .get(&relation)
            .into_iter()
            .flat_map(|m| m.iter().map(|((h, t), c)| (h.as_str(), t.as_str(), *c)))
    }

    pub fn total(&self, relation: RelationKind) -> u64 {
        self.counts
            .get(&relation)
            .map(|m| m.values().sum())
            .unwrap_or(0)
    }

    /// Labels occurring with the given node kind.
    pub fn labels_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &str> {
        self.labels
            .get(&kind)
            .into_iter()
            .flat_map(|s| s.iter().map(|l| l.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.values().all(|m| m.is_empty())
    }

    pub fn contains(&self, relation: RelationKind, head: &str, tail: &str) -> bool {
        self.count(relation, head, tail) > 0
    }

    pub(crate) fn add(&mut self, relation: RelationKind, head: &str, tail: &str, by: u64) {
        *self
            .counts
            .entry(relation)
            .or_default()
            .entry((head.to_string(), tail.to_string()))
            .or_insert(0) += by;
    }

    pub(crate) fn add_label(&mut self, kind: NodeKind, label: &str) {
        self.labels.entry(kind).or_default().insert(label.to_string());
    }
}

/// Ordered view of one recording's component: parent/actor labels and the
/// per-hand sub-action chains in temporal order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentView {
    pub key: RecordingKey,
    pub parent: String,
    pub actor: String,
    pub chains: Vec<Vec<SubInstance>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubInstance {
    pub id: NodeId,
    pub label: String,
    pub objects: BTreeSet<String>,
}

impl ComponentView {
    /// Sub-action instances across all chains, chain by chain.
    pub fn sub_instances(&self) -> impl Iterator<Item = &SubInstance> {
        self.chains.iter().flatten()
    }

    /// Label-level triples of the component, ordered by relation kind and
    /// then chain position (objects sorted within a step).
    pub fn ordered_label_triples(&self) -> Vec<(String, RelationKind, String)> {
        let mut out = Vec::new();
        out.push((
            self.parent.clone(),
            RelationKind::HasActor,
            self.actor.clone(),
        ));
        for chain in &self.chains {
            for step in chain {
                for obj in &step.objects {
                    out.push((step.label.clone(), RelationKind::HasObject, obj.clone()));
                }
            }
        }
        for chain in &self.chains {
            for step in chain {
                out.push((
                    self.parent.clone(),
                    RelationKind::HasElement,
                    step.label.clone(),
                ));
            }
        }
        for chain in &self.chains {
            for pair in chain.windows(2) {
                out.push((
                    pair[0].label.clone(),
                    RelationKind::HasNext,
                    pair[1].label.clone(),
                ));
            }
        }
        out
    }
}

/// Directed instance-level multigraph; one weakly connected component per
/// recording. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SituationalGraph {
    nodes: BTreeMap<NodeId, Node>,
    triples: BTreeSet<Triple>,
    recording_of: BTreeMap<NodeId, RecordingKey>,
}

impl SituationalGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles a graph from explicit parts, checking only id uniqueness and
    /// endpoint existence. Structural invariants are checked by [`validate`].
    ///
    /// [`validate`]: SituationalGraph::validate
    pub fn from_parts(
        nodes: Vec<(Node, RecordingKey)>,
        triples: Vec<Triple>,
    ) -> Result<Self, GraphError> {
        let mut graph = SituationalGraph::new();
        for (node, key) in nodes {
            if graph.nodes.contains_key(&node.id) {
                return Err(GraphError::DuplicateNodeId(node.id));
            }
            graph.recording_of.insert(node.id.clone(), key);
            graph.nodes.insert(node.id.clone(), node);
        }
        for triple in triples {
            for end in [&triple.head, &triple.tail] {
                if !graph.nodes.contains_key(end) {
                    return Err(GraphError::UnknownNode(end.clone()));
                }
            }
            graph.triples.insert(triple);
        }
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn recording_of(&self, id: &NodeId) -> Option<&RecordingKey> {
        self.recording_of.get(id)
    }

    /// Distinct recording keys present in the graph.
    pub fn recording_keys(&self) -> BTreeSet<RecordingKey> {
        self.recording_of.values().cloned().collect()
    }

    /// Builds the instance graph from recording component descriptions.
    ///
    /// Node ids are `label#task/subject/take#ordinal`, where the ordinal
    /// disambiguates repeated labels within one recording. Emits, per
    /// component: one parent-action node, one actor node, one sub-action node
    /// per chain step, one object node per distinct associated object label,
    /// and the has_actor / has_element / has_next / has_object triples.
    pub fn build_graph(
        components: &[RecordingComponent],
        vocab: &Vocabulary,
    ) -> Result<SituationalGraph, BuildError> {
        let mut graph = SituationalGraph::new();
        let mut seen_keys: BTreeSet<RecordingKey> = BTreeSet::new();
        for component in components {
            let key = &component.key;
            if !seen_keys.insert(key.clone()) {
                return Err(BuildError::DuplicateRecordingKey(key.clone()));
            }
            if !vocab.is_parent(&key.task) {
                return Err(BuildError::VocabularyViolation {
                    key: key.clone(),
                    kind: NodeKind::ParentAction,
                    label: key.task.clone(),
                });
            }
            let mut ordinals: BTreeMap<String, usize> = BTreeMap::new();
            let mut fresh_id = |label: &str| -> NodeId {
                let ordinal = ordinals.entry(label.to_string()).or_insert(0);
                let id = NodeId::new(format!("{label}#{key}#{ordinal}"));
                *ordinal += 1;
                id
            };
            let add_node = |graph: &mut SituationalGraph, id: &NodeId, kind, label: &str| {
                graph.nodes.insert(
                    id.clone(),
                    Node {
                        id: id.clone(),
                        kind,
                        label: label.to_string(),
                    },
                );
                graph.recording_of.insert(id.clone(), key.clone());
            };

            for label in std::iter::once(key.task.as_str())
                .chain(std::iter::once(key.subject.as_str()))
                .chain(
                    component
                        .chains
                        .iter()
                        .flatten()
                        .flat_map(|s| std::iter::once(s.label.as_str()).chain(s.objects.iter().map(|o| o.as_str()))),
                )
            {
                if label.is_empty() || label.contains(['\t', '\n', '\r']) {
                    return Err(BuildError::InvalidLabel {
                        key: key.clone(),
                        label: label.to_string(),
                    });
                }
            }

            let parent_id = fresh_id(&key.task);
            add_node(&mut graph, &parent_id, NodeKind::ParentAction, &key.task);
            let actor_id = fresh_id(&key.subject);
            add_node(&mut graph, &actor_id, NodeKind::Actor, &key.subject);
            graph.triples.insert(Triple::new(
                parent_id.clone(),
                RelationKind::HasActor,
                actor_id,
            ));

            // Distinct object labels get one node each, shared across steps.
            let mut object_ids: BTreeMap<String, NodeId> = BTreeMap::new();
            let mut sub_ids: Vec<Vec<NodeId>> = Vec::new();
            for chain in &component.chains {
                let mut ids = Vec::with_capacity(chain.len());
                for step in chain {
                    if !vocab.is_sub_action(&step.label) {
                        return Err(BuildError::VocabularyViolation {
                            key: key.clone(),
                            kind: NodeKind::SubAction,
                            label: step.label.clone(),
                        });
                    }
                    let sub_id = fresh_id(&step.label);
                    add_node(&mut graph, &sub_id, NodeKind::SubAction, &step.label);
                    graph.triples.insert(Triple::new(
                        parent_id.clone(),
                        RelationKind::HasElement,
                        sub_id.clone(),
                    ));
                    ids.push(sub_id);
                }
                sub_ids.push(ids);
            }
            for (chain, ids) in component.chains.iter().zip(&sub_ids) {
                for (step, sub_id) in chain.iter().zip(ids) {
                    for object in &step.objects {
                        let object_id = match object_ids.get(object) {
                            Some(id) => id.clone(),
                            None => {
                                let id = fresh_id(object);
                                add_node(&mut graph, &id, NodeKind::Object, object);
                                object_ids.insert(object.clone(), id.clone());
                                id
                            }
                        };
                        graph.triples.insert(Triple::new(
                            sub_id.clone(),
                            RelationKind::HasObject,
                            object_id,
                        ));
                    }
                }
                for pair in ids.windows(2) {
                    graph.triples.insert(Triple::new(
                        pair[0].clone(),
                        RelationKind::HasNext,
                        pair[1].clone(),
                    ));
                }
            }
        }
        let violations = graph.validate(vocab);
        if !violations.is_empty() {
            return Err(BuildError::Invariant(Violations(violations)));
        }
        Ok(graph)
    }

    /// Maps every node to a dense component index (0-based). Two nodes share
    /// an index iff connected when edge direction is ignored. Indices follow
    /// first discovery over nodes in id order.
    pub fn weakly_connected_components(&self) -> BTreeMap<NodeId, usize> {
        let mut undirected: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
        for triple in &self.triples {
            undirected.entry(&triple.head).or_default().push(&triple.tail);
            undirected.entry(&triple.tail).or_default().push(&triple.head);
        }
        let mut component: BTreeMap<NodeId, usize> = BTreeMap::new();
        let mut next_index = 0usize;
        for id in self.nodes.keys() {
            if component.contains_key(id) {
                continue;
            }
            let index = next_index;
            next_index += 1;
            let mut queue = VecDeque::from([id]);
            component.insert(id.clone(), index);
            while let Some(current) = queue.pop_front() {
                for neighbor in undirected.get(current).into_iter().flatten() {
                    if !component.contains_key(*neighbor) {
                        component.insert((*neighbor).clone(), index);
                        queue.push_back(neighbor);
                    }
                }
            }
        }
        component
    }

    /// Collapses instance triples to per-relation label co-occurrence counts.
    pub fn label_projection(&self) -> LabelProjection {
        let mut projection = LabelProjection::default();
        for node in self.nodes.values() {
            projection.add_label(node.kind, &node.label);
        }
        for triple in &self.triples {
            let head = &self.nodes[&triple.head].label;
            let tail = &self.nodes[&triple.tail].label;
            projection.add(triple.relation, head, tail, 1);
        }
        projection
    }

    /// Checks every structural invariant; returns an empty list iff all hold.
    pub fn validate(&self, vocab: &Vocabulary) -> Vec<Violation> {
        let mut violations = Vec::new();

        for node in self.nodes.values() {
            if node.label.is_empty() {
                violations.push(Violation::EmptyLabel {
                    node: node.id.clone(),
                });
            }
            let in_vocab = match node.kind {
                NodeKind::ParentAction => vocab.is_parent(&node.label),
                NodeKind::SubAction => vocab.is_sub_action(&node.label),
                NodeKind::Actor | NodeKind::Object => true,
            };
            if !in_vocab && !node.label.is_empty() {
                violations.push(Violation::VocabularyViolation {
                    node: node.id.clone(),
                });
            }
        }

        let mut reverse_pairs: BTreeSet<(&NodeId, &NodeId)> = BTreeSet::new();
        for triple in &self.triples {
            reverse_pairs.insert((&triple.head, &triple.tail));
        }
        for triple in &self.triples {
            let (head, tail) = match (self.nodes.get(&triple.head), self.nodes.get(&triple.tail)) {
                (Some(h), Some(t)) => (h, t),
                _ => {
                    violations.push(Violation::DanglingEndpoint {
                        triple: triple.clone(),
                    });
                    continue;
                }
            };
            if head.kind != triple.relation.head_kind() || tail.kind != triple.relation.tail_kind()
            {
                violations.push(Violation::RelationSignature {
                    triple: triple.clone(),
                });
            }
            if reverse_pairs.contains(&(&triple.tail, &triple.head)) && triple.head < triple.tail {
                let backward = self
                    .triples
                    .iter()
                    .find(|t| t.head == triple.tail && t.tail == triple.head)
                    .expect("reverse pair recorded")
                    .clone();
                violations.push(Violation::ReciprocalEdge {
                    forward: triple.clone(),
                    backward,
                });
            }
            match (
                self.recording_of.get(&triple.head),
                self.recording_of.get(&triple.tail),
            ) {
                (Some(a), Some(b)) if a != b => {
                    violations.push(Violation::CrossRecordingEdge {
                        triple: triple.clone(),
                    });
                }
                _ => {}
            }
        }

        if let Some(node) = self.find_cycle_node() {
            violations.push(Violation::Cycle { node });
        }

        let components = self
            .weakly_connected_components()
            .values()
            .copied()
            .collect::<BTreeSet<usize>>()
            .len();
        let recordings = self.recording_keys().len();
        if components != recordings {
            violations.push(Violation::ComponentCountMismatch {
                components,
                recordings,
            });
        }

        violations
    }

    /// Iterative three-color DFS; returns a node on a directed cycle, if any.
    fn find_cycle_node(&self) -> Option<NodeId> {
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let out = self.out_adjacency();
        let mut color: BTreeMap<&NodeId, Color> =
            self.nodes.keys().map(|id| (id, Color::White)).collect();
        for start in self.nodes.keys() {
            if color[start] != Color::White {
                continue;
            }
            // Stack holds (node, next-child index).
            let mut stack: Vec<(&NodeId, usize)> = vec![(start, 0)];
            color.insert(start, Color::Gray);
            while let Some((node, child)) = stack.pop() {
                let children = out.get(node).map(Vec::as_slice).unwrap_or(&[]);
                if child < children.len() {
                    stack.push((node, child + 1));
                    let next = children[child];
                    match color[next] {
                        Color::White => {
                            color.insert(next, Color::Gray);
                            stack.push((next, 0));
                        }
                        Color::Gray => return Some(next.clone()),
                        Color::Black => {}
                    }
                } else {
                    color.insert(node, Color::Black);
                }
            }
        }
        None
    }

    pub(crate) fn out_adjacency(&self) -> BTreeMap<&NodeId, Vec<&NodeId>> {
        let mut out: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
        for triple in &self.triples {
            out.entry(&triple.head).or_default().push(&triple.tail);
        }
        out
    }

    /// Full subgraph induced by the given recordings.
    pub fn subgraph<'a>(&self, keys: impl IntoIterator<Item = &'a RecordingKey>) -> SituationalGraph {
        let wanted: BTreeSet<&RecordingKey> = keys.into_iter().collect();
        let mut graph = SituationalGraph::new();
        for (id, key) in &self.recording_of {
            if wanted.contains(key) {
                graph.nodes.insert(id.clone(), self.nodes[id].clone());
                graph.recording_of.insert(id.clone(), key.clone());
            }
        }
        for triple in &self.triples {
            if graph.nodes.contains_key(&triple.head) && graph.nodes.contains_key(&triple.tail) {
                graph.triples.insert(triple.clone());
            }
        }
        graph
    }

    /// Ordered per-hand view of one recording's component. Chains start at
    /// sub-action nodes with no incoming has_next edge (in id order) and
    /// follow has_next links.
    pub fn component_view(&self, key: &RecordingKey) -> Result<ComponentView, GraphError> {
        let ids: Vec<&NodeId> = self
            .recording_of
            .iter()
            .filter(|(_, k)| *k == key)
            .map(|(id, _)| id)
            .collect();
        if ids.is_empty() {
            return Err(GraphError::UnknownRecording(key.clone()));
        }
        let mut parent = None;
        let mut actor = None;
        let mut subs: BTreeSet<&NodeId> = BTreeSet::new();
        for id in &ids {
            let node = &self.nodes[*id];
            match node.kind {
                NodeKind::ParentAction => parent = Some(node.label.clone()),
                NodeKind::Actor => actor = Some(node.label.clone()),
                NodeKind::SubAction => {
                    subs.insert(*id);
                }
                NodeKind::Object => {}
            }
        }
        let mut next_of: BTreeMap<&NodeId, &NodeId> = BTreeMap::new();
        let mut has_pred: BTreeSet<&NodeId> = BTreeSet::new();
        let mut objects_of: BTreeMap<&NodeId, BTreeSet<String>> = BTreeMap::new();
        for triple in &self.triples {
            if !subs.contains(&triple.head) {
                continue;
            }
            match triple.relation {
                RelationKind::HasNext => {
                    next_of.entry(&triple.head).or_insert(&triple.tail);
                    has_pred.insert(&triple.tail);
                }
                RelationKind::HasObject => {
                    objects_of
                        .entry(&triple.head)
                        .or_default()
                        .insert(self.nodes[&triple.tail].label.clone());
                }
                _ => {}
            }
        }
        let mut chains = Vec::new();
        let mut visited: BTreeSet<&NodeId> = BTreeSet::new();
        for head in subs.iter().filter(|id| !has_pred.contains(*id)) {
            let mut chain = Vec::new();
            let mut current = Some(*head);
            while let Some(id) = current {
                if !visited.insert(id) {
                    break;
                }
                chain.push(SubInstance {
                    id: id.clone(),
                    label: self.nodes[id].label.clone(),
                    objects: objects_of.get(id).cloned().unwrap_or_default(),
                });
                current = next_of.get(id).copied();
            }
            if !chain.is_empty() {
                chains.push(chain);
            }
        }
        Ok(ComponentView {
            key: key.clone(),
            parent: parent.unwrap_or_default(),
            actor: actor.unwrap_or_default(),
            chains,
        })
    }
}
