//! Recording annotations: parsing, repair, and object association.
//!
//! An annotation document carries per-hand sub-action segments (frame
//! ranges) and per-frame 3D boxes for both hands and all tracked objects.
//! Objects are associated to a segment when the hand box and the object box
//! intersect in at least a configurable fraction of the segment's frames.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ChainStep, RecordingComponent, RecordingKey};

pub const LEFT_HAND: &str = "left_hand";
pub const RIGHT_HAND: &str = "right_hand";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Left, Hand::Right];

    pub fn body_name(self) -> &'static str {
        match self {
            Hand::Left => LEFT_HAND,
            Hand::Right => RIGHT_HAND,
        }
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hand::Left => f.write_str("left"),
            Hand::Right => f.write_str("right"),
        }
    }
}

/// Axis-aligned 3D box, min corner then max corner, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3 {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Box3 {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Box3 { min, max }
    }

    pub fn from_corners(c: [f64; 6]) -> Self {
        Box3 {
            min: [c[0], c[1], c[2]],
            max: [c[3], c[4], c[5]],
        }
    }

    pub fn corners(&self) -> [f64; 6] {
        [
            self.min[0], self.min[1], self.min[2], self.max[0], self.max[1], self.max[2],
        ]
    }

    fn is_normalized(&self) -> bool {
        (0..3).all(|i| self.min[i] <= self.max[i])
    }

    fn normalized(mut self) -> Self {
        for i in 0..3 {
            if self.min[i] > self.max[i] {
                std::mem::swap(&mut self.min[i], &mut self.max[i]);
            }
        }
        self
    }
}

/// Closed-interval intersection test on all three axes: touching counts.
pub fn boxes_intersect(a: &Box3, b: &Box3) -> bool {
    (0..3).all(|i| a.min[i] <= b.max[i] && b.min[i] <= a.max[i])
}

/// One sub-action segment: closed frame range `[start, end]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(rename = "action")]
    pub label: String,
    pub start: u64,
    pub end: u64,
}

/// Parsed and repaired recording annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingAnnotation {
    pub task: String,
    pub subject: String,
    pub take: u32,
    pub hands: BTreeMap<Hand, Vec<Segment>>,
    /// Body name (hands and objects) to per-frame boxes, sorted by frame.
    pub boxes: BTreeMap<String, Vec<(u64, Box3)>>,
}

impl RecordingAnnotation {
    pub fn key(&self) -> RecordingKey {
        RecordingKey::new(self.task.clone(), self.subject.clone(), self.take)
    }

    pub fn segments(&self, hand: Hand) -> &[Segment] {
        self.hands.get(&hand).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Tracked body names that are not hands.
    pub fn object_names(&self) -> impl Iterator<Item = &str> {
        self.boxes
            .keys()
            .map(String::as_str)
            .filter(|n| *n != LEFT_HAND && *n != RIGHT_HAND)
    }
}

/// Fraction of segment frames in which hand and object boxes must intersect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationPolicy {
    pub min_overlap_fraction: f64,
}

impl Default for AssociationPolicy {
    fn default() -> Self {
        AssociationPolicy {
            min_overlap_fraction: 0.5,
        }
    }
}

impl AssociationPolicy {
    pub fn new(min_overlap_fraction: f64) -> Result<Self, IngestError> {
        if !(0.0..=1.0).contains(&min_overlap_fraction) || min_overlap_fraction.is_nan() {
            return Err(IngestError::InvalidPolicy(min_overlap_fraction));
        }
        Ok(AssociationPolicy {
            min_overlap_fraction,
        })
    }
}

/// An automated fix applied while parsing an inconsistent annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Repair {
    /// Earlier segment's end clipped to the later segment's start.
    ClippedOverlap { hand: Hand, index: usize },
    /// Segments were not ordered by start frame and were sorted.
    ReorderedSegments { hand: Hand },
    /// A segment had start > end; endpoints were swapped.
    SwappedSegment { hand: Hand, index: usize },
    /// A box had min > max on some axis; corners were swapped.
    NormalizedBox { body: String, frame: u64 },
    /// Duplicate frame entries for a body; first kept.
    DroppedDuplicateFrame { body: String, frame: u64 },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("empty recording: no segments on either hand")]
    EmptyRecording,
    #[error("min_overlap_fraction {0} is outside [0, 1]")]
    InvalidPolicy(f64),
}

#[derive(Debug, Deserialize, Serialize)]
struct RawDocument {
    task: String,
    subject: String,
    take: i64,
    hands: RawHands,
    #[serde(default)]
    boxes: BTreeMap<String, Vec<RawBoxFrame>>,
}

#[derive(Debug, Default, Deserialize, Serialize)]
struct RawHands {
    #[serde(default)]
    left: Vec<Segment>,
    #[serde(default)]
    right: Vec<Segment>,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawBoxFrame {
    frame: i64,
    #[serde(rename = "box")]
    corners: [f64; 6],
}

/// Parses an annotation JSON document, repairing temporal and spatial
/// inconsistencies (reported in the returned repair list).
pub fn parse_recording(text: &str) -> Result<(RecordingAnnotation, Vec<Repair>), IngestError> {
    let raw: RawDocument =
        serde_json::from_str(text).map_err(|e| IngestError::Schema(e.to_string()))?;
    if raw.task.is_empty() {
        return Err(IngestError::Schema("task is empty".to_string()));
    }
    if raw.subject.is_empty() {
        return Err(IngestError::Schema("subject is empty".to_string()));
    }
    if !(1..=10).contains(&raw.take) {
        return Err(IngestError::Schema(format!(
            "take {} is outside 1..=10",
            raw.take
        )));
    }
    if raw.hands.left.is_empty() && raw.hands.right.is_empty() {
        return Err(IngestError::EmptyRecording);
    }

    let mut repairs = Vec::new();
    let mut hands = BTreeMap::new();
    for (hand, raw_segments) in [(Hand::Left, raw.hands.left), (Hand::Right, raw.hands.right)] {
        if raw_segments.is_empty() {
            continue;
        }
        let mut segments = Vec::with_capacity(raw_segments.len());
        for (index, mut seg) in raw_segments.into_iter().enumerate() {
            if seg.label.is_empty() {
                return Err(IngestError::Schema(format!(
                    "{hand} hand segment {index} has an empty action"
                )));
            }
            if seg.start > seg.end {
                std::mem::swap(&mut seg.start, &mut seg.end);
                repairs.push(Repair::SwappedSegment { hand, index });
            }
            segments.push(seg);
        }
        let ordered = segments
            .windows(2)
            .all(|w| (w[0].start, w[0].end) <= (w[1].start, w[1].end));
        if !ordered {
            segments.sort_by_key(|s| (s.start, s.end, s.label.clone()));
            repairs.push(Repair::ReorderedSegments { hand });
        }
        for i in 0..segments.len().saturating_sub(1) {
            let next_start = segments[i + 1].start;
            if segments[i].end > next_start {
                segments[i].end = next_start;
                repairs.push(Repair::ClippedOverlap { hand, index: i });
            }
        }
        hands.insert(hand, segments);
    }

    let mut boxes = BTreeMap::new();
    for (body, frames) in raw.boxes {
        if body.is_empty() {
            return Err(IngestError::Schema("box body name is empty".to_string()));
        }
        let mut per_frame: BTreeMap<u64, Box3> = BTreeMap::new();
        for entry in frames {
            if entry.frame < 0 {
                return Err(IngestError::Schema(format!(
                    "body {body:?} has a negative frame index"
                )));
            }
            if entry.corners.iter().any(|v| !v.is_finite()) {
                return Err(IngestError::Schema(format!(
                    "body {body:?} frame {} has a non-finite box",
                    entry.frame
                )));
            }
            let frame = entry.frame as u64;
            let mut b = Box3::from_corners(entry.corners);
            if !b.is_normalized() {
                b = b.normalized();
                repairs.push(Repair::NormalizedBox {
                    body: body.clone(),
                    frame,
                });
            }
            if per_frame.contains_key(&frame) {
                repairs.push(Repair::DroppedDuplicateFrame {
                    body: body.clone(),
                    frame,
                });
            } else {
                per_frame.insert(frame, b);
            }
        }
        boxes.insert(body, per_frame.into_iter().collect());
    }

    Ok((
        RecordingAnnotation {
            task: raw.task,
            subject: raw.subject,
            take: raw.take as u32,
            hands,
            boxes,
        },
        repairs,
    ))
}

/// Serializes an annotation back to its JSON document form.
pub fn render_recording(annotation: &RecordingAnnotation) -> String {
    let raw = RawDocument {
        task: annotation.task.clone(),
        subject: annotation.subject.clone(),
        take: annotation.take as i64,
        hands: RawHands {
            left: annotation.segments(Hand::Left).to_vec(),
            right: annotation.segments(Hand::Right).to_vec(),
        },
        boxes: annotation
            .boxes
            .iter()
            .map(|(body, frames)| {
                (
                    body.clone(),
                    frames
                        .iter()
                        .map(|(frame, b)| RawBoxFrame {
                            frame: *frame as i64,
                            corners: b.corners(),
                        })
                        .collect(),
                )
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("annotation serializes")
}

/// Object labels associated to each segment, keyed by (hand, segment index).
pub type Associations = BTreeMap<(Hand, usize), BTreeSet<String>>;

/// Associates objects to segments by per-frame box intersection. An object
/// qualifies when hand and object boxes intersect in at least
/// `min_overlap_fraction` of the segment frames that have box data for both
/// bodies. Segments with no such frames get the empty set.
pub fn associate_objects(
    annotation: &RecordingAnnotation,
    policy: &AssociationPolicy,
) -> Associations {
    let frame_maps: BTreeMap<&str, BTreeMap<u64, &Box3>> = annotation
        .boxes
        .iter()
        .map(|(body, frames)| {
            (
                body.as_str(),
                frames.iter().map(|(f, b)| (*f, b)).collect(),
            )
        })
        .collect();

    let mut associations = Associations::new();
    for hand in Hand::BOTH {
        let hand_frames = frame_maps.get(hand.body_name());
        for (index, segment) in annotation.segments(hand).iter().enumerate() {
            let mut associated = BTreeSet::new();
            if let Some(hand_frames) = hand_frames {
                for object in annotation.object_names() {
                    let object_frames = &frame_maps[object];
                    let mut with_data = 0u64;
                    let mut intersecting = 0u64;
                    for frame in segment.start..=segment.end {
                        let (Some(hand_box), Some(object_box)) =
                            (hand_frames.get(&frame), object_frames.get(&frame))
                        else {
                            continue;
                        };
                        with_data += 1;
                        if boxes_intersect(hand_box, object_box) {
                            intersecting += 1;
                        }
                    }
                    if with_data > 0
                        && intersecting as f64 / with_data as f64 >= policy.min_overlap_fraction
                    {
                        associated.insert(object.to_string());
                    }
                }
            }
            associations.insert((hand, index), associated);
        }
    }
    associations
}

/// Emits the recording component description: per-hand chains of
/// (sub-action label, associated objects), in hand order (left, right).
pub fn recording_to_component(
    annotation: &RecordingAnnotation,
    associations: &Associations,
) -> RecordingComponent {
    let mut chains = Vec::new();
    for hand in Hand::BOTH {
        let segments = annotation.segments(hand);
        if segments.is_empty() {
            continue;
        }
        let chain: Vec<ChainStep> = segments
            .iter()
            .enumerate()
            .map(|(index, segment)| {
                let objects = associations
                    .get(&(hand, index))
                    .cloned()
                    .unwrap_or_default();
                ChainStep::new(segment.label.clone(), objects)
            })
            .collect();
        chains.push(chain);
    }
    RecordingComponent {
        key: annotation.key(),
        chains,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed(min_x: f64, max_x: f64) -> Box3 {
        Box3::new([min_x, 0.0, 0.0], [max_x, 1.0, 1.0])
    }

    #[test]
    fn boxes_intersect_boundary_conventions() {
        let a = Box3::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]);
        let touching = Box3::new([1.0, 1.0, 1.0], [2.0, 2.0, 2.0]);
        let apart = Box3::new([2.0, 0.0, 0.0], [3.0, 1.0, 1.0]);
        assert!(boxes_intersect(&a, &touching));
        assert!(!boxes_intersect(&a, &apart));
        assert!(boxes_intersect(&a, &a));
    }

    #[test]
    fn parse_minimal_document() {
        let text = r#"{
            "task": "cooking", "subject": "subject_1", "take": 1,
            "hands": {"right": [{"action": "stir", "start": 0, "end": 10}]},
            "boxes": {}
        }"#;
        let (annotation, repairs) = parse_recording(text).unwrap();
        assert!(repairs.is_empty());
        assert_eq!(annotation.segments(Hand::Right).len(), 1);
        assert_eq!(annotation.segments(Hand::Left).len(), 0);
        assert_eq!(annotation.take, 1);
    }

    #[test]
    fn parse_clips_overlapping_segments() {
        let text = r#"{
            "task": "cooking", "subject": "subject_1", "take": 1,
            "hands": {"right": [
                {"action": "stir", "start": 0, "end": 12},
                {"action": "pour", "start": 10, "end": 20}
            ]},
            "boxes": {}
        }"#;
        let (annotation, repairs) = parse_recording(text).unwrap();
        let segments = annotation.segments(Hand::Right);
        assert_eq!((segments[0].start, segments[0].end), (0, 10));
        assert_eq!((segments[1].start, segments[1].end), (10, 20));
        assert_eq!(
            repairs,
            vec![Repair::ClippedOverlap {
                hand: Hand::Right,
                index: 0
            }]
        );
    }

    #[test]
    fn parse_missing_task_is_schema_error() {
        let text = r#"{"subject": "s", "take": 1, "hands": {"right": []}, "boxes": {}}"#;
        let err = parse_recording(text).unwrap_err();
        match err {
            IngestError::Schema(message) => assert!(message.contains("task")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_empty_recording() {
        let text = r#"{"task": "t", "subject": "s", "take": 1, "hands": {}, "boxes": {}}"#;
        assert!(matches!(
            parse_recording(text).unwrap_err(),
            IngestError::EmptyRecording
        ));
    }

    #[test]
    fn parse_normalizes_inverted_boxes() {
        let text = r#"{
            "task": "t", "subject": "s", "take": 1,
            "hands": {"right": [{"action": "stir", "start": 0, "end": 1}]},
            "boxes": {"pot": [{"frame": 0, "box": [1, 0, 0, 0, 1, 1]}]}
        }"#;
        let (annotation, repairs) = parse_recording(text).unwrap();
        let (_, b) = annotation.boxes["pot"][0];
        assert_eq!(b.min[0], 0.0);
        assert_eq!(b.max[0], 1.0);
        assert!(repairs
            .iter()
            .any(|r| matches!(r, Repair::NormalizedBox { .. })));
    }

    fn annotation_with_overlap(frames_overlapping: u64, total: u64) -> RecordingAnnotation {
        let hand_boxes: Vec<(u64, Box3)> = (0..total)
            .map(|f| {
                let b = if f < frames_overlapping {
                    boxed(0.0, 1.0)
                } else {
                    boxed(10.0, 11.0)
                };
                (f, b)
            })
            .collect();
        let object_boxes: Vec<(u64, Box3)> = (0..total).map(|f| (f, boxed(0.5, 1.5))).collect();
        RecordingAnnotation {
            task: "cooking".to_string(),
            subject: "subject_1".to_string(),
            take: 1,
            hands: BTreeMap::from([(
                Hand::Right,
                vec![Segment {
                    label: "stir".to_string(),
                    start: 0,
                    end: total - 1,
                }],
            )]),
            boxes: BTreeMap::from([
                (RIGHT_HAND.to_string(), hand_boxes),
                ("pot".to_string(), object_boxes),
            ]),
        }
    }

    #[test]
    fn associate_objects_threshold() {
        let policy = AssociationPolicy::new(0.5).unwrap();
        let full = associate_objects(&annotation_with_overlap(10, 10), &policy);
        assert_eq!(
            full[&(Hand::Right, 0)],
            BTreeSet::from(["pot".to_string()])
        );
        let sparse = associate_objects(&annotation_with_overlap(2, 10), &policy);
        assert!(sparse[&(Hand::Right, 0)].is_empty());
    }

    #[test]
    fn associate_objects_without_frame_data() {
        let mut annotation = annotation_with_overlap(10, 10);
        annotation.boxes.clear();
        let policy = AssociationPolicy::default();
        let assoc = associate_objects(&annotation, &policy);
        assert!(assoc[&(Hand::Right, 0)].is_empty());
    }

    /// Independent frame-by-frame recount over a hand-crafted 3-object
    /// recording, compared against associate_objects.
    #[test]
    fn associate_objects_matches_bruteforce() {
        let total = 12u64;
        let mut boxes: BTreeMap<String, Vec<(u64, Box3)>> = BTreeMap::new();
        boxes.insert(
            RIGHT_HAND.to_string(),
            (0..total).map(|f| (f, boxed(f as f64, f as f64 + 2.0))).collect(),
        );
        boxes.insert(
            "pot".to_string(),
            (0..total).map(|f| (f, boxed(3.0, 5.0))).collect(),
        );
        boxes.insert(
            "whisk".to_string(),
            (0..total).map(|f| (f, boxed(8.0, 9.0))).collect(),
        );
        // Sparse data: only even frames tracked for the cup.
        boxes.insert(
            "cup".to_string(),
            (0..total)
                .filter(|f| f % 2 == 0)
                .map(|f| (f, boxed(0.0, 4.0)))
                .collect(),
        );
        let annotation = RecordingAnnotation {
            task: "cooking".to_string(),
            subject: "subject_1".to_string(),
            take: 1,
            hands: BTreeMap::from([(
                Hand::Right,
                vec![
                    Segment {
                        label: "approach".to_string(),
                        start: 0,
                        end: 5,
                    },
                    Segment {
                        label: "stir".to_string(),
                        start: 6,
                        end: 11,
                    },
                ],
            )]),
            boxes,
        };
        for threshold in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let policy = AssociationPolicy::new(threshold).unwrap();
            let got = associate_objects(&annotation, &policy);
            // Brute force: recount directly from raw frame lists.
            for (index, segment) in annotation.segments(Hand::Right).iter().enumerate() {
                let mut expected = BTreeSet::new();
                for object in ["cup", "pot", "whisk"] {
                    let mut with_data = 0.0;
                    let mut hit = 0.0;
                    for frame in segment.start..=segment.end {
                        let hand = annotation.boxes[RIGHT_HAND]
                            .iter()
                            .find(|(f, _)| *f == frame);
                        let obj = annotation.boxes[object].iter().find(|(f, _)| *f == frame);
                        if let (Some((_, hb)), Some((_, ob))) = (hand, obj) {
                            with_data += 1.0;
                            if boxes_intersect(hb, ob) {
                                hit += 1.0;
                            }
                        }
                    }
                    if with_data > 0.0 && hit / with_data >= threshold {
                        expected.insert(object.to_string());
                    }
                }
                assert_eq!(got[&(Hand::Right, index)], expected, "threshold {threshold}");
            }
        }
    }

    #[test]
    fn association_monotone_in_threshold() {
        let annotation = annotation_with_overlap(5, 10);
        let mut previous: Option<BTreeSet<String>> = None;
        for threshold in [0.0, 0.2, 0.4, 0.5, 0.6, 1.0] {
            let policy = AssociationPolicy::new(threshold).unwrap();
            let assoc = associate_objects(&annotation, &policy);
            let current = assoc[&(Hand::Right, 0)].clone();
            if let Some(prev) = &previous {
                assert!(current.is_subset(prev));
            }
            previous = Some(current);
        }
    }

    #[test]
    fn component_counts_follow_the_rule() {
        // 2 right-hand segments with 1 object each: 5 nodes, 6 triples.
        let annotation = RecordingAnnotation {
            task: "sawing".to_string(),
            subject: "subject_1".to_string(),
            take: 1,
            hands: BTreeMap::from([(
                Hand::Right,
                vec![
                    Segment {
                        label: "hold".to_string(),
                        start: 0,
                        end: 4,
                    },
                    Segment {
                        label: "saw".to_string(),
                        start: 5,
                        end: 9,
                    },
                ],
            )]),
            boxes: BTreeMap::new(),
        };
        let mut associations = Associations::new();
        associations.insert((Hand::Right, 0), BTreeSet::from(["wood".to_string()]));
        associations.insert((Hand::Right, 1), BTreeSet::from(["wood".to_string()]));
        let component = recording_to_component(&annotation, &associations);
        let graph = crate::graph::SituationalGraph::build_graph(
            &[component],
            &crate::vocab::Vocabulary::default(),
        )
        .unwrap();
        assert_eq!(graph.node_count(), 5);
        assert_eq!(graph.triple_count(), 6);
    }

    #[test]
    fn two_hands_produce_no_cross_chain_has_next() {
        let annotation = RecordingAnnotation {
            task: "wiping".to_string(),
            subject: "subject_1".to_string(),
            take: 1,
            hands: BTreeMap::from([
                (
                    Hand::Left,
                    vec![Segment {
                        label: "idle".to_string(),
                        start: 0,
                        end: 9,
                    }],
                ),
                (
                    Hand::Right,
                    vec![Segment {
                        label: "wipe".to_string(),
                        start: 0,
                        end: 9,
                    }],
                ),
            ]),
            boxes: BTreeMap::new(),
        };
        let component = recording_to_component(&annotation, &Associations::new());
        let graph = crate::graph::SituationalGraph::build_graph(
            &[component],
            &crate::vocab::Vocabulary::default(),
        )
        .unwrap();
        use crate::graph::RelationKind;
        assert_eq!(
            graph
                .triples()
                .filter(|t| t.relation == RelationKind::HasNext)
                .count(),
            0
        );
    }

    #[test]
    fn annotation_json_round_trip() {
        let annotation = annotation_with_overlap(4, 8);
        let text = render_recording(&annotation);
        let (reparsed, repairs) = parse_recording(&text).unwrap();
        assert!(repairs.is_empty());
        assert_eq!(reparsed, annotation);
    }
}
