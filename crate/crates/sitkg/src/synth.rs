//! Deterministic synthetic recording generator.
//!
//! Desk-scale substitute for the full recorded dataset: every task has a
//! fixed sub-action grammar (an ordered template with optional insertions
//! and repetitions) so frequency baselines have learnable signal, and box
//! trajectories are laid out so that bounding-box association at the default
//! threshold recovers exactly the grammar's intended object links.
//!
//! Geometry: each hand has a "home" region (intersecting nothing) and an
//! "active" region; objects sit in far-away home cells unless a hand
//! currently interacts with them, in which case they are placed in a slot
//! that overlaps the demanding hand(s) only. A clutter object flickers into
//! the right hand's slot for under a third of one segment, which stays below
//! the default 0.5 association threshold.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::RecordingComponent;
use crate::ingest::{
    associate_objects, recording_to_component, AssociationPolicy, Box3, Hand, RecordingAnnotation,
    Segment,
};
use crate::vocab::PARENT_ACTIONS;

/// Shape of the synthetic corpus: `tasks × subjects × takes` recordings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub tasks: usize,
    pub subjects: usize,
    pub takes: usize,
    /// No insertions, repetitions, or clutter; every task shares one chain
    /// whose label transitions are globally deterministic.
    pub deterministic: bool,
}

impl SynthConfig {
    pub fn new(tasks: usize, subjects: usize, takes: usize) -> Self {
        SynthConfig {
            tasks,
            subjects,
            takes,
            deterministic: false,
        }
    }

    pub fn deterministic(mut self) -> Self {
        self.deterministic = true;
        self
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("synthetic config must have at least one task, subject, and take")]
    EmptyConfig,
    #[error("synthetic config asks for {0} tasks but only {max} exist", max = PARENT_ACTIONS.len())]
    TooManyTasks(usize),
    #[error("synthetic config asks for {0} takes but takes are numbered 1..=10")]
    TooManyTakes(usize),
}

struct TaskGrammar {
    task: &'static str,
    tool: &'static str,
    station: &'static str,
    act: &'static str,
    /// Earlier tool/station/act phase (e.g. cutting before stirring).
    prelude: Option<(&'static str, &'static str, &'static str)>,
    /// Trailing lift/drink/place phase on this object.
    coda: Option<&'static str>,
}

const GRAMMARS: [TaskGrammar; 9] = [
    TaskGrammar {
        task: "cooking",
        tool: "whisk",
        station: "pot",
        act: "stir",
        prelude: Some(("knife", "board", "cut")),
        coda: None,
    },
    TaskGrammar {
        task: "cooking_with_bowls",
        tool: "ladle",
        station: "bowl",
        act: "stir",
        prelude: None,
        coda: None,
    },
    TaskGrammar {
        task: "pouring",
        tool: "bottle",
        station: "cup",
        act: "pour",
        prelude: None,
        coda: None,
    },
    TaskGrammar {
        task: "wiping",
        tool: "sponge",
        station: "table",
        act: "wipe",
        prelude: None,
        coda: None,
    },
    TaskGrammar {
        task: "cereals",
        tool: "cereal_box",
        station: "bowl",
        act: "pour",
        prelude: None,
        coda: Some("cup"),
    },
    TaskGrammar {
        task: "hard_drive",
        tool: "screwdriver",
        station: "drive",
        act: "screw",
        prelude: None,
        coda: None,
    },
    TaskGrammar {
        task: "free_hard_drive",
        tool: "allen_key",
        station: "case",
        act: "screw",
        prelude: None,
        coda: None,
    },
    TaskGrammar {
        task: "hammering",
        tool: "hammer",
        station: "nail",
        act: "hammer",
        prelude: None,
        coda: None,
    },
    TaskGrammar {
        task: "sawing",
        tool: "saw",
        station: "wood",
        act: "saw",
        prelude: None,
        coda: None,
    },
];

const CLUTTER_OBJECT: &str = "banana";

// x-extents; y and z are always [0, 1] so intersection is decided on x.
const RIGHT_ACTIVE: (f64, f64) = (99.5, 101.5);
const LEFT_ACTIVE: (f64, f64) = (101.25, 103.0);
const RIGHT_SLOT: (f64, f64) = (100.0, 101.0);
const SHARED_SLOT: (f64, f64) = (101.0, 102.0);
const LEFT_SLOT: (f64, f64) = (102.5, 103.5);
const RIGHT_HOME: (f64, f64) = (-10.0, -9.0);
const LEFT_HOME: (f64, f64) = (-20.0, -19.0);

const JITTER: f64 = 0.05;
const FLICKER_FRACTION: f64 = 0.3;

struct PlannedStep {
    label: &'static str,
    objects: BTreeSet<&'static str>,
    len: u64,
}

fn step(label: &'static str, objects: &[&'static str], len: u64) -> PlannedStep {
    PlannedStep {
        label,
        objects: objects.iter().copied().collect(),
        len,
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn recording_rng(seed: u64, task: usize, subject: usize, take: usize) -> ChaCha8Rng {
    let mixed = splitmix64(
        seed ^ splitmix64((task as u64) << 40 ^ (subject as u64) << 20 ^ take as u64),
    );
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Generates `tasks × subjects × takes` recordings, deterministic per seed.
pub fn generate_synthetic(
    config: &SynthConfig,
    seed: u64,
) -> Result<Vec<RecordingAnnotation>, SynthError> {
    if config.tasks == 0 || config.subjects == 0 || config.takes == 0 {
        return Err(SynthError::EmptyConfig);
    }
    if config.tasks > PARENT_ACTIONS.len() {
        return Err(SynthError::TooManyTasks(config.tasks));
    }
    if config.takes > 10 {
        return Err(SynthError::TooManyTakes(config.takes));
    }
    let mut recordings = Vec::with_capacity(config.tasks * config.subjects * config.takes);
    for task_idx in 0..config.tasks {
        for subject_idx in 0..config.subjects {
            for take in 1..=config.takes {
                let mut rng = recording_rng(seed, task_idx, subject_idx, take);
                let grammar = &GRAMMARS[task_idx];
                let recording = if config.deterministic {
                    plan_deterministic(grammar, subject_idx, take)
                } else {
                    plan_stochastic(grammar, subject_idx, take, &mut rng)
                };
                recordings.push(materialize(recording, &mut rng, config.deterministic));
            }
        }
    }
    Ok(recordings)
}

struct Plan {
    task: &'static str,
    subject: String,
    take: u32,
    chains: BTreeMap<Hand, Vec<PlannedStep>>,
    roster: BTreeSet<&'static str>,
    /// (hand, segment index) whose first frames get the clutter flicker.
    flicker: Option<(Hand, usize)>,
}

fn plan_deterministic(grammar: &TaskGrammar, subject_idx: usize, take: usize) -> Plan {
    let len = 10;
    let right = vec![
        step("idle", &[], len),
        step("approach", &[], len),
        step("lift", &[grammar.tool], len),
        step("hold", &[grammar.tool], len),
        step("place", &[grammar.tool], len),
        step("retreat", &[], len),
    ];
    let left = vec![step("idle", &[], len)];
    Plan {
        task: grammar.task,
        subject: format!("subject_{}", subject_idx + 1),
        take: take as u32,
        roster: [grammar.tool].into_iter().collect(),
        chains: BTreeMap::from([(Hand::Left, left), (Hand::Right, right)]),
        flicker: None,
    }
}

fn plan_stochastic(
    grammar: &TaskGrammar,
    subject_idx: usize,
    take: usize,
    rng: &mut ChaCha8Rng,
) -> Plan {
    let seg_len = |rng: &mut ChaCha8Rng| rng.random_range(8..=14u64);
    let mut right: Vec<PlannedStep> = Vec::new();
    if rng.random_bool(0.5) {
        let len = seg_len(rng);
        right.push(step("idle", &[], len));
    }
    let len = seg_len(rng);
    right.push(step("approach", &[], len));

    let tool_phase = |right: &mut Vec<PlannedStep>,
                          rng: &mut ChaCha8Rng,
                          tool: &'static str,
                          station: &'static str,
                          act: &'static str,
                          reps_max: u64| {
        let len = seg_len(rng);
        right.push(step("lift", &[tool], len));
        if rng.random_bool(0.3) {
            let len = seg_len(rng);
            right.push(step("hold", &[tool], len));
        }
        let reps = rng.random_range(1..=reps_max);
        for _ in 0..reps {
            let len = seg_len(rng);
            right.push(step(act, &[tool, station], len));
        }
        let len = seg_len(rng);
        right.push(step("place", &[tool], len));
    };

    if let Some((tool, station, act)) = grammar.prelude {
        tool_phase(&mut right, rng, tool, station, act, 2);
    }
    tool_phase(&mut right, rng, grammar.tool, grammar.station, grammar.act, 3);
    if let Some(vessel) = grammar.coda {
        let len = seg_len(rng);
        right.push(step("lift", &[vessel], len));
        let len = seg_len(rng);
        right.push(step("drink", &[vessel], len));
        let len = seg_len(rng);
        right.push(step("place", &[vessel], len));
    }
    let len = seg_len(rng);
    right.push(step("retreat", &[], len));

    let left = if rng.random_bool(0.5) {
        vec![
            step("idle", &[], seg_len(rng)),
            step("approach", &[], seg_len(rng)),
            step("hold", &[grammar.station], seg_len(rng)),
            step("place", &[grammar.station], seg_len(rng)),
            step("retreat", &[], seg_len(rng)),
        ]
    } else {
        vec![step("idle", &[], seg_len(rng))]
    };

    let mut roster: BTreeSet<&'static str> = BTreeSet::new();
    for s in right.iter().chain(&left) {
        roster.extend(s.objects.iter().copied());
    }
    roster.insert(CLUTTER_OBJECT);

    let flicker = if rng.random_bool(0.5) {
        let candidates: Vec<usize> = right
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.objects.is_empty())
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() {
            None
        } else {
            let pick = candidates[rng.random_range(0..candidates.len())];
            Some((Hand::Right, pick))
        }
    } else {
        None
    };

    Plan {
        task: grammar.task,
        subject: format!("subject_{}", subject_idx + 1),
        take: take as u32,
        roster,
        chains: BTreeMap::from([(Hand::Left, left), (Hand::Right, right)]),
        flicker,
    }
}

fn materialize(plan: Plan, rng: &mut ChaCha8Rng, deterministic: bool) -> RecordingAnnotation {
    // Lay out segments per hand on contiguous, non-overlapping frame spans.
    let mut hands: BTreeMap<Hand, Vec<Segment>> = BTreeMap::new();
    let mut spans: BTreeMap<Hand, Vec<(u64, u64, &BTreeSet<&'static str>)>> = BTreeMap::new();
    for (hand, steps) in &plan.chains {
        let mut cursor = 0u64;
        let mut segments = Vec::with_capacity(steps.len());
        let mut hand_spans = Vec::with_capacity(steps.len());
        for planned in steps {
            let start = cursor;
            let end = cursor + planned.len - 1;
            cursor = end + 1;
            segments.push(Segment {
                label: planned.label.to_string(),
                start,
                end,
            });
            hand_spans.push((start, end, &planned.objects));
        }
        hands.insert(*hand, segments);
        spans.insert(*hand, hand_spans);
    }
    let total_frames = spans
        .values()
        .filter_map(|s| s.last().map(|(_, end, _)| end + 1))
        .max()
        .unwrap_or(0);

    let flicker_span: Option<(u64, u64)> = plan.flicker.map(|(hand, index)| {
        let (start, end, _) = spans[&hand][index];
        let len = end - start + 1;
        let flicker_len = ((len as f64) * FLICKER_FRACTION).floor() as u64;
        (start, start + flicker_len.saturating_sub(1))
    });

    let object_homes: BTreeMap<&str, (f64, f64)> = plan
        .roster
        .iter()
        .enumerate()
        .map(|(i, name)| (*name, (200.0 + 3.0 * i as f64, 201.0 + 3.0 * i as f64)))
        .collect();

    let mut boxes: BTreeMap<String, Vec<(u64, Box3)>> = BTreeMap::new();
    let mut push_box = |name: &str, frame: u64, extent: (f64, f64), rng: &mut ChaCha8Rng| {
        let shift = if deterministic {
            0.0
        } else {
            rng.random_range(-JITTER..=JITTER)
        };
        let b = Box3::new([extent.0 + shift, 0.0, 0.0], [extent.1 + shift, 1.0, 1.0]);
        boxes.entry(name.to_string()).or_default().push((frame, b));
    };

    let active_objects = |hand: Hand, frame: u64| -> &BTreeSet<&'static str> {
        static EMPTY: BTreeSet<&'static str> = BTreeSet::new();
        spans
            .get(&hand)
            .and_then(|s| {
                s.iter()
                    .find(|(start, end, _)| *start <= frame && frame <= *end)
                    .map(|(_, _, objects)| *objects)
            })
            .unwrap_or(&EMPTY)
    };

    for frame in 0..total_frames {
        let right_demand = active_objects(Hand::Right, frame);
        let left_demand = active_objects(Hand::Left, frame);
        let right_extent = if right_demand.is_empty() {
            RIGHT_HOME
        } else {
            RIGHT_ACTIVE
        };
        let left_extent = if left_demand.is_empty() {
            LEFT_HOME
        } else {
            LEFT_ACTIVE
        };
        push_box(Hand::Right.body_name(), frame, right_extent, rng);
        push_box(Hand::Left.body_name(), frame, left_extent, rng);
        for name in &plan.roster {
            let by_right = right_demand.contains(name);
            let by_left = left_demand.contains(name);
            let flickering = *name == CLUTTER_OBJECT
                && flicker_span.is_some_and(|(s, e)| s <= frame && frame <= e);
            let extent = match (by_right, by_left) {
                (true, true) => SHARED_SLOT,
                (true, false) => RIGHT_SLOT,
                (false, true) => LEFT_SLOT,
                (false, false) if flickering => RIGHT_SLOT,
                (false, false) => object_homes[name],
            };
            push_box(name, frame, extent, rng);
        }
    }

    RecordingAnnotation {
        task: plan.task.to_string(),
        subject: plan.subject,
        take: plan.take,
        hands,
        boxes,
    }
}

/// Associates objects and emits one component description per annotation.
pub fn components_from_annotations(
    annotations: &[RecordingAnnotation],
    policy: &AssociationPolicy,
) -> Vec<RecordingComponent> {
    annotations
        .iter()
        .map(|annotation| {
            let associations = associate_objects(annotation, policy);
            recording_to_component(annotation, &associations)
        })
        .collect()
}
