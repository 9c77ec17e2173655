//! Situational knowledge graphs of household activities.
//!
//! This crate builds instance-level knowledge graphs from per-hand activity
//! annotations (one weakly connected component per recording), computes the
//! standard graph-statistics panel, produces repetition-based train/test
//! splits, and evaluates three predictor families on two tasks:
//!
//! - **parent-action prediction**: rank the 9 possible overall tasks for a
//!   recording whose parent label has been masked out;
//! - **subsequent-action prediction**: rank the 14 possible next sub-actions
//!   given the current sub-action and its associated objects.
//!
//! The predictor families are frequency baselines ([`baselines`]),
//! from-scratch knowledge-graph embedding models ([`embed`]), and a
//! chat-completion bridge ([`llm`]). All evaluation reports Hits@k over
//! closed candidate sets ([`eval`]).
//!
//! Everything is deterministic given a seed: graph construction, the
//! synthetic corpus generator, splitting, training, and evaluation.

pub mod baselines;
pub mod embed;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod llm;
pub mod runcfg;
pub mod split;
pub mod stats;
pub mod synth;
pub mod tsv;
pub(crate) mod util;
pub mod vocab;
