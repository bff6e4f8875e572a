//! TREQA: translation evaluation via question answering.
//!
//! Scores candidate translations of paragraphs by generating reading
//! comprehension questions with an LLM, answering them against the ground
//! truth and each candidate, and comparing the answers. Metrics built this
//! way are meta-evaluated against expert preferences with Wilcoxon
//! signed-rank tests, Benjamini-Hochberg correction, and significance
//! clustering.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`data`]: datasets of passages, candidates, preferences, error spans
//! - [`gateway`]: cached access to completion backends (http/replay/scripted)
//! - [`qag`]: question-answer generation prompts and parsing
//! - [`qa`]: answering questions against passages, gold answer regeneration
//! - [`correctness`]: answer comparators and candidate score aggregation
//! - [`metaeval`]: contrastive accuracy, significance testing, clustering
//! - [`analysis`]: error-span coverage, position bias, answer statistics
//! - [`pipeline`]: staged artifacts, run manifest, plot data emission

pub mod analysis;
pub mod artifacts;
pub mod config;
pub mod correctness;
pub mod data;
pub mod gateway;
pub mod manifest;
pub mod metaeval;
pub mod pipeline;
pub mod qa;
pub mod qag;
pub mod textnorm;

/// Version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
