//! Core library for cross-lingual contrastive-distillation training of text
//! embeddings and a multi-family embedding benchmark harness.
//!
//! The pipeline turns NLI corpora plus per-language translations into
//! QE-filtered contrastive training instances, augments them with mined hard
//! negatives and teacher scores, trains a small reference encoder under a
//! combined InfoNCE + distillation objective, and evaluates any encoder port
//! on eight task families with macro aggregation.

pub mod bench;
pub mod datamodel;
pub mod encoder;
pub mod error;
pub mod evaluator;
pub mod mining;
pub mod objective;
pub mod pipeline;
pub mod selftest;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
