//! Semi-supervised fine-grained PICO entity recognition.
//!
//! The pipeline: train a baseline token classifier on scarce labeled
//! sentences, pseudo-label an unlabeled pool, filter the pseudo-labels with a
//! quality strategy (fixed confidence threshold, class-adaptive thresholds,
//! or an external LLM judge), retrain on the combined loss, and iterate until
//! validation performance converges. Evaluation is span-level (strict and
//! partial) with bootstrap confidence intervals and approximate-randomization
//! significance tests.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod judge;
pub mod quality;
pub mod schema;
pub mod ssl;
pub mod tagger;

pub use error::{Error, Result};
