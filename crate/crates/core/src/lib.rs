//! Multi-reference evaluation for natural-language generation.
//!
//! The pipeline: generate reference candidates with an LLM ([`refgen`]),
//! keep the diverse ones by Self-BLEU ([`diversity`]), score system outputs
//! with multi-reference n-gram metrics ([`ngram_metrics`], [`scoring`]) or
//! max-combine externally computed per-reference scores ([`score_combine`]),
//! and check agreement with human judgments ([`metaeval`]). All artifacts
//! are JSONL files ([`corpus_io`]); the `multiref` binary drives each stage.

pub mod cli;
pub mod corpus_io;
pub mod diversity;
pub mod error;
pub mod metaeval;
pub mod ngram_metrics;
pub mod refgen;
pub mod score_combine;
pub mod scoring;
pub mod textproc;

pub use error::{Error, Result};
