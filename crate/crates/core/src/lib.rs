//! Dialect variation dictionary induction: corpus ingestion, candidate
//! matching, annotation, baselines, LLM evaluation and metrics.

pub mod baselines;
pub mod corpus;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod index;
pub mod journal;
pub mod llm;
pub mod matcher;
pub mod metrics;
pub mod outcome;
pub mod pipeline;
pub mod vocab;

pub use error::{Error, Result};
