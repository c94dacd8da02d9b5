//! Triage toolkit for station condition records (SCRs): prompt-driven LLM
//! classification with score thresholding, embedding-based baselines
//! (cosine k-NN, exact t-SNE projection) and an evaluation/calibration
//! harness with resumable batch runs.
//!
//! The `examples/` directory is the front door: one runnable example per
//! capability, composing the same modules the `scr-triage` binary uses.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod eval;
pub mod prompts;
pub mod retry;
pub mod runner;

pub use corpus::{Label, ScrRecord};
pub use eval::{ConfusionMatrix, MetricsReport};
pub use runner::LlmVerdict;
