//! Embedding-space baselines: k-nearest-neighbour classification and exact
//! t-SNE projection to two dimensions.

pub mod knn;
pub mod tsne;

pub use knn::{KnnModel, DEFAULT_K};
pub use tsne::{
    kl_and_gradient, tsne_affinities, tsne_project, write_projection_csv, Affinities, TsneConfig,
    TsneResult,
};

use thiserror::Error;

use crate::embeddings::EmbeddingError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("k must be odd to prevent vote ties, got {0}")]
    EvenK(usize),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k ({k}) exceeds the training-set size ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("training set is empty")]
    EmptyTraining,
    #[error("test set is empty")]
    EmptyTest,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("need at least {min} points, got {n}")]
    TooFewPoints { n: usize, min: usize },
    #[error("perplexity {perplexity} is outside the achievable range [1, {}] for {n} points", n - 1)]
    UnreachablePerplexity { perplexity: f64, n: usize },
    #[error("perplexity {perplexity} must be positive and below n/3 ({limit}) for {n} points")]
    PerplexityTooLarge {
        perplexity: f64,
        n: usize,
        limit: f64,
    },
    #[error("iterations must be at least 250, got {0}")]
    TooFewIterations(usize),
    #[error("{name} must be positive, got {value}")]
    NonPositiveRate { name: &'static str, value: f64 },
    #[error("optimization diverged: non-finite gradient or coordinates at iteration {iteration}; try a lower learning rate")]
    NonFiniteGradient { iteration: usize },
    #[error("projection rows mismatch: {records} records but {coords} coordinate pairs")]
    RowMismatch { records: usize, coords: usize },
    #[error("projection export failed: {0}")]
    Csv(#[from] csv::Error),
}
