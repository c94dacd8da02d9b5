//! k-nearest-neighbour classification over embedding vectors with cosine
//! distance. A lazy learner: `fit` stores the training data verbatim and all
//! work happens at prediction time.

use crate::analysis::AnalysisError;
use crate::corpus::Label;
use crate::embeddings::{cosine_distance, EmbeddingError, EmbeddingVector};
use crate::eval::ConfusionMatrix;

/// Default neighbourhood size.
pub const DEFAULT_K: usize = 5;

/// Trained (stored) k-NN classifier. `k` is odd so a two-class vote can
/// never tie; distance ties are broken by ascending training index, making
/// predictions deterministic.
#[derive(Debug, Clone)]
pub struct KnnModel {
    training: Vec<(EmbeddingVector, Label)>,
    k: usize,
}

impl KnnModel {
    /// Stores the labelled training vectors. `k` must be odd and at most the
    /// training size; all vectors must share one dimension.
    pub fn fit(
        training: Vec<(EmbeddingVector, Label)>,
        k: usize,
    ) -> Result<KnnModel, AnalysisError> {
        if training.is_empty() {
            return Err(AnalysisError::EmptyTraining);
        }
        if k == 0 {
            return Err(AnalysisError::ZeroK);
        }
        if k.is_multiple_of(2) {
            return Err(AnalysisError::EvenK(k));
        }
        if k > training.len() {
            return Err(AnalysisError::KTooLarge {
                k,
                n: training.len(),
            });
        }
        let expected = training[0].0.dimension();
        for (vector, _) in &training {
            if vector.dimension() != expected {
                return Err(EmbeddingError::DimensionMismatch {
                    expected,
                    actual: vector.dimension(),
                }
                .into());
            }
        }
        Ok(KnnModel { training, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.training.len()
    }

    pub fn is_empty(&self) -> bool {
        self.training.is_empty()
    }

    /// Majority label among the `k` cosine-nearest training points.
    pub fn predict(&self, query: &EmbeddingVector) -> Result<Label, AnalysisError> {
        let mut neighbours: Vec<(f64, usize)> = Vec::with_capacity(self.training.len());
        for (index, (vector, _)) in self.training.iter().enumerate() {
            neighbours.push((cosine_distance(query, vector)?, index));
        }
        neighbours.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let safety_votes = neighbours[..self.k]
            .iter()
            .filter(|(_, index)| self.training[*index].1 == Label::Safety)
            .count();
        if safety_votes * 2 > self.k {
            Ok(Label::Safety)
        } else {
            Ok(Label::NonSafety)
        }
    }

    /// Predicts every test record and aggregates the outcomes into a
    /// confusion matrix with SAFETY as the positive class.
    pub fn evaluate(
        &self,
        test: &[(EmbeddingVector, Label)],
    ) -> Result<ConfusionMatrix, AnalysisError> {
        if test.is_empty() {
            return Err(AnalysisError::EmptyTest);
        }
        let mut matrix = ConfusionMatrix::default();
        for (vector, actual) in test {
            let predicted = self.predict(vector)?;
            matrix.record(*actual, predicted);
        }
        Ok(matrix)
    }
}
