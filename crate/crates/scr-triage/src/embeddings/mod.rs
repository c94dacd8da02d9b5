//! Fixed-dimension embedding vectors for record texts, with pluggable
//! providers, a persistent cache, and cosine comparison.

mod cache;
mod remote;

pub use cache::{content_hash, EmbeddingCache};
pub use remote::RemoteEmbeddingProvider;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Default vector width, matching the reference embedding service.
pub const DEFAULT_DIMENSION: usize = 1536;

/// Default number of texts sent per remote embedding request.
pub const DEFAULT_BATCH_SIZE: usize = 16;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding entries must be finite")]
    NonFinite,
    #[error("cosine distance is undefined for a zero vector")]
    ZeroVector,
    #[error("text must be non-empty")]
    EmptyText,
    #[error("embedding dimension must be >= 2, got {0}")]
    BadDimension(usize),
    #[error("provider request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned {got} vectors for {expected} inputs")]
    CountMismatch { expected: usize, got: usize },
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("cache i/o failed: {0}")]
    CacheIo(#[from] std::io::Error),
    #[error("cache file is not an embedding cache (bad magic)")]
    BadMagic,
}

/// A fixed-dimension vector of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Wraps raw values, rejecting non-finite entries and width < 2.
    pub fn new(values: Vec<f64>) -> Result<EmbeddingVector, EmbeddingError> {
        if values.len() < 2 {
            return Err(EmbeddingError::BadDimension(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine distance `1 - dot(a, b) / (|a| * |b|)`, in `[0, 2]`.
pub fn cosine_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            expected: a.dimension(),
            actual: b.dimension(),
        });
    }
    let norm_a = a.l2_norm();
    let norm_b = b.l2_norm();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(1.0 - dot / (norm_a * norm_b))
}

/// Deterministic offline embedding: seeds a PRNG with `hash(text) ^ seed`,
/// draws `dimension` standard normals, and normalizes to unit length. Distinct
/// texts land at spread-out directions, which is all the downstream geometry
/// needs.
pub fn mock_embed(
    text: &str,
    dimension: usize,
    seed: u64,
) -> Result<EmbeddingVector, EmbeddingError> {
    if dimension < 2 {
        return Err(EmbeddingError::BadDimension(dimension));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(text_hash(text) ^ seed);
    let mut values: Vec<f64> = (0..dimension)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let norm: f64 = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        values[0] = 1.0;
    } else {
        for v in &mut values {
            *v /= norm;
        }
    }
    Ok(EmbeddingVector { values })
}

/// Stable 64-bit hash of a text (first eight bytes of its SHA-256).
pub(crate) fn text_hash(text: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}

/// Source of embedding vectors. Implementations must be safe for concurrent
/// calls and must produce vectors of exactly `dimension()` entries.
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier mixed into cache keys so cached vectors are never
    /// reused across providers or models.
    fn id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;
}

/// Offline provider backed by [`mock_embed`].
#[derive(Debug, Clone)]
pub struct MockEmbeddingProvider {
    id: String,
    dimension: usize,
    seed: u64,
}

impl MockEmbeddingProvider {
    pub fn new(dimension: usize, seed: u64) -> MockEmbeddingProvider {
        MockEmbeddingProvider {
            id: format!("mock-d{dimension}-s{seed}"),
            dimension,
            seed,
        }
    }
}

impl EmbeddingProvider for MockEmbeddingProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts
            .iter()
            .map(|t| mock_embed(t, self.dimension, self.seed))
            .collect()
    }
}

/// Result of embedding a text list: vectors in input order plus how many had
/// to be computed fresh.
#[derive(Debug)]
pub struct EmbedOutcome {
    pub vectors: Vec<EmbeddingVector>,
    pub newly_embedded: usize,
}

/// Caching front end over an [`EmbeddingProvider`]: each distinct text hits
/// the provider at most once, everything else is served from the cache.
pub struct Embedder<P> {
    provider: P,
    cache: EmbeddingCache,
    batch_size: usize,
}

impl<P: EmbeddingProvider> Embedder<P> {
    pub fn new(provider: P, cache: EmbeddingCache) -> Embedder<P> {
        Embedder {
            provider,
            cache,
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Embedder<P> {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn provider(&self) -> &P {
        &self.provider
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    /// Embeds one text, consulting the cache first.
    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        Ok(self.embed_all(&[text])?.vectors.pop().expect("one vector"))
    }

    /// Embeds every text, batching cache misses `batch_size` at a time.
    /// Vectors come back in input order; repeated texts are embedded once.
    pub fn embed_all(&self, texts: &[&str]) -> Result<EmbedOutcome, EmbeddingError> {
        if texts.iter().any(|t| t.is_empty()) {
            return Err(EmbeddingError::EmptyText);
        }
        let expected = self.provider.dimension();
        let hashes: Vec<u64> = texts
            .iter()
            .map(|t| content_hash(self.provider.id(), t))
            .collect();

        let mut vectors: Vec<Option<EmbeddingVector>> =
            hashes.iter().map(|&h| self.cache.get(h)).collect();

        // Distinct uncached texts, in first-appearance order.
        let mut missing: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, v) in vectors.iter().enumerate() {
            if v.is_none() && seen.insert(hashes[i]) {
                missing.push(i);
            }
        }

        let newly_embedded = missing.len();
        for chunk in missing.chunks(self.batch_size) {
            let batch: Vec<&str> = chunk.iter().map(|&i| texts[i]).collect();
            let embedded = self.provider.embed_batch(&batch)?;
            if embedded.len() != batch.len() {
                return Err(EmbeddingError::CountMismatch {
                    expected: batch.len(),
                    got: embedded.len(),
                });
            }
            for (&i, vector) in chunk.iter().zip(embedded) {
                if vector.dimension() != expected {
                    return Err(EmbeddingError::DimensionMismatch {
                        expected,
                        actual: vector.dimension(),
                    });
                }
                self.cache.put(hashes[i], &vector)?;
                vectors[i] = Some(vector);
            }
        }

        // Fill duplicates and anything resolved by an earlier chunk.
        for (i, slot) in vectors.iter_mut().enumerate() {
            if slot.is_none() {
                *slot = self.cache.get(hashes[i]);
            }
        }
        let vectors = vectors
            .into_iter()
            .map(|v| v.expect("all texts resolved"))
            .collect();
        Ok(EmbedOutcome {
            vectors,
            newly_embedded,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Provider wrapper that counts embed_batch texts, for cache contracts.
    struct CountingProvider<P> {
        inner: P,
        calls: AtomicUsize,
    }

    impl<P> CountingProvider<P> {
        fn new(inner: P) -> Self {
            CountingProvider {
                inner,
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl<P: EmbeddingProvider> EmbeddingProvider for CountingProvider<P> {
        fn id(&self) -> &str {
            self.inner.id()
        }
        fn dimension(&self) -> usize {
            self.inner.dimension()
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
            self.calls.fetch_add(texts.len(), Ordering::SeqCst);
            self.inner.embed_batch(texts)
        }
    }

    fn unit(values: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn mock_embed_is_deterministic() {
        let a = mock_embed("fall hazard", 1536, 7).unwrap();
        let b = mock_embed("fall hazard", 1536, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mock_embed_unit_norm() {
        let v = mock_embed("any text", 64, 0).unwrap();
        assert!((v.l2_norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mock_embed_distinct_texts_are_separated() {
        // 100 text pairs; every pair must sit a measurable angle apart.
        for i in 0..100 {
            let a = mock_embed(&format!("text alpha {i}"), 32, 1).unwrap();
            let b = mock_embed(&format!("text beta {i}"), 32, 1).unwrap();
            assert!(cosine_distance(&a, &b).unwrap() > 1e-6);
        }
    }

    #[test]
    fn cosine_identical_vectors() {
        let v = unit(&[0.6, 0.8]);
        assert!(cosine_distance(&v, &v).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn cosine_orthogonal_vectors() {
        let a = unit(&[1.0, 0.0]);
        let b = unit(&[0.0, 1.0]);
        assert_eq!(cosine_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn cosine_45_degrees() {
        let a = unit(&[1.0, 0.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let b = unit(&[h, h]);
        let d = cosine_distance(&a, &b).unwrap();
        assert!((d - (1.0 - h)).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn cosine_rejects_zero_vector_and_mismatch() {
        let a = unit(&[1.0, 0.0]);
        let zero = EmbeddingVector {
            values: vec![0.0, 0.0],
        };
        assert!(matches!(
            cosine_distance(&a, &zero),
            Err(EmbeddingError::ZeroVector)
        ));
        let b = unit(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            cosine_distance(&a, &b),
            Err(EmbeddingError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn embedder_serves_repeat_from_cache() {
        let provider = CountingProvider::new(MockEmbeddingProvider::new(16, 5));
        let embedder = Embedder::new(provider, EmbeddingCache::ephemeral());
        let first = embedder.embed("same text").unwrap();
        let second = embedder.embed("same text").unwrap();
        assert_eq!(first, second);
        assert_eq!(embedder.provider().calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn embedder_invokes_provider_once_per_distinct_text() {
        let provider = CountingProvider::new(MockEmbeddingProvider::new(8, 1));
        let embedder = Embedder::new(provider, EmbeddingCache::ephemeral()).with_batch_size(3);
        let texts = ["a", "b", "a", "c", "b", "a", "d"];
        let outcome = embedder.embed_all(&texts).unwrap();
        assert_eq!(outcome.vectors.len(), texts.len());
        assert_eq!(outcome.newly_embedded, 4);
        assert_eq!(embedder.provider().calls.load(Ordering::SeqCst), 4);
        let again = embedder.embed_all(&texts).unwrap();
        assert_eq!(again.newly_embedded, 0);
        assert_eq!(embedder.provider().calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn embedder_rejects_wrong_provider_dimension() {
        struct Lying;
        impl EmbeddingProvider for Lying {
            fn id(&self) -> &str {
                "lying"
            }
            fn dimension(&self) -> usize {
                1536
            }
            fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
                texts.iter().map(|t| mock_embed(t, 1535, 0)).collect()
            }
        }
        let embedder = Embedder::new(Lying, EmbeddingCache::ephemeral());
        let err = embedder.embed("text").unwrap_err();
        assert!(matches!(
            err,
            EmbeddingError::DimensionMismatch {
                expected: 1536,
                actual: 1535
            }
        ));
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            prop_assume!(a.iter().any(|v| v.abs() > 1e-6));
            prop_assume!(b.iter().any(|v| v.abs() > 1e-6));
            let va = EmbeddingVector::new(a).unwrap();
            let vb = EmbeddingVector::new(b).unwrap();
            let ab = cosine_distance(&va, &vb).unwrap();
            let ba = cosine_distance(&vb, &va).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
        }

        #[test]
        fn cosine_is_scale_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 6),
            b in proptest::collection::vec(-10.0f64..10.0, 6),
            scale in 1e-3f64..1e3,
        ) {
            prop_assume!(a.iter().any(|v| v.abs() > 1e-6));
            prop_assume!(b.iter().any(|v| v.abs() > 1e-6));
            let va = EmbeddingVector::new(a).unwrap();
            let vb_scaled = EmbeddingVector::new(
                b.iter().map(|v| v * scale).collect()
            ).unwrap();
            let vb = EmbeddingVector::new(b).unwrap();
            let base = cosine_distance(&va, &vb).unwrap();
            let scaled = cosine_distance(&va, &vb_scaled).unwrap();
            prop_assert!((base - scaled).abs() < 1e-9);
        }
    }
}
