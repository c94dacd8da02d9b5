//! Embed a corpus with the deterministic mock provider through the on-disk
//! cache: the first pass computes every vector, the second pass is served
//! entirely from disk, and reopening the cache file preserves both.
//!
//! Run with: `cargo run --example embedding_cache`

use scr_triage::corpus::generate_synthetic_corpus;
use scr_triage::embeddings::{cosine_distance, Embedder, EmbeddingCache, MockEmbeddingProvider};

fn main() -> anyhow::Result<()> {
    let records = generate_synthetic_corpus(100, 0.2, 7)?;
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();

    let dir = tempfile::tempdir()?;
    let cache_path = dir.path().join("embeddings.bin");

    // First pass: every distinct text goes to the provider once.
    let provider = MockEmbeddingProvider::new(64, 7);
    let embedder = Embedder::new(provider, EmbeddingCache::open(&cache_path)?);
    let first = embedder.embed_all(&texts)?;
    println!(
        "first pass:  {} embeddings ({} new)",
        first.vectors.len(),
        first.newly_embedded
    );

    // Second pass over the same corpus: all cache hits.
    let second = embedder.embed_all(&texts)?;
    println!(
        "second pass: {} embeddings ({} new)",
        second.vectors.len(),
        second.newly_embedded
    );
    assert_eq!(second.newly_embedded, 0);

    // Reopen the file cold, as a later process would.
    let reopened = Embedder::new(
        MockEmbeddingProvider::new(64, 7),
        EmbeddingCache::open(&cache_path)?,
    );
    let third = reopened.embed_all(&texts)?;
    println!(
        "reopened:    {} embeddings ({} new)",
        third.vectors.len(),
        third.newly_embedded
    );
    assert_eq!(third.vectors, first.vectors);
    let bytes = std::fs::metadata(&cache_path)?.len();
    println!(
        "cache file:  {bytes} bytes for {} distinct texts ({} records reuse one)",
        first.newly_embedded,
        first.vectors.len()
    );

    // Mock vectors are unit length, so cosine distance lives in [0, 2] and
    // identical texts land at 0 up to rounding.
    let a = &first.vectors[0];
    let b = &first.vectors[1];
    println!("\ncosine distances (dimension {})", a.dimension());
    println!("  same text:      {:.2e}", cosine_distance(a, a)?);
    println!("  different text: {:.6}", cosine_distance(a, b)?);
    Ok(())
}
