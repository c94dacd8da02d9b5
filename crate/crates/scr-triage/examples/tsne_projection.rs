//! Project three high-dimensional Gaussian clusters to 2-D with the exact
//! t-SNE implementation and write the coordinates to a CSV.
//!
//! Run with: `cargo run --example tsne_projection`

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use scr_triage::analysis::{tsne_project, write_projection_csv, TsneConfig};
use scr_triage::corpus::{Label, ScrRecord};
use scr_triage::embeddings::EmbeddingVector;

fn main() -> anyhow::Result<()> {
    let dimension = 24;
    let per_cluster = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // Three clusters far apart relative to their internal spread; the first
    // is labelled safety so the CSV carries a label column worth plotting.
    let mut records = Vec::new();
    let mut vectors = Vec::new();
    for cluster in 0..3 {
        let mut center = vec![0.0; dimension];
        center[cluster] = 10.0;
        let label = if cluster == 0 {
            Label::Safety
        } else {
            Label::NonSafety
        };
        for point in 0..per_cluster {
            let values: Vec<f64> = center
                .iter()
                .map(|&c| c + rng.sample::<f64, _>(StandardNormal))
                .collect();
            vectors.push(EmbeddingVector::new(values)?);
            records.push(ScrRecord::new(
                format!("SCR-{cluster}{point:03}"),
                format!("cluster {cluster} point {point}"),
                Some(label),
            ));
        }
    }

    let config = TsneConfig {
        perplexity: 12.0,
        iterations: 500,
        seed: 5,
        ..TsneConfig::default()
    };
    let result = tsne_project(&vectors, &config)?;

    let first = result.kl_trace.first().copied().unwrap_or(f64::NAN);
    let last = result.kl_trace.last().copied().unwrap_or(f64::NAN);
    println!("{} points, perplexity {}", vectors.len(), config.perplexity);
    println!(
        "KL divergence: {first:.4} at start, {last:.4} after {} iterations",
        config.iterations
    );

    // With well-separated input clusters, most points keep same-cluster
    // nearest neighbours in the plane.
    let same_cluster_nn = (0..result.coords.len())
        .filter(|&i| {
            let nearest = (0..result.coords.len())
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    let da = squared(result.coords[i], result.coords[a]);
                    let db = squared(result.coords[i], result.coords[b]);
                    da.total_cmp(&db)
                })
                .expect("more than one point");
            nearest / per_cluster == i / per_cluster
        })
        .count();
    println!(
        "2-D nearest neighbour stays in the source cluster for {same_cluster_nn}/{} points",
        result.coords.len()
    );

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("coords.csv");
    write_projection_csv(std::fs::File::create(&path)?, &records, &result.coords)?;
    let csv = std::fs::read_to_string(&path)?;
    println!("\nfirst rows of {}:", path.display());
    for line in csv.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}

fn squared(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}
