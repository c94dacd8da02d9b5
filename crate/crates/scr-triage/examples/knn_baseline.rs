//! Fit the cosine k-nearest-neighbour baseline on two synthetic embedding
//! clusters and evaluate it on a held-out split.
//!
//! Run with: `cargo run --example knn_baseline`

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use scr_triage::analysis::KnnModel;
use scr_triage::corpus::Label;
use scr_triage::embeddings::EmbeddingVector;
use scr_triage::eval::{render_matrix, ReportFormat};

/// One point near `center` with isotropic Gaussian noise.
fn noisy_point(center: &[f64], noise: f64, rng: &mut ChaCha8Rng) -> EmbeddingVector {
    let values = center
        .iter()
        .map(|&c| c + noise * rng.sample::<f64, _>(StandardNormal))
        .collect();
    EmbeddingVector::new(values).expect("finite nonzero vector")
}

fn main() -> anyhow::Result<()> {
    let dimension = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    // Two well-separated clusters: the safety cluster along +e0, the
    // non-safety cluster along +e1.
    let mut safety_center = vec![0.0; dimension];
    safety_center[0] = 1.0;
    let mut other_center = vec![0.0; dimension];
    other_center[1] = 1.0;

    let mut points: Vec<(EmbeddingVector, Label)> = Vec::new();
    for _ in 0..150 {
        points.push((noisy_point(&safety_center, 0.08, &mut rng), Label::Safety));
        points.push((noisy_point(&other_center, 0.08, &mut rng), Label::NonSafety));
    }
    points.shuffle(&mut rng);

    let split = points.len() * 4 / 5;
    let (training, test) = points.split_at(split);
    println!(
        "{} training points, {} test points, k=5\n",
        training.len(),
        test.len()
    );

    let model = KnnModel::fit(training.to_vec(), 5)?;
    let matrix = model.evaluate(test)?;
    print!("{}", render_matrix(&matrix, ReportFormat::Text)?);

    // Single-point queries work too, e.g. a point between the clusters but
    // nearer the safety side.
    let mut query = vec![0.0; dimension];
    query[0] = 0.7;
    query[1] = 0.3;
    let predicted = model.predict(&EmbeddingVector::new(query)?)?;
    println!(
        "\nquery between clusters, nearer safety -> {}",
        predicted.as_str()
    );
    Ok(())
}
