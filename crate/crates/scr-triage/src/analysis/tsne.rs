//! Exact (O(n²)) t-SNE: high-dimensional affinities with per-point bandwidth
//! search, Student-t low-dimensional affinities, and momentum gradient
//! descent on KL(P‖Q). Output is a deterministic 2-D layout plus the KL
//! trace; suitable for desk-scale corpora (≤ ~5,000 points), not 100k.

use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analysis::AnalysisError;
use crate::corpus::ScrRecord;
use crate::embeddings::EmbeddingVector;

/// Iterations during which early exaggeration multiplies P and the lower
/// momentum applies.
pub const EARLY_PHASE_ITERS: usize = 250;

/// Bisection steps allowed for each point's bandwidth search.
const MAX_BISECTIONS: usize = 50;

/// Relative tolerance on achieved perplexity for the bandwidth search.
const PERPLEXITY_TOL: f64 = 1e-5;

/// Floor applied to Q entries inside KL terms so log arguments stay finite.
const Q_FLOOR: f64 = 1e-12;

/// Hyperparameters for `tsne_project`.
#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Multiplier on P during the first `EARLY_PHASE_ITERS` iterations.
    pub early_exaggeration: f64,
    /// Momentum before iteration `EARLY_PHASE_ITERS`.
    pub initial_momentum: f64,
    /// Momentum from iteration `EARLY_PHASE_ITERS` on.
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> TsneConfig {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

impl TsneConfig {
    /// Validates the configuration against an input of `n` points.
    pub fn validate(&self, n: usize) -> Result<(), AnalysisError> {
        if n < 4 {
            return Err(AnalysisError::TooFewPoints { n, min: 4 });
        }
        let limit = n as f64 / 3.0;
        if !(self.perplexity > 0.0 && self.perplexity < limit) {
            return Err(AnalysisError::PerplexityTooLarge {
                perplexity: self.perplexity,
                n,
                limit,
            });
        }
        if self.iterations < EARLY_PHASE_ITERS {
            return Err(AnalysisError::TooFewIterations(self.iterations));
        }
        for (name, value) in [
            ("learning_rate", self.learning_rate),
            ("early_exaggeration", self.early_exaggeration),
            ("initial_momentum", self.initial_momentum),
            ("final_momentum", self.final_momentum),
        ] {
            // `partial_cmp` so NaN rates are rejected, not silently accepted.
            if value.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(AnalysisError::NonPositiveRate { name, value });
            }
        }
        Ok(())
    }
}

/// Symmetrized input affinities plus per-point search diagnostics.
#[derive(Debug, Clone)]
pub struct Affinities {
    /// Joint distribution P: symmetric, zero diagonal, sums to 1.
    pub p: Vec<Vec<f64>>,
    /// Row-stochastic conditional matrix p_{j|i} before symmetrization.
    pub conditional: Vec<Vec<f64>>,
    /// Perplexity (2^H) actually reached for each point.
    pub achieved_perplexity: Vec<f64>,
    /// Points whose bandwidth search hit the bisection cap and was clamped.
    pub clamped_points: Vec<usize>,
}

/// Projection output: final layout and the KL(P‖Q) value for the initial
/// layout plus each iteration (`iterations + 1` entries, natural log).
#[derive(Debug, Clone)]
pub struct TsneResult {
    pub coords: Vec<[f64; 2]>,
    pub kl_trace: Vec<f64>,
}

/// Computes the symmetrized t-SNE input affinities. Each point's Gaussian
/// bandwidth is found by bisection on the precision β so the conditional
/// entropy satisfies |2^H − perplexity| ≤ 1e-5·perplexity; a search that
/// fails to converge in 50 steps is clamped to its last bounds and logged,
/// never fatal.
pub fn tsne_affinities(
    embeddings: &[EmbeddingVector],
    perplexity: f64,
) -> Result<Affinities, AnalysisError> {
    let n = embeddings.len();
    if n < 3 {
        return Err(AnalysisError::TooFewPoints { n, min: 3 });
    }
    if !(perplexity >= 1.0 && perplexity <= (n - 1) as f64) {
        return Err(AnalysisError::UnreachablePerplexity { perplexity, n });
    }
    let dim = embeddings[0].dimension();
    for e in embeddings {
        if e.dimension() != dim {
            return Err(crate::embeddings::EmbeddingError::DimensionMismatch {
                expected: dim,
                actual: e.dimension(),
            }
            .into());
        }
    }

    // Pairwise squared Euclidean distances.
    let mut d2 = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dist2: f64 = embeddings[i]
                .values()
                .iter()
                .zip(embeddings[j].values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2[i][j] = dist2;
            d2[j][i] = dist2;
        }
    }

    let mut conditional = vec![vec![0.0f64; n]; n];
    let mut achieved = vec![0.0f64; n];
    let mut clamped = Vec::new();
    for i in 0..n {
        let (row, perp, converged) = row_affinities(&d2[i], i, perplexity);
        conditional[i] = row;
        achieved[i] = perp;
        if !converged {
            clamped.push(i);
            log::warn!(
                "t-SNE bandwidth search for point {i} did not converge in {MAX_BISECTIONS} steps; \
                 clamped at achieved perplexity {perp:.4} (target {perplexity})"
            );
        }
    }

    // Symmetrize: P_ij = (p_{j|i} + p_{i|j}) / 2n, so P sums to 1.
    let mut p = vec![vec![0.0f64; n]; n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i][j] = (conditional[i][j] + conditional[j][i]) * scale;
            }
        }
    }

    Ok(Affinities {
        p,
        conditional,
        achieved_perplexity: achieved,
        clamped_points: clamped,
    })
}

/// One row of the conditional affinity matrix: bisection on β = 1/(2σ²).
/// Returns (row, achieved perplexity, converged?).
fn row_affinities(d2_row: &[f64], i: usize, target: f64) -> (Vec<f64>, f64, bool) {
    let n = d2_row.len();
    // Shift distances so the closest neighbour has weight exp(0) = 1,
    // keeping the exponentials in range for any β.
    let d2_min = d2_row
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, d)| *d)
        .fold(f64::INFINITY, f64::min);

    let mut beta = 1.0f64;
    let mut beta_min = f64::NEG_INFINITY;
    let mut beta_max = f64::INFINITY;
    let mut row = vec![0.0f64; n];
    let mut perp = 0.0f64;
    let mut converged = false;

    for _ in 0..MAX_BISECTIONS {
        let mut sum_w = 0.0f64;
        let mut sum_wd = 0.0f64;
        for j in 0..n {
            if j == i {
                row[j] = 0.0;
                continue;
            }
            let shifted = d2_row[j] - d2_min;
            let w = (-beta * shifted).exp();
            row[j] = w;
            sum_w += w;
            sum_wd += w * shifted;
        }
        // Entropy in nats of the normalized row; perplexity = e^H = 2^(H in bits).
        let entropy = sum_w.ln() + beta * sum_wd / sum_w;
        perp = entropy.exp();
        for value in row.iter_mut() {
            *value /= sum_w;
        }
        if (perp - target).abs() <= PERPLEXITY_TOL * target {
            converged = true;
            break;
        }
        if perp > target {
            // Too flat: sharpen by raising β.
            beta_min = beta;
            beta = if beta_max.is_finite() {
                (beta + beta_max) / 2.0
            } else {
                beta * 2.0
            };
        } else {
            beta_max = beta;
            beta = if beta_min.is_finite() {
                (beta + beta_min) / 2.0
            } else {
                beta / 2.0
            };
        }
    }
    (row, perp, converged)
}

/// KL(P‖Q) in nats and its exact gradient for the layout `y`, with Q the
/// Student-t (1 d.o.f.) affinities of `y`. `p` must be symmetric with a zero
/// diagonal. This is the oracle-facing entry point; the optimizer uses the
/// same pass internally.
pub fn kl_and_gradient(p: &[Vec<f64>], y: &[[f64; 2]]) -> (f64, Vec<[f64; 2]>) {
    step_pass(p, 1.0, y)
}

/// Shared O(n²) pass: KL against the true `p`, gradient against
/// `exaggeration · p` (the early-exaggeration update direction).
fn step_pass(p: &[Vec<f64>], exaggeration: f64, y: &[[f64; 2]]) -> (f64, Vec<[f64; 2]>) {
    let n = y.len();
    let mut sum_w = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            sum_w += 1.0 / (1.0 + dx * dx + dy * dy);
        }
    }
    sum_w *= 2.0; // both ordered pairs

    let mut kl = 0.0f64;
    let mut grad = vec![[0.0f64; 2]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            let q = w / sum_w;
            let q_safe = q.max(Q_FLOOR);
            if p[i][j] > 0.0 {
                kl += p[i][j] * (p[i][j].ln() - q_safe.ln());
            }
            if p[j][i] > 0.0 {
                kl += p[j][i] * (p[j][i].ln() - q_safe.ln());
            }
            let f = 4.0 * w * (exaggeration * p[i][j] - q);
            grad[i][0] += f * dx;
            grad[i][1] += f * dy;
            grad[j][0] -= f * dx;
            grad[j][1] -= f * dy;
        }
    }
    (kl, grad)
}

/// Projects embeddings to 2-D by momentum gradient descent on KL(P‖Q).
/// Deterministic for a fixed seed. The KL trace always measures the true
/// (non-exaggerated) P, so every entry is a genuine divergence ≥ 0.
pub fn tsne_project(
    embeddings: &[EmbeddingVector],
    config: &TsneConfig,
) -> Result<TsneResult, AnalysisError> {
    let n = embeddings.len();
    config.validate(n)?;
    let affinities = tsne_affinities(embeddings, config.perplexity)?;
    let p = &affinities.p;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [init.sample(&mut rng), init.sample(&mut rng)])
        .collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut kl_trace = Vec::with_capacity(config.iterations + 1);

    for iteration in 0..config.iterations {
        let early = iteration < EARLY_PHASE_ITERS;
        let exaggeration = if early {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if early {
            config.initial_momentum
        } else {
            config.final_momentum
        };
        let (kl, grad) = step_pass(p, exaggeration, &y);
        kl_trace.push(kl);
        let mut finite = kl.is_finite();
        for (point, (v, g)) in y.iter_mut().zip(velocity.iter_mut().zip(&grad)) {
            for axis in 0..2 {
                v[axis] = momentum * v[axis] - config.learning_rate * g[axis];
                point[axis] += v[axis];
                finite &= g[axis].is_finite() && point[axis].is_finite();
            }
        }
        if !finite {
            return Err(AnalysisError::NonFiniteGradient { iteration });
        }
    }
    let (final_kl, _) = step_pass(p, 1.0, &y);
    kl_trace.push(final_kl);

    Ok(TsneResult {
        coords: y,
        kl_trace,
    })
}

/// Writes the projection as CSV with header `id,x,y,label`. Unlabelled
/// records get an empty label field.
pub fn write_projection_csv<W: io::Write>(
    writer: W,
    records: &[ScrRecord],
    coords: &[[f64; 2]],
) -> Result<(), AnalysisError> {
    if records.len() != coords.len() {
        return Err(AnalysisError::RowMismatch {
            records: records.len(),
            coords: coords.len(),
        });
    }
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["id", "x", "y", "label"])?;
    for (record, point) in records.iter().zip(coords) {
        csv_writer.write_record([
            record.id.as_str(),
            &point[0].to_string(),
            &point[1].to_string(),
            record.label.map(|l| l.as_str()).unwrap_or(""),
        ])?;
    }
    csv_writer.flush().map_err(csv::Error::from)?;
    Ok(())
}
