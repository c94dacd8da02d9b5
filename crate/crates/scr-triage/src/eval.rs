//! Confusion matrices, classification metrics, score-threshold sweeps,
//! score-distribution diagnostics, and report rendering.
//!
//! Degenerate metric cells (empty denominator) yield 0 rather than an error
//! or NaN so every sweep row stays totally ordered and comparable.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0} must not be empty")]
    Empty(&'static str),
    #[error("thresholds must be strictly increasing; offending index {0}")]
    UnsortedThresholds(usize),
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("score {value} is outside the {scale} scale range [0, {max}]")]
    OutOfRangeScore {
        value: f64,
        scale: ScoreScale,
        max: f64,
    },
    #[error("bin width must be positive and at most the scale maximum, got {0}")]
    BadBinWidth(f64),
    #[error("no sweep row reaches recall_pos >= {floor}; best achievable recall_pos is {best:.4}")]
    InfeasibleFloor { floor: f64, best: f64 },
    #[error("unknown report format {0:?}; valid formats are text, json, csv")]
    UnknownFormat(String),
    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Binary-outcome counts with SAFETY as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
}

impl ConfusionMatrix {
    /// Tallies one (actual, predicted) outcome.
    pub fn record(&mut self, actual: Label, predicted: Label) {
        match (actual, predicted) {
            (Label::Safety, Label::Safety) => self.true_pos += 1,
            (Label::Safety, Label::NonSafety) => self.false_neg += 1,
            (Label::NonSafety, Label::Safety) => self.false_pos += 1,
            (Label::NonSafety, Label::NonSafety) => self.true_neg += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    /// Derived metrics under the zero-sentinel policy: any cell with an
    /// empty denominator contributes 0 (an all-zero matrix yields all-zero
    /// metrics).
    pub fn metrics(&self) -> MetricsReport {
        fn ratio(numerator: u64, denominator: u64) -> f64 {
            if denominator == 0 {
                0.0
            } else {
                numerator as f64 / denominator as f64
            }
        }
        let accuracy = ratio(self.true_pos + self.true_neg, self.total());
        let precision = ratio(self.true_pos, self.true_pos + self.false_pos);
        let recall_pos = ratio(self.true_pos, self.true_pos + self.false_neg);
        let recall_neg = ratio(self.true_neg, self.true_neg + self.false_pos);
        let f1 = if precision + recall_pos == 0.0 {
            0.0
        } else {
            2.0 * precision * recall_pos / (precision + recall_pos)
        };
        MetricsReport {
            accuracy,
            precision,
            recall_pos,
            recall_neg,
            f1,
        }
    }
}

/// Standard classification metrics derived from a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall_pos: f64,
    pub recall_neg: f64,
    pub f1: f64,
}

/// One evaluated threshold within a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub matrix: ConfusionMatrix,
    pub metrics: MetricsReport,
}

/// Counts (predicted, actual) pairs into a confusion matrix.
pub fn confusion(pairs: &[(Label, Label)]) -> Result<ConfusionMatrix, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty("verdict list"));
    }
    let mut matrix = ConfusionMatrix::default();
    for (predicted, actual) in pairs {
        matrix.record(*actual, *predicted);
    }
    Ok(matrix)
}

/// Evaluates every threshold over the scored set. A record is predicted
/// SAFETY iff its score is >= the threshold (score equal to the threshold
/// classifies as safety — the conservative direction).
pub fn sweep(scored: &[(f64, Label)], thresholds: &[f64]) -> Result<Vec<SweepRow>, EvalError> {
    if scored.is_empty() {
        return Err(EvalError::Empty("scored set"));
    }
    if thresholds.is_empty() {
        return Err(EvalError::Empty("threshold list"));
    }
    for (score, _) in scored {
        if !score.is_finite() {
            return Err(EvalError::NonFiniteScore(*score));
        }
    }
    for (i, pair) in thresholds.windows(2).enumerate() {
        // `partial_cmp` so a NaN threshold is rejected, not silently accepted.
        if pair[0].partial_cmp(&pair[1]) != Some(std::cmp::Ordering::Less) {
            return Err(EvalError::UnsortedThresholds(i + 1));
        }
    }
    let rows = thresholds
        .iter()
        .map(|&threshold| {
            let mut matrix = ConfusionMatrix::default();
            for (score, actual) in scored {
                let predicted = if *score >= threshold {
                    Label::Safety
                } else {
                    Label::NonSafety
                };
                matrix.record(*actual, predicted);
            }
            SweepRow {
                threshold,
                metrics: matrix.metrics(),
                matrix,
            }
        })
        .collect();
    Ok(rows)
}

/// Calibration objective for `pick_threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Maximize F1; ties resolve to the lowest threshold.
    MaxF1,
    /// Maximize recall on NON_SAFETY subject to recall on SAFETY staying at
    /// or above the floor — the "catch every safety event, tolerate false
    /// positives" posture.
    NegRecallWithPosFloor { floor: f64 },
}

/// Selects the best threshold from sweep rows under the objective.
pub fn pick_threshold(rows: &[SweepRow], objective: Objective) -> Result<f64, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::Empty("sweep rows"));
    }
    match objective {
        Objective::MaxF1 => {
            let mut best = &rows[0];
            for row in &rows[1..] {
                if row.metrics.f1 > best.metrics.f1 {
                    best = row;
                }
            }
            Ok(best.threshold)
        }
        Objective::NegRecallWithPosFloor { floor } => {
            let mut best: Option<&SweepRow> = None;
            for row in rows {
                if row.metrics.recall_pos >= floor
                    && best.is_none_or(|b| row.metrics.recall_neg > b.metrics.recall_neg)
                {
                    best = Some(row);
                }
            }
            match best {
                Some(row) => Ok(row.threshold),
                None => Err(EvalError::InfeasibleFloor {
                    floor,
                    best: rows
                        .iter()
                        .map(|r| r.metrics.recall_pos)
                        .fold(0.0, f64::max),
                }),
            }
        }
    }
}

/// Score scale for histograms and sweep grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreScale {
    /// Scores in [0, 1]; granularity step 0.1.
    Unit,
    /// Scores in [0, 100]; granularity step 5.
    Percent,
}

impl ScoreScale {
    pub fn max(&self) -> f64 {
        match self {
            ScoreScale::Unit => 1.0,
            ScoreScale::Percent => 100.0,
        }
    }

    /// Step used by the "round number" check behind `granularity_fraction`.
    pub fn granularity_step(&self) -> f64 {
        match self {
            ScoreScale::Unit => 0.1,
            ScoreScale::Percent => 5.0,
        }
    }

    /// Default sweep thresholds: 0,5,...,100 (percent) or 0,0.05,...,1 (unit).
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            ScoreScale::Percent => (0..=20).map(|i| i as f64 * 5.0).collect(),
            ScoreScale::Unit => (0..=20).map(|i| i as f64 / 20.0).collect(),
        }
    }
}

impl std::fmt::Display for ScoreScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreScale::Unit => "unit",
            ScoreScale::Percent => "percent",
        })
    }
}

/// Fixed-width score distribution plus a "suspiciously round numbers"
/// diagnostic: the fraction of scores sitting on the scale's granularity
/// step (multiples of 5 on the percent scale, 0.1 on the unit scale).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub granularity_fraction: f64,
}

/// Bins scores into [0, w), [w, 2w), ... with the final bin closed at the
/// scale maximum.
pub fn histogram(
    scores: &[f64],
    scale: ScoreScale,
    bin_width: f64,
) -> Result<ScoreHistogram, EvalError> {
    let max = scale.max();
    if !(bin_width > 0.0 && bin_width <= max) {
        return Err(EvalError::BadBinWidth(bin_width));
    }
    let bins = (max / bin_width - 1e-9).ceil().max(1.0) as usize;
    let mut counts = vec![0u64; bins];
    let step = scale.granularity_step();
    let mut on_step = 0u64;
    for &score in scores {
        if !(score >= 0.0 && score <= max) {
            return Err(EvalError::OutOfRangeScore {
                value: score,
                scale,
                max,
            });
        }
        // The 1e-9 nudge keeps scores that are exactly on an edge (up to
        // float representation error) in the right-hand bin.
        let index = ((score / bin_width + 1e-9).floor() as usize).min(bins - 1);
        counts[index] += 1;
        if (score - step * (score / step).round()).abs() <= 1e-9 {
            on_step += 1;
        }
    }
    let bin_edges = (0..=bins).map(|i| i as f64 * bin_width).collect();
    let granularity_fraction = if scores.is_empty() {
        0.0
    } else {
        on_step as f64 / scores.len() as f64
    };
    Ok(ScoreHistogram {
        bin_edges,
        counts,
        granularity_fraction,
    })
}

/// Output format for rendered reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<ReportFormat, EvalError> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(EvalError::UnknownFormat(other.to_string())),
        }
    }
}

/// Column order shared by the sweep CSV and the text table.
pub const SWEEP_CSV_HEADER: &str =
    "threshold,tp,fp,tn,fn,accuracy,precision,recall_pos,recall_neg,f1";

#[derive(Serialize, Deserialize)]
struct MatrixReport {
    matrix: ConfusionMatrix,
    metrics: MetricsReport,
}

fn push_metric_lines(out: &mut String, metrics: &MetricsReport) {
    let _ = writeln!(out, "accuracy: {:.4}", metrics.accuracy);
    let _ = writeln!(out, "precision: {:.4}", metrics.precision);
    let _ = writeln!(out, "recall_pos: {:.4}", metrics.recall_pos);
    let _ = writeln!(out, "recall_neg: {:.4}", metrics.recall_neg);
    let _ = writeln!(out, "f1: {:.4}", metrics.f1);
}

/// Renders a single confusion matrix with its metrics.
pub fn render_matrix(matrix: &ConfusionMatrix, format: ReportFormat) -> Result<String, EvalError> {
    let metrics = matrix.metrics();
    match format {
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "confusion matrix (rows = actual, columns = predicted)");
            let _ = writeln!(out, "{:<12}{:>12}{:>12}", "", "safety", "non_safety");
            let _ = writeln!(
                out,
                "{:<12}{:>12}{:>12}",
                "safety", matrix.true_pos, matrix.false_neg
            );
            let _ = writeln!(
                out,
                "{:<12}{:>12}{:>12}",
                "non_safety", matrix.false_pos, matrix.true_neg
            );
            let _ = writeln!(out);
            push_metric_lines(&mut out, &metrics);
            Ok(out)
        }
        ReportFormat::Json => {
            let report = MatrixReport {
                matrix: *matrix,
                metrics,
            };
            Ok(serde_json::to_string_pretty(&report)? + "\n")
        }
        ReportFormat::Csv => {
            let mut out = String::from("tp,fp,tn,fn,accuracy,precision,recall_pos,recall_neg,f1\n");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                matrix.true_pos,
                matrix.false_pos,
                matrix.true_neg,
                matrix.false_neg,
                metrics.accuracy,
                metrics.precision,
                metrics.recall_pos,
                metrics.recall_neg,
                metrics.f1
            );
            Ok(out)
        }
    }
}

/// Renders a threshold sweep as a table (TEXT), array (JSON), or the fixed
/// `threshold,tp,fp,tn,fn,...` schema (CSV).
pub fn render_sweep(rows: &[SweepRow], format: ReportFormat) -> Result<String, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::Empty("sweep rows"));
    }
    match format {
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "{:>10} {:>8} {:>8} {:>8} {:>8} {:>9} {:>10} {:>11} {:>11} {:>7}",
                "threshold",
                "tp",
                "fp",
                "tn",
                "fn",
                "accuracy",
                "precision",
                "recall_pos",
                "recall_neg",
                "f1"
            );
            for row in rows {
                let m = &row.metrics;
                let _ = writeln!(
                    out,
                    "{:>10} {:>8} {:>8} {:>8} {:>8} {:>9.4} {:>10.4} {:>11.4} {:>11.4} {:>7.4}",
                    row.threshold,
                    row.matrix.true_pos,
                    row.matrix.false_pos,
                    row.matrix.true_neg,
                    row.matrix.false_neg,
                    m.accuracy,
                    m.precision,
                    m.recall_pos,
                    m.recall_neg,
                    m.f1
                );
            }
            Ok(out)
        }
        ReportFormat::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
        ReportFormat::Csv => {
            let mut out = String::from(SWEEP_CSV_HEADER);
            out.push('\n');
            for row in rows {
                let m = &row.metrics;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    row.threshold,
                    row.matrix.true_pos,
                    row.matrix.false_pos,
                    row.matrix.true_neg,
                    row.matrix.false_neg,
                    m.accuracy,
                    m.precision,
                    m.recall_pos,
                    m.recall_neg,
                    m.f1
                );
            }
            Ok(out)
        }
    }
}
