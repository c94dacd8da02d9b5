//! The whole triage pipeline in one pass, using the same library calls the
//! CLI subcommands make: generate a corpus, embed it through the cache,
//! classify with the mock P5 client, sweep thresholds, and render a final
//! confusion report at the chosen operating point.
//!
//! Run with: `cargo run --example full_pipeline`

use std::collections::HashMap;

use scr_triage::corpus::{compute_stats, generate_synthetic_corpus, ApproxTokenizer, Label};
use scr_triage::embeddings::{Embedder, EmbeddingCache, MockEmbeddingProvider};
use scr_triage::eval::{
    confusion, pick_threshold, render_matrix, render_sweep, sweep, Objective, ReportFormat,
    ScoreScale,
};
use scr_triage::prompts::{get_template, PromptId};
use scr_triage::retry::RetryPolicy;
use scr_triage::runner::{run_batch, JsonlSink, MockChatClient};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let seed = 42;

    // 1. Corpus: 1000 records, minority safety class.
    let records = generate_synthetic_corpus(1000, 0.0964, seed)?;
    let stats = compute_stats(&records, &ApproxTokenizer)?;
    println!(
        "[1] corpus    {} records, mean {:.1} tokens",
        stats.count, stats.mean_tokens
    );

    // 2. Embeddings: deterministic mock provider behind the on-disk cache.
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let embedder = Embedder::new(
        MockEmbeddingProvider::new(64, seed),
        EmbeddingCache::open(dir.path().join("embeddings.bin"))?,
    );
    let outcome = embedder.embed_all(&texts)?;
    println!(
        "[2] embed     {} embeddings ({} new)",
        outcome.vectors.len(),
        outcome.newly_embedded
    );

    // 3. Classification: P5 percent scores from the offline mock client.
    let template = get_template(PromptId::P5);
    let client = MockChatClient::with_default_rules(template.schema);
    let mut sink = JsonlSink::open(dir.path().join("verdicts.jsonl"))?;
    let report = run_batch(
        &records,
        template,
        &client,
        &RetryPolicy::immediate(3),
        8,
        &mut sink,
    )?;
    println!(
        "[3] classify  {}/{} records, {} forced by override, {} failed",
        report.succeeded, report.total, report.overridden, report.failed
    );

    // 4. Threshold sweep over the percent grid against gold labels.
    let labels: HashMap<&str, Label> = records
        .iter()
        .filter_map(|r| r.label.map(|label| (r.id.as_str(), label)))
        .collect();
    let verdicts = JsonlSink::load(sink.path())?;
    let scored: Vec<(f64, Label)> = verdicts
        .iter()
        .filter_map(|v| Some((v.score?, *labels.get(v.record_id.as_str())?)))
        .collect();
    let rows = sweep(&scored, &ScoreScale::Percent.default_grid())?;
    let threshold = pick_threshold(&rows, Objective::NegRecallWithPosFloor { floor: 0.9 })?;
    std::fs::write(
        dir.path().join("sweep.csv"),
        render_sweep(&rows, ReportFormat::Csv)?,
    )?;
    println!(
        "[4] sweep     {} thresholds, chose {} (recall_pos >= 0.9)",
        rows.len(),
        threshold
    );

    // 5. Final report at the chosen threshold.
    let pairs: Vec<(Label, Label)> = verdicts
        .iter()
        .filter_map(|v| {
            Some((
                v.predicted_label(Some(threshold)),
                *labels.get(v.record_id.as_str())?,
            ))
        })
        .collect();
    let matrix = confusion(&pairs)?;
    println!("[5] report");
    for line in render_matrix(&matrix, ReportFormat::Text)?.lines() {
        println!("    {line}");
    }
    Ok(())
}
