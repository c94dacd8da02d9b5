//! Classify a small corpus with the offline mock chat model: concurrent
//! workers, per-record retries, a keyword-forced verdict, and a resumable
//! JSONL sink that skips already-classified records on the second run.
//!
//! Run with: `cargo run --example classify_batch`

use scr_triage::corpus::{generate_synthetic_corpus, Label, ScrRecord};
use scr_triage::prompts::{get_template, PromptId};
use scr_triage::retry::RetryPolicy;
use scr_triage::runner::{run_batch, JsonlSink, MockChatClient};

fn main() -> anyhow::Result<()> {
    let mut records = generate_synthetic_corpus(30, 0.3, 21)?;
    // One record that trips the committee override instead of the model.
    records.push(ScrRecord::new(
        "SCR-JHSC01",
        "Walkdown finding recorded for the JHSC quarterly review.",
        Some(Label::Safety),
    ));

    let template = get_template(PromptId::P5);
    let client = MockChatClient::with_default_rules(template.schema);
    let dir = tempfile::tempdir()?;
    let mut sink = JsonlSink::open(dir.path().join("verdicts.jsonl"))?;

    let report = run_batch(
        &records,
        template,
        &client,
        &RetryPolicy::immediate(3),
        4,
        &mut sink,
    )?;
    println!(
        "run 1: {}/{} classified, {} forced by override, {} failed",
        report.succeeded, report.total, report.overridden, report.failed
    );

    let verdicts = JsonlSink::load(sink.path())?;
    println!("\nsample verdicts (sink is sorted by record id):");
    for verdict in verdicts
        .iter()
        .take(3)
        .chain(verdicts.iter().filter(|v| v.forced_by_override))
    {
        println!(
            "  {} {} score={:?} attempts={} forced={}",
            verdict.record_id,
            verdict.flag.as_str(),
            verdict.score,
            verdict.attempts,
            verdict.forced_by_override
        );
    }

    // Re-running against the same sink classifies nothing new: every id is
    // already present, which is what makes interrupted batches resumable.
    let pending = records.iter().filter(|r| !sink.contains(&r.id)).count();
    let again = run_batch(
        &records,
        template,
        &client,
        &RetryPolicy::immediate(3),
        4,
        &mut sink,
    )?;
    println!(
        "\nrun 2 over the same sink: {} pending beforehand, report still covers {}/{}",
        pending, again.succeeded, again.total
    );
    assert_eq!(JsonlSink::load(sink.path())?, verdicts);
    Ok(())
}
