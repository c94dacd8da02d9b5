//! Calibrate a score threshold: sweep the percent grid over scored verdicts,
//! compare the two selection objectives, and inspect score granularity.
//!
//! Run with: `cargo run --example threshold_sweep`

use scr_triage::corpus::generate_synthetic_corpus;
use scr_triage::eval::{
    histogram, pick_threshold, render_sweep, sweep, Objective, ReportFormat, ScoreScale,
};
use scr_triage::prompts::{get_template, PromptId};
use scr_triage::retry::RetryPolicy;
use scr_triage::runner::{run_batch, JsonlSink, MockChatClient};

fn main() -> anyhow::Result<()> {
    // Score a labelled corpus with the mock P5 client, then join verdict
    // scores back onto gold labels.
    let records = generate_synthetic_corpus(400, 0.25, 9)?;
    let template = get_template(PromptId::P5);
    let client = MockChatClient::with_default_rules(template.schema);
    let dir = tempfile::tempdir()?;
    let mut sink = JsonlSink::open(dir.path().join("verdicts.jsonl"))?;
    run_batch(
        &records,
        template,
        &client,
        &RetryPolicy::immediate(3),
        8,
        &mut sink,
    )?;

    let verdicts = JsonlSink::load(sink.path())?;
    let scored: Vec<(f64, scr_triage::Label)> = verdicts
        .iter()
        .filter_map(|verdict| {
            let score = verdict.score?;
            let record = records.iter().find(|r| r.id == verdict.record_id)?;
            Some((score, record.label?))
        })
        .collect();
    println!("{} scored verdicts\n", scored.len());

    let rows = sweep(&scored, &ScoreScale::Percent.default_grid())?;
    print!("{}", render_sweep(&rows, ReportFormat::Text)?);

    // Two ways to choose an operating point from the same sweep.
    let best_f1 = pick_threshold(&rows, Objective::MaxF1)?;
    let floored = pick_threshold(&rows, Objective::NegRecallWithPosFloor { floor: 0.9 })?;
    println!("\nmax F1 threshold:                      {best_f1}");
    println!("max recall_neg with recall_pos >= 0.9: {floored}");

    // A floor no surveyed threshold reaches is an explicit error (naming the
    // best achievable recall), not a silent pick. Surveying only the high end
    // of the scale makes a 0.999 floor unreachable here.
    let high_rows = sweep(&scored, &[60.0, 70.0, 80.0, 90.0, 100.0])?;
    let err = pick_threshold(
        &high_rows,
        Objective::NegRecallWithPosFloor { floor: 0.999 },
    )
    .unwrap_err();
    println!("floor 0.999 over thresholds >= 60 -> {err}");

    // Score histogram plus the share of scores stuck on the coarse 5-point
    // grid (1.0 would mean the model never used intermediate scores).
    let scores: Vec<f64> = scored.iter().map(|(s, _)| *s).collect();
    let hist = histogram(&scores, ScoreScale::Percent, 10.0)?;
    println!("\nscore histogram (bin width 10):");
    for (edge, count) in hist.bin_edges.iter().zip(&hist.counts) {
        println!(
            "  {:>5.0}..{:<5.0} {}",
            edge,
            edge + 10.0,
            "#".repeat((*count).min(60) as usize)
        );
    }
    println!(
        "fraction on the 5-point grid: {:.3}",
        hist.granularity_fraction
    );
    Ok(())
}
