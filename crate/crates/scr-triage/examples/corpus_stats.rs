//! Generate a synthetic SCR corpus, save and reload it, and print length and
//! class-balance statistics.
//!
//! Run with: `cargo run --example corpus_stats`

use scr_triage::corpus::{
    compute_stats, format_for_path, generate_synthetic_corpus, load_corpus, save_corpus,
    ApproxTokenizer, WhitespaceTokenizer,
};

fn main() -> anyhow::Result<()> {
    // A deterministic 1000-record corpus with the minority safety class at
    // roughly one record in ten.
    let records = generate_synthetic_corpus(1000, 0.0964, 42)?;
    println!("generated {} records, e.g.:", records.len());
    for record in &records[..3] {
        let label = record.label.map(|l| l.as_str()).unwrap_or("-");
        println!("  [{label:>10}] {}: {}", record.id, record.text);
    }

    // Corpora round-trip through JSONL (the pipeline format) or CSV.
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("corpus.jsonl");
    save_corpus(&records, &path, format_for_path(&path))?;
    let reloaded = load_corpus(&path, format_for_path(&path))?;
    assert_eq!(records, reloaded);
    println!("\nround-tripped through {}", path.display());

    // Length statistics under two tokenizers: a byte-length approximation
    // and a whitespace splitter.
    for (name, stats) in [
        (
            "approx (bytes/4)",
            compute_stats(&reloaded, &ApproxTokenizer)?,
        ),
        (
            "whitespace",
            compute_stats(&reloaded, &WhitespaceTokenizer)?,
        ),
    ] {
        println!("\ntoken statistics, {name} tokenizer");
        println!("  {:<14}{:>8}", "records", stats.count);
        println!("  {:<14}{:>8}", "min", stats.min_tokens);
        println!("  {:<14}{:>8}", "max", stats.max_tokens);
        println!("  {:<14}{:>8.2}", "mean", stats.mean_tokens);
        println!("  {:<14}{:>8.1}", "median", stats.median_tokens);
        for (label, count) in &stats.class_counts {
            let share = 100.0 * *count as f64 / stats.count as f64;
            println!("  {:<14}{count:>8}  ({share:.1}%)", label.as_str());
        }
    }
    Ok(())
}
