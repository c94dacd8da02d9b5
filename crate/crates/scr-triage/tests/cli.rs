//! End-to-end tests of the `scr-triage` binary: flag/config/default
//! precedence, cache reuse, error wording, resumability and artifact shapes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use scr_triage::corpus::{load_corpus, save_corpus, CorpusFormat, Label, ScrRecord};
use scr_triage::embeddings::{content_hash, EmbeddingCache, EmbeddingVector};
use scr_triage::runner::{Flag, JsonlSink};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_scr-triage"))
}

fn run(out_dir: &Path, args: &[&str]) -> Output {
    binary()
        .args(args)
        .args(["--out-dir", out_dir.to_str().expect("utf-8 path")])
        .output()
        .expect("binary launches")
}

/// Runs a subcommand that must succeed; returns its stdout.
fn run_ok(out_dir: &Path, args: &[&str]) -> String {
    let output = run(out_dir, args);
    assert!(
        output.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Runs a subcommand that must fail; returns its stderr.
fn run_err(out_dir: &Path, args: &[&str]) -> String {
    let output = run(out_dir, args);
    assert!(
        !output.status.success(),
        "{args:?} unexpectedly succeeded: {}",
        String::from_utf8_lossy(&output.stdout)
    );
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn generate(out_dir: &Path, n: usize, fraction: f64) -> PathBuf {
    let stdout = run_ok(
        out_dir,
        &[
            "gen",
            "--n",
            &n.to_string(),
            "--safety-fraction",
            &fraction.to_string(),
            "--seed",
            "42",
        ],
    );
    assert!(
        stdout.contains(&format!("wrote {n} records")),
        "gen stdout: {stdout}"
    );
    out_dir.join("corpus.jsonl")
}

fn corpus_arg(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

#[test]
fn missing_corpus_error_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("absent.jsonl");
    let stderr = run_err(dir.path(), &["stats", "--corpus", corpus_arg(&absent)]);
    assert!(
        stderr.contains("absent.jsonl"),
        "stderr should name the missing file: {stderr}"
    );
}

#[test]
fn gen_and_stats_report_counts_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 120, 0.25);
    let stdout = run_ok(dir.path(), &["stats", "--corpus", corpus_arg(&corpus)]);
    assert!(
        stdout.contains("120"),
        "stats should count 120 records: {stdout}"
    );
    assert!(
        stdout.contains("safety"),
        "stats should break down labels: {stdout}"
    );
    let histogram = std::fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    assert!(
        histogram.starts_with("bin_start,bin_end,count\n"),
        "histogram header: {histogram}"
    );
}

#[test]
fn dimension_resolves_flag_over_config_over_default() {
    let base = tempfile::tempdir().unwrap();
    let corpus = generate(base.path(), 50, 0.2);
    let config_path = base.path().join("triage.conf");
    std::fs::write(&config_path, "# embedding settings\ndimension = 32\n").unwrap();

    let size_of = |dir: &Path, extra: &[&str]| {
        let mut args = vec!["embed", "--corpus", corpus_arg(&corpus)];
        args.extend_from_slice(extra);
        run_ok(dir, &args);
        std::fs::metadata(dir.join("embeddings.bin")).unwrap().len()
    };

    // After a 4-byte magic header the cache holds one record per distinct
    // text: hash (8) + dimension (4) + dimension * 8 bytes. The file size
    // therefore reveals which dimension the run resolved.
    let default_dir = tempfile::tempdir().unwrap();
    let default_size = size_of(default_dir.path(), &[]);
    let config_dir = tempfile::tempdir().unwrap();
    let config_size = size_of(
        config_dir.path(),
        &["--config", config_path.to_str().unwrap()],
    );
    let flag_dir = tempfile::tempdir().unwrap();
    let flag_size = size_of(
        flag_dir.path(),
        &[
            "--config",
            config_path.to_str().unwrap(),
            "--dimension",
            "64",
        ],
    );

    assert_eq!(
        (config_size - 4) % (8 + 4 + 32 * 8),
        0,
        "config run should embed at dimension 32"
    );
    assert_eq!(
        (flag_size - 4) % (8 + 4 + 64 * 8),
        0,
        "flag run should embed at dimension 64"
    );
    assert!(
        default_size > 10 * flag_size && flag_size > config_size,
        "sizes should rank default(1536) {default_size} > flag(64) {flag_size} > \
         config(32) {config_size}"
    );
}

#[test]
fn config_file_with_secret_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 20, 0.3);
    let config_path = dir.path().join("bad.conf");
    std::fs::write(&config_path, "api_key = sk-TEST-123\n").unwrap();
    let stderr = run_err(
        dir.path(),
        &[
            "stats",
            "--corpus",
            corpus_arg(&corpus),
            "--config",
            config_path.to_str().unwrap(),
        ],
    );
    assert!(
        stderr.contains("SCR_TRIAGE_API_KEY") && stderr.contains("environment variable"),
        "rejection should point at the env var: {stderr}"
    );
    assert!(
        !stderr.contains("sk-TEST-123"),
        "error must not echo the secret value: {stderr}"
    );
}

#[test]
fn second_embed_run_hits_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 60, 0.2);
    let args = [
        "embed",
        "--corpus",
        corpus_arg(&corpus),
        "--dimension",
        "32",
    ];
    let first = run_ok(dir.path(), &args);
    assert!(
        first.contains("60 embeddings"),
        "first embed stdout: {first}"
    );
    assert!(
        !first.contains("(0 new)"),
        "first embed should compute vectors: {first}"
    );
    let second = run_ok(dir.path(), &args);
    assert!(
        second.contains("(0 new)"),
        "second embed should be all cache hits: {second}"
    );
}

#[test]
fn remote_embed_without_key_fails_before_any_request() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 20, 0.3);
    // Port 9 (discard) is never served; reaching the network would surface a
    // connection error instead of the missing-variable message asserted here.
    let common = [
        "embed",
        "--corpus",
        corpus_arg(&corpus),
        "--provider",
        "remote",
        "--endpoint",
        "http://127.0.0.1:9/v1/embeddings",
        "--model",
        "test-embedder",
    ];

    let output = binary()
        .args(common)
        .args(["--out-dir", dir.path().to_str().unwrap()])
        .env_remove("SCR_TRIAGE_API_KEY")
        .output()
        .unwrap();
    assert!(!output.status.success(), "embed must fail without a key");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("SCR_TRIAGE_API_KEY"),
        "stderr should name the env var: {stderr}"
    );

    let output = binary()
        .args(common)
        .args([
            "--api-key-env",
            "CUSTOM_SCR_KEY",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ])
        .env_remove("CUSTOM_SCR_KEY")
        .output()
        .unwrap();
    assert!(
        !output.status.success(),
        "embed must fail without the custom key"
    );
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("CUSTOM_SCR_KEY"),
        "stderr should name the custom var: {stderr}"
    );
}

/// Two-cluster corpus whose embeddings are pre-seeded into the on-disk cache
/// under the mock provider's identity, so `knn` sees real structure.
fn seeded_cluster_corpus(out_dir: &Path, dimension: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let cache = EmbeddingCache::open(out_dir.join("embeddings.bin")).unwrap();
    let provider_id = format!("mock-d{dimension}-s{seed}");
    for index in 0..200 {
        let (cluster, label) = if index % 2 == 0 {
            ("hazard", Label::Safety)
        } else {
            ("backlog", Label::NonSafety)
        };
        let text = format!("synthetic {cluster} narrative number {index}");
        let center = if label == Label::Safety { 3.0 } else { -3.0 };
        let values: Vec<f64> = (0..dimension)
            .map(|d| {
                let base = if d == 0 { center } else { 0.0 };
                base + 0.1 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        cache
            .put(
                content_hash(&provider_id, &text),
                &EmbeddingVector::new(values).unwrap(),
            )
            .unwrap();
        records.push(ScrRecord::new(format!("SCR-{index:03}"), text, Some(label)));
    }
    let path = out_dir.join("clusters.jsonl");
    save_corpus(&records, &path, CorpusFormat::Jsonl).unwrap();
    path
}

#[test]
fn knn_separates_seeded_clusters_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = seeded_cluster_corpus(dir.path(), 16, 42);
    let args = [
        "knn",
        "--corpus",
        corpus_arg(&corpus),
        "--k",
        "5",
        "--dimension",
        "16",
        "--seed",
        "42",
    ];
    let stdout = run_ok(dir.path(), &args);
    assert!(stdout.contains("confusion matrix"), "knn stdout: {stdout}");
    let accuracy: f64 = stdout
        .lines()
        .find_map(|line| line.trim().strip_prefix("accuracy:"))
        .expect("accuracy line")
        .trim()
        .parse()
        .expect("numeric accuracy");
    assert!(
        accuracy >= 0.95,
        "two separated clusters should score >= 0.95, got {accuracy}"
    );
    let rerun = run_ok(dir.path(), &args);
    assert_eq!(
        stdout, rerun,
        "same seed must reproduce the same split and matrix"
    );
}

#[test]
fn knn_rejects_even_k() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = seeded_cluster_corpus(dir.path(), 16, 42);
    let stderr = run_err(
        dir.path(),
        &[
            "knn",
            "--corpus",
            corpus_arg(&corpus),
            "--k",
            "4",
            "--dimension",
            "16",
            "--seed",
            "42",
        ],
    );
    assert!(
        stderr.contains("odd") && stderr.contains("tie"),
        "even k should explain the tie rule: {stderr}"
    );
}

#[test]
fn classify_forces_jhsc_records_and_reruns_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 40, 0.25);
    let mut records = load_corpus(&corpus, CorpusFormat::Jsonl).unwrap();
    records[0].text = format!("Flagged for the JHSC agenda. {}", records[0].text);
    save_corpus(&records, &corpus, CorpusFormat::Jsonl).unwrap();

    let args = [
        "classify",
        "--corpus",
        corpus_arg(&corpus),
        "--prompt",
        "P5",
        "--seed",
        "42",
    ];
    let stdout = run_ok(dir.path(), &args);
    assert!(
        stdout.contains("classified 40/40 records (1 forced by override, 0 failed)"),
        "classify stdout: {stdout}"
    );

    let verdicts_path = dir.path().join("verdicts.jsonl");
    let verdicts = JsonlSink::load(&verdicts_path).unwrap();
    assert_eq!(verdicts.len(), 40);
    let forced = verdicts
        .iter()
        .find(|v| v.record_id == records[0].id)
        .unwrap();
    assert!(forced.forced_by_override && forced.flag == Flag::Yes);
    assert_eq!(forced.score, Some(100.0));

    // A rerun has nothing pending and must leave the sink byte-identical.
    let before = std::fs::read(&verdicts_path).unwrap();
    let rerun = run_ok(dir.path(), &args);
    assert!(rerun.contains("classified 40/40"), "rerun stdout: {rerun}");
    assert_eq!(
        before,
        std::fs::read(&verdicts_path).unwrap(),
        "rerun altered the sink"
    );
}

#[test]
fn classify_p4_scores_live_on_the_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 40, 0.25);
    run_ok(
        dir.path(),
        &[
            "classify",
            "--corpus",
            corpus_arg(&corpus),
            "--prompt",
            "P4",
        ],
    );
    let verdicts = JsonlSink::load(dir.path().join("verdicts.jsonl")).unwrap();
    assert_eq!(verdicts.len(), 40);
    for verdict in &verdicts {
        let score = verdict.score.expect("P4 verdicts carry scores");
        assert!(
            (0.0..=1.0).contains(&score),
            "{} scored {score}, outside the unit interval",
            verdict.record_id
        );
    }
}

#[test]
fn sweep_writes_grid_and_honours_objectives() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 300, 0.0964);
    run_ok(
        dir.path(),
        &[
            "classify",
            "--corpus",
            corpus_arg(&corpus),
            "--prompt",
            "P5",
        ],
    );

    let stdout = run_ok(dir.path(), &["sweep", "--corpus", corpus_arg(&corpus)]);
    assert!(
        stdout.contains("chosen threshold:"),
        "sweep stdout: {stdout}"
    );
    let grid = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(
        grid.lines().count(),
        22,
        "header plus 21 thresholds: {grid}"
    );
    assert!(
        grid.lines().any(|line| line.starts_with("70,")),
        "the percent grid must include threshold 70: {grid}"
    );

    let stdout = run_ok(
        dir.path(),
        &[
            "sweep",
            "--corpus",
            corpus_arg(&corpus),
            "--objective",
            "max-f1",
        ],
    );
    assert!(
        stdout.contains("chosen threshold:"),
        "max-f1 stdout: {stdout}"
    );
}

#[test]
fn sweep_with_unreachable_floor_reports_best_achievable() {
    let dir = tempfile::tempdir().unwrap();
    // All gold labels non-safety: recall on the safety class is pinned to the
    // 0.0 sentinel in every row, so no threshold can reach the floor.
    let records: Vec<ScrRecord> = (0..30)
        .map(|index| {
            ScrRecord::new(
                format!("SCR-{index:03}"),
                format!("documentation backlog item {index} rescheduled"),
                Some(Label::NonSafety),
            )
        })
        .collect();
    let corpus = dir.path().join("corpus.jsonl");
    save_corpus(&records, &corpus, CorpusFormat::Jsonl).unwrap();
    run_ok(
        dir.path(),
        &[
            "classify",
            "--corpus",
            corpus_arg(&corpus),
            "--prompt",
            "P5",
        ],
    );

    let stderr = run_err(
        dir.path(),
        &["sweep", "--corpus", corpus_arg(&corpus), "--floor", "0.99"],
    );
    assert!(
        stderr.contains("best achievable recall_pos"),
        "infeasible floor should report the best row: {stderr}"
    );
}

#[test]
fn project_writes_labelled_coords_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 300, 0.0964);
    let args = [
        "project",
        "--corpus",
        corpus_arg(&corpus),
        "--dimension",
        "16",
        "--perplexity",
        "20",
        "--iterations",
        "400",
        "--seed",
        "42",
    ];
    let stdout = run_ok(dir.path(), &args);
    assert!(
        stdout.contains("final KL divergence"),
        "project stdout: {stdout}"
    );
    let coords = std::fs::read_to_string(dir.path().join("coords.csv")).unwrap();
    let mut lines = coords.lines();
    assert_eq!(lines.next(), Some("id,x,y,label"));
    assert_eq!(lines.count(), 300, "one coordinate row per record");

    let rerun_dir = tempfile::tempdir().unwrap();
    let corpus_b = generate(rerun_dir.path(), 300, 0.0964);
    let mut rerun_args = args.to_vec();
    rerun_args[2] = corpus_arg(&corpus_b);
    run_ok(rerun_dir.path(), &rerun_args);
    assert_eq!(
        coords,
        std::fs::read_to_string(rerun_dir.path().join("coords.csv")).unwrap(),
        "seed 42 should reproduce the layout bit for bit"
    );
}

#[test]
fn project_rejects_perplexity_at_or_above_a_third_of_n() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 60, 0.2);
    let stderr = run_err(
        dir.path(),
        &[
            "project",
            "--corpus",
            corpus_arg(&corpus),
            "--dimension",
            "16",
            "--perplexity",
            "20",
        ],
    );
    assert!(
        stderr.contains("n/3"),
        "perplexity cap should cite the n/3 rule: {stderr}"
    );
}

#[test]
fn report_renders_stdout_and_persists_text_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 100, 0.25);
    run_ok(
        dir.path(),
        &[
            "classify",
            "--corpus",
            corpus_arg(&corpus),
            "--prompt",
            "P5",
        ],
    );

    let stdout = run_ok(
        dir.path(),
        &[
            "report",
            "--corpus",
            corpus_arg(&corpus),
            "--threshold",
            "70",
        ],
    );
    assert!(
        stdout.contains("confusion matrix"),
        "report stdout: {stdout}"
    );
    let persisted = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(
        persisted.contains("confusion matrix"),
        "report.txt: {persisted}"
    );

    // JSON on stdout must not change the persisted text artifact.
    let stdout = run_ok(
        dir.path(),
        &[
            "report",
            "--corpus",
            corpus_arg(&corpus),
            "--threshold",
            "70",
            "--format",
            "json",
        ],
    );
    assert!(
        stdout.trim_start().starts_with('{'),
        "json report stdout: {stdout}"
    );
    let persisted = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(
        persisted.contains("confusion matrix"),
        "report.txt after json run: {persisted}"
    );
}
