//! Command-line front end. Each subcommand drives one library capability and
//! exchanges artifacts through an output directory so the commands compose
//! into a pipeline: `gen` -> `embed` -> `classify` -> `sweep` -> `report`.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::analysis::{tsne_project, write_projection_csv, KnnModel, TsneConfig, DEFAULT_K};
use crate::config::{self, FileConfig, DEFAULT_API_KEY_ENV};
use crate::corpus::{
    compute_stats, format_for_path, generate_synthetic_corpus, load_corpus, save_corpus,
    ApproxTokenizer, Label, ScrRecord, Tokenizer,
};
use crate::embeddings::{
    Embedder, EmbeddingCache, EmbeddingVector, MockEmbeddingProvider, RemoteEmbeddingProvider,
    DEFAULT_BATCH_SIZE, DEFAULT_DIMENSION,
};
use crate::eval::{
    confusion, pick_threshold, render_matrix, render_sweep, sweep, Objective, ReportFormat,
    ScoreScale,
};
use crate::prompts::{lookup_template, PromptId};
use crate::retry::RetryPolicy;
use crate::runner::{run_batch, ChatClient, JsonlSink, MockChatClient, RemoteChatClient};

/// Width of one token-count histogram bin in `stats.csv`.
const TOKEN_BIN_WIDTH: u32 = 100;

#[derive(Debug, Parser)]
#[command(
    name = "scr-triage",
    version,
    about = "Triage station condition records"
)]
pub struct Cli {
    /// Flat key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory artifacts are written to (default `out`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed shared by every stochastic step (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report format: text, json or csv (default text).
    #[arg(long, global = true)]
    pub format: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled corpus.
    Gen {
        /// Number of records.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Fraction of records labelled safety.
        #[arg(long, default_value_t = 0.0964)]
        safety_fraction: f64,
        /// Destination file (default `<out-dir>/corpus.jsonl`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print corpus statistics and write a token-count histogram CSV.
    Stats {
        /// Corpus file (.jsonl or .csv).
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Embed every record, reusing the on-disk embedding cache.
    Embed {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Embedding provider: mock or remote.
        #[arg(long)]
        provider: Option<String>,
        /// Embedding dimension.
        #[arg(long)]
        dimension: Option<usize>,
        /// Texts per provider request.
        #[arg(long)]
        batch_size: Option<usize>,
        /// Remote embedding endpoint URL.
        #[arg(long)]
        endpoint: Option<String>,
        /// Remote embedding model name.
        #[arg(long)]
        model: Option<String>,
        /// Environment variable holding the API key.
        #[arg(long)]
        api_key_env: Option<String>,
    },
    /// Evaluate the k-nearest-neighbour baseline on a labelled corpus.
    Knn {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Number of neighbours (must be odd).
        #[arg(long)]
        k: Option<usize>,
        /// Fraction of records used for training.
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        dimension: Option<usize>,
    },
    /// Classify records with a prompted chat model, resuming interrupted runs.
    Classify {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Prompt id: P1 through P5.
        #[arg(long)]
        prompt: Option<String>,
        /// Chat provider: mock or remote.
        #[arg(long)]
        provider: Option<String>,
        /// Maximum in-flight classifications.
        #[arg(long)]
        concurrency: Option<usize>,
        /// Attempts per record before giving up.
        #[arg(long)]
        retry_max: Option<u32>,
        /// Remote chat endpoint URL.
        #[arg(long)]
        endpoint: Option<String>,
        /// Remote chat model name.
        #[arg(long)]
        model: Option<String>,
        /// Environment variable holding the API key.
        #[arg(long)]
        api_key_env: Option<String>,
    },
    /// Sweep classification thresholds over scored verdicts.
    Sweep {
        /// Verdict file (default `<out-dir>/verdicts.jsonl`).
        #[arg(long)]
        verdicts: Option<PathBuf>,
        /// Labelled corpus supplying gold labels.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Selection objective: neg-recall or max-f1.
        #[arg(long)]
        objective: Option<String>,
        /// Minimum recall on the safety class for neg-recall.
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Project embeddings to two dimensions with t-SNE.
    Project {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        perplexity: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        dimension: Option<usize>,
    },
    /// Score verdicts against gold labels and render a confusion report.
    Report {
        /// Verdict file (default `<out-dir>/verdicts.jsonl`).
        #[arg(long)]
        verdicts: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Score threshold; verdicts at or above it count as safety.
        #[arg(long)]
        threshold: Option<f64>,
    },
}

/// Settings shared by every subcommand after flag/config/default resolution.
struct RunContext {
    file: FileConfig,
    out_dir: PathBuf,
    seed: u64,
    format: ReportFormat,
}

impl RunContext {
    fn corpus_path(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        flag.or_else(|| self.file.get("corpus").map(PathBuf::from))
            .context("no corpus given; pass --corpus or set `corpus` in the config file")
    }

    fn load_records(&self, flag: Option<PathBuf>) -> Result<Vec<ScrRecord>> {
        let path = self.corpus_path(flag)?;
        let records = load_corpus(&path, format_for_path(&path))
            .with_context(|| format!("failed to load corpus {}", path.display()))?;
        Ok(records)
    }

    fn verdicts_path(&self, flag: Option<PathBuf>) -> PathBuf {
        flag.unwrap_or_else(|| self.out_dir.join("verdicts.jsonl"))
    }

    fn string(&self, flag: Option<String>, key: &str, default: &str) -> String {
        config::resolve(
            flag,
            self.file.get(key).map(str::to_string),
            default.to_string(),
        )
    }

    fn usize(&self, flag: Option<usize>, key: &str, default: usize) -> Result<usize> {
        Ok(config::resolve(flag, self.file.get_usize(key)?, default))
    }

    fn u32(&self, flag: Option<u32>, key: &str, default: u32) -> Result<u32> {
        Ok(config::resolve(flag, self.file.get_u32(key)?, default))
    }

    fn f64(&self, flag: Option<f64>, key: &str, default: f64) -> Result<f64> {
        Ok(config::resolve(flag, self.file.get_f64(key)?, default))
    }

    /// Mock embedder backed by the shared on-disk cache.
    fn mock_embedder(&self, dimension: usize) -> Result<Embedder<MockEmbeddingProvider>> {
        let cache = EmbeddingCache::open(self.out_dir.join("embeddings.bin"))?;
        Ok(Embedder::new(
            MockEmbeddingProvider::new(dimension, self.seed),
            cache,
        ))
    }

    /// Embeds every record text, returning vectors in corpus order.
    fn embed_records(
        &self,
        records: &[ScrRecord],
        dimension: usize,
    ) -> Result<Vec<EmbeddingVector>> {
        let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
        let embedder = self.mock_embedder(dimension)?;
        Ok(embedder.embed_all(&texts)?.vectors)
    }
}

/// Parses command-line arguments and runs the selected subcommand.
pub fn run() -> Result<()> {
    execute(Cli::parse())
}

/// Runs an already-parsed invocation; split out so tests can drive it.
pub fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let out_dir = cli
        .out_dir
        .or_else(|| file.get("out_dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("failed to create output directory {}", out_dir.display()))?;
    let seed = config::resolve(cli.seed, file.get_u64("seed")?, 0);
    let format: ReportFormat = cli
        .format
        .or_else(|| file.get("format").map(str::to_string))
        .as_deref()
        .unwrap_or("text")
        .parse()?;
    let ctx = RunContext {
        file,
        out_dir,
        seed,
        format,
    };

    match cli.command {
        Command::Gen {
            n,
            safety_fraction,
            out,
        } => cmd_gen(&ctx, n, safety_fraction, out),
        Command::Stats { corpus } => cmd_stats(&ctx, corpus),
        Command::Embed {
            corpus,
            provider,
            dimension,
            batch_size,
            endpoint,
            model,
            api_key_env,
        } => cmd_embed(
            &ctx,
            corpus,
            provider,
            dimension,
            batch_size,
            endpoint,
            model,
            api_key_env,
        ),
        Command::Knn {
            corpus,
            k,
            train_fraction,
            dimension,
        } => cmd_knn(&ctx, corpus, k, train_fraction, dimension),
        Command::Classify {
            corpus,
            prompt,
            provider,
            concurrency,
            retry_max,
            endpoint,
            model,
            api_key_env,
        } => cmd_classify(
            &ctx,
            corpus,
            prompt,
            provider,
            concurrency,
            retry_max,
            endpoint,
            model,
            api_key_env,
        ),
        Command::Sweep {
            verdicts,
            corpus,
            objective,
            floor,
        } => cmd_sweep(&ctx, verdicts, corpus, objective, floor),
        Command::Project {
            corpus,
            perplexity,
            iterations,
            dimension,
        } => cmd_project(&ctx, corpus, perplexity, iterations, dimension),
        Command::Report {
            verdicts,
            corpus,
            threshold,
        } => cmd_report(&ctx, verdicts, corpus, threshold),
    }
}

fn cmd_gen(ctx: &RunContext, n: usize, safety_fraction: f64, out: Option<PathBuf>) -> Result<()> {
    let records = generate_synthetic_corpus(n, safety_fraction, ctx.seed)?;
    let safety = records
        .iter()
        .filter(|r| r.label == Some(Label::Safety))
        .count();
    let path = out.unwrap_or_else(|| ctx.out_dir.join("corpus.jsonl"));
    save_corpus(&records, &path, format_for_path(&path))?;
    println!(
        "wrote {} records ({} safety) to {}",
        records.len(),
        safety,
        path.display()
    );
    Ok(())
}

fn cmd_stats(ctx: &RunContext, corpus: Option<PathBuf>) -> Result<()> {
    let records = ctx.load_records(corpus)?;
    let tokenizer = ApproxTokenizer;
    let stats = compute_stats(&records, &tokenizer)?;

    println!("{:<16}{:>10}", "records", stats.count);
    println!("{:<16}{:>10}", "min tokens", stats.min_tokens);
    println!("{:<16}{:>10}", "max tokens", stats.max_tokens);
    println!("{:<16}{:>10.2}", "mean tokens", stats.mean_tokens);
    println!("{:<16}{:>10.1}", "median tokens", stats.median_tokens);
    for (label, count) in &stats.class_counts {
        println!("{:<16}{:>10}", label.as_str(), count);
    }
    let labelled: usize = stats.class_counts.values().sum();
    if labelled < stats.count {
        println!("{:<16}{:>10}", "unlabelled", stats.count - labelled);
    }

    // Token-count histogram with fixed-width bins covering every record.
    let counts: Vec<u32> = records
        .iter()
        .map(|r| tokenizer.count_tokens(&r.text))
        .collect();
    let bins = (stats.max_tokens / TOKEN_BIN_WIDTH + 1) as usize;
    let mut histogram = vec![0u64; bins];
    for &count in &counts {
        histogram[(count / TOKEN_BIN_WIDTH) as usize] += 1;
    }
    let path = ctx.out_dir.join("stats.csv");
    let mut csv = String::from("bin_start,bin_end,count\n");
    for (index, count) in histogram.iter().enumerate() {
        let start = index as u32 * TOKEN_BIN_WIDTH;
        csv.push_str(&format!(
            "{},{},{}\n",
            start,
            start + TOKEN_BIN_WIDTH,
            count
        ));
    }
    std::fs::write(&path, csv)?;
    println!("wrote token histogram to {}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_embed(
    ctx: &RunContext,
    corpus: Option<PathBuf>,
    provider: Option<String>,
    dimension: Option<usize>,
    batch_size: Option<usize>,
    endpoint: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
) -> Result<()> {
    let records = ctx.load_records(corpus)?;
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let provider = ctx.string(provider, "provider", "mock");
    let dimension = ctx.usize(dimension, "dimension", DEFAULT_DIMENSION)?;
    let batch_size = ctx.usize(batch_size, "batch_size", DEFAULT_BATCH_SIZE)?;
    let cache = EmbeddingCache::open(ctx.out_dir.join("embeddings.bin"))?;

    let outcome = match provider.as_str() {
        "mock" => {
            let embedder = Embedder::new(MockEmbeddingProvider::new(dimension, ctx.seed), cache)
                .with_batch_size(batch_size);
            embedder.embed_all(&texts)?
        }
        "remote" => {
            let endpoint = endpoint
                .or_else(|| ctx.file.get("endpoint").map(str::to_string))
                .context("remote provider needs --endpoint or the config key `endpoint`")?;
            let model = model
                .or_else(|| ctx.file.get("model").map(str::to_string))
                .context("remote provider needs --model or the config key `model`")?;
            let env_var = ctx.string(api_key_env, "api_key_env", DEFAULT_API_KEY_ENV);
            let remote = RemoteEmbeddingProvider::from_env(endpoint, model, &env_var, dimension)?;
            let embedder = Embedder::new(remote, cache).with_batch_size(batch_size);
            embedder.embed_all(&texts)?
        }
        other => bail!("unknown embedding provider {other:?}; valid providers are mock, remote"),
    };
    println!(
        "{} embeddings ({} new)",
        outcome.vectors.len(),
        outcome.newly_embedded
    );
    Ok(())
}

fn cmd_knn(
    ctx: &RunContext,
    corpus: Option<PathBuf>,
    k: Option<usize>,
    train_fraction: Option<f64>,
    dimension: Option<usize>,
) -> Result<()> {
    let records = ctx.load_records(corpus)?;
    let k = ctx.usize(k, "k", DEFAULT_K)?;
    let train_fraction = ctx.f64(train_fraction, "train_fraction", 0.8)?;
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        bail!("train fraction must be strictly between 0 and 1, got {train_fraction}");
    }
    let dimension = ctx.usize(dimension, "dimension", DEFAULT_DIMENSION)?;
    let labels: Vec<Label> = records
        .iter()
        .map(|r| {
            r.label.ok_or_else(|| {
                anyhow::anyhow!(
                    "record {} has no label; k-NN needs a fully labelled corpus",
                    r.id
                )
            })
        })
        .collect::<Result<_>>()?;
    let vectors = ctx.embed_records(&records, dimension)?;

    // Seeded shuffle, then an ordered train/test split of the shuffled ids.
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut indices: Vec<usize> = (0..records.len()).collect();
    indices.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(ctx.seed));
    let train_count = ((records.len() as f64) * train_fraction).round() as usize;
    let train_count = train_count.clamp(1, records.len().saturating_sub(1).max(1));
    let pair = |&index: &usize| (vectors[index].clone(), labels[index]);
    let training: Vec<_> = indices[..train_count].iter().map(pair).collect();
    let test: Vec<_> = indices[train_count..].iter().map(pair).collect();
    log::info!(
        "k-NN split: {} training, {} test, k={}",
        training.len(),
        test.len(),
        k
    );

    let model = KnnModel::fit(training, k)?;
    let matrix = model.evaluate(&test)?;
    print!("{}", render_matrix(&matrix, ctx.format)?);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_classify(
    ctx: &RunContext,
    corpus: Option<PathBuf>,
    prompt: Option<String>,
    provider: Option<String>,
    concurrency: Option<usize>,
    retry_max: Option<u32>,
    endpoint: Option<String>,
    model: Option<String>,
    api_key_env: Option<String>,
) -> Result<()> {
    let records = ctx.load_records(corpus)?;
    let prompt = ctx.string(prompt, "prompt", "P5");
    let template = lookup_template(&prompt)?;
    let provider = ctx.string(provider, "provider", "mock");
    let concurrency = ctx.usize(concurrency, "concurrency", 8)?;
    let retry_max = ctx.u32(retry_max, "retry_max", 3)?;

    let client: Box<dyn ChatClient> = match provider.as_str() {
        "mock" => Box::new(MockChatClient::with_default_rules(template.schema)),
        "remote" => {
            let endpoint = endpoint
                .or_else(|| ctx.file.get("endpoint").map(str::to_string))
                .context("remote provider needs --endpoint or the config key `endpoint`")?;
            let model = model
                .or_else(|| ctx.file.get("model").map(str::to_string))
                .context("remote provider needs --model or the config key `model`")?;
            let env_var = ctx.string(api_key_env, "api_key_env", DEFAULT_API_KEY_ENV);
            Box::new(RemoteChatClient::from_env(endpoint, model, &env_var)?)
        }
        other => bail!("unknown chat provider {other:?}; valid providers are mock, remote"),
    };
    // The mock never needs backoff; the remote policy waits between attempts.
    let policy = match provider.as_str() {
        "mock" => RetryPolicy::immediate(retry_max),
        _ => RetryPolicy {
            max_attempts: retry_max,
            ..RetryPolicy::default()
        },
    };

    let sink_path = ctx.out_dir.join("verdicts.jsonl");
    let mut sink = JsonlSink::open(&sink_path)?;
    let report = run_batch(
        &records,
        template,
        client.as_ref(),
        &policy,
        concurrency,
        &mut sink,
    )?;
    for (record_id, message) in &report.failures {
        eprintln!("failed {record_id}: {message}");
    }
    println!(
        "classified {}/{} records ({} forced by override, {} failed) -> {}",
        report.succeeded,
        report.total,
        report.overridden,
        report.failed,
        sink_path.display()
    );
    Ok(())
}

fn cmd_sweep(
    ctx: &RunContext,
    verdicts: Option<PathBuf>,
    corpus: Option<PathBuf>,
    objective: Option<String>,
    floor: Option<f64>,
) -> Result<()> {
    let verdicts_path = ctx.verdicts_path(verdicts);
    let verdicts = JsonlSink::load(&verdicts_path)
        .with_context(|| format!("failed to read verdicts {}", verdicts_path.display()))?;
    let records = ctx.load_records(corpus)?;
    let labels: HashMap<&str, Label> = records
        .iter()
        .filter_map(|r| r.label.map(|label| (r.id.as_str(), label)))
        .collect();

    let mut scored: Vec<(f64, Label)> = Vec::new();
    let mut unscored = 0usize;
    let mut unlabelled = 0usize;
    let mut prompts: Vec<PromptId> = Vec::new();
    for verdict in &verdicts {
        let Some(score) = verdict.score else {
            unscored += 1;
            continue;
        };
        let Some(&label) = labels.get(verdict.record_id.as_str()) else {
            unlabelled += 1;
            continue;
        };
        if !prompts.contains(&verdict.prompt_id) {
            prompts.push(verdict.prompt_id);
        }
        scored.push((score, label));
    }
    if scored.is_empty() {
        bail!(
            "no scored verdicts usable from {} ({} without score, {} without gold label); \
             score thresholds need P4 or P5 verdicts over a labelled corpus",
            verdicts_path.display(),
            unscored,
            unlabelled
        );
    }
    let scale = match (
        prompts.contains(&PromptId::P4),
        prompts.contains(&PromptId::P5),
    ) {
        (true, true) => bail!("verdicts mix unit-scale (P4) and percent-scale (P5) scores"),
        (true, false) => ScoreScale::Unit,
        _ => ScoreScale::Percent,
    };

    let grid = scale.default_grid();
    let rows = sweep(&scored, &grid)?;
    let path = ctx.out_dir.join("sweep.csv");
    std::fs::write(&path, render_sweep(&rows, ReportFormat::Csv)?)?;

    let objective = match ctx.string(objective, "objective", "neg-recall").as_str() {
        "max-f1" => Objective::MaxF1,
        "neg-recall" => Objective::NegRecallWithPosFloor {
            floor: ctx.f64(floor, "floor", 0.9)?,
        },
        other => bail!("unknown objective {other:?}; valid objectives are neg-recall, max-f1"),
    };
    let threshold = pick_threshold(&rows, objective)?;
    let chosen = rows
        .iter()
        .find(|row| row.threshold == threshold)
        .expect("chosen row");

    println!(
        "{} scored verdicts on the {} scale ({} excluded: {} without score, {} without label)",
        scored.len(),
        scale,
        unscored + unlabelled,
        unscored,
        unlabelled
    );
    println!(
        "chosen threshold: {} (accuracy {:.4}, recall_pos {:.4}, recall_neg {:.4}, f1 {:.4})",
        threshold,
        chosen.metrics.accuracy,
        chosen.metrics.recall_pos,
        chosen.metrics.recall_neg,
        chosen.metrics.f1
    );
    println!("wrote sweep to {}", path.display());
    Ok(())
}

fn cmd_project(
    ctx: &RunContext,
    corpus: Option<PathBuf>,
    perplexity: Option<f64>,
    iterations: Option<usize>,
    dimension: Option<usize>,
) -> Result<()> {
    let records = ctx.load_records(corpus)?;
    let dimension = ctx.usize(dimension, "dimension", DEFAULT_DIMENSION)?;
    let config = TsneConfig {
        perplexity: ctx.f64(perplexity, "perplexity", 30.0)?,
        iterations: ctx.usize(iterations, "iterations", 1000)?,
        seed: ctx.seed,
        ..TsneConfig::default()
    };
    let vectors = ctx.embed_records(&records, dimension)?;
    let result = tsne_project(&vectors, &config)?;

    let path = ctx.out_dir.join("coords.csv");
    let file = File::create(&path)?;
    write_projection_csv(file, &records, &result.coords)?;
    let final_kl = result.kl_trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "projected {} records to {} (final KL divergence {:.4})",
        records.len(),
        path.display(),
        final_kl
    );
    Ok(())
}

fn cmd_report(
    ctx: &RunContext,
    verdicts: Option<PathBuf>,
    corpus: Option<PathBuf>,
    threshold: Option<f64>,
) -> Result<()> {
    let verdicts_path = ctx.verdicts_path(verdicts);
    let verdicts = JsonlSink::load(&verdicts_path)
        .with_context(|| format!("failed to read verdicts {}", verdicts_path.display()))?;
    let records = ctx.load_records(corpus)?;
    let threshold = threshold.or(ctx.file.get_f64("threshold")?);
    let labels: HashMap<&str, Label> = records
        .iter()
        .filter_map(|r| r.label.map(|label| (r.id.as_str(), label)))
        .collect();

    let mut pairs: Vec<(Label, Label)> = Vec::new();
    let mut excluded = 0usize;
    for verdict in &verdicts {
        match labels.get(verdict.record_id.as_str()) {
            Some(&actual) => pairs.push((verdict.predicted_label(threshold), actual)),
            None => excluded += 1,
        }
    }
    if excluded > 0 {
        log::warn!("{excluded} verdicts had no gold label and were excluded");
    }
    let matrix = confusion(&pairs)?;
    let rendered = render_matrix(&matrix, ctx.format)?;
    print!("{rendered}");

    let path = ctx.out_dir.join("report.txt");
    let mut file = File::create(&path)?;
    file.write_all(render_matrix(&matrix, ReportFormat::Text)?.as_bytes())?;
    log::info!("wrote report to {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    #[test]
    fn cli_parses_every_subcommand() {
        for args in [
            vec!["scr-triage", "gen", "--n", "50", "--safety-fraction", "0.2"],
            vec!["scr-triage", "stats", "--corpus", "c.jsonl"],
            vec![
                "scr-triage",
                "embed",
                "--corpus",
                "c.jsonl",
                "--dimension",
                "32",
            ],
            vec!["scr-triage", "knn", "--corpus", "c.jsonl", "--k", "3"],
            vec![
                "scr-triage",
                "classify",
                "--corpus",
                "c.jsonl",
                "--prompt",
                "P5",
            ],
            vec![
                "scr-triage",
                "sweep",
                "--corpus",
                "c.jsonl",
                "--objective",
                "max-f1",
            ],
            vec![
                "scr-triage",
                "project",
                "--corpus",
                "c.jsonl",
                "--perplexity",
                "10",
            ],
            vec![
                "scr-triage",
                "report",
                "--corpus",
                "c.jsonl",
                "--threshold",
                "70",
            ],
        ] {
            Cli::try_parse_from(&args).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
    }

    #[test]
    fn global_flags_parse_after_subcommand() {
        let cli = Cli::try_parse_from([
            "scr-triage",
            "stats",
            "--corpus",
            "c.jsonl",
            "--seed",
            "7",
            "--out-dir",
            "tmp",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(7));
        assert_eq!(cli.out_dir.as_deref(), Some(Path::new("tmp")));
    }

    #[test]
    fn unknown_subcommand_is_rejected() {
        assert!(Cli::try_parse_from(["scr-triage", "frobnicate"]).is_err());
    }
}
