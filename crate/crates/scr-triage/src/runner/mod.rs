//! Prompt execution: classify records through a chat client with retries,
//! enforce the keyword override before any model call, and run resumable
//! batches under bounded concurrency with a JSONL verdict sink.

pub mod client;
pub mod parse;
pub mod remote;

pub use client::{
    ChatClient, ChatError, CountingChatClient, FnChatClient, MockChatClient, ScriptedChatClient,
    DEFAULT_MOCK_RULES,
};
pub use parse::{format_response, parse_response};
pub use remote::RemoteChatClient;

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Label, ScrRecord};
use crate::prompts::{keyword_override, render, PromptId, PromptTemplate};
use crate::retry::RetryPolicy;

/// Binary safety verdict flag, serialized as `"Y"` / `"N"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flag {
    #[serde(rename = "Y")]
    Yes,
    #[serde(rename = "N")]
    No,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::Yes => "Y",
            Flag::No => "N",
        }
    }

    pub fn to_label(self) -> Label {
        match self {
            Flag::Yes => Label::Safety,
            Flag::No => Label::NonSafety,
        }
    }
}

/// One classified record. Serialized field order matches the sink schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmVerdict {
    pub record_id: String,
    pub prompt_id: PromptId,
    pub flag: Flag,
    /// Unit scale under P4, percent scale under P5, absent for yes/no
    /// prompts. Stored verbatim even when it disagrees with the flag.
    pub score: Option<f64>,
    pub attempts: u32,
    pub forced_by_override: bool,
    pub raw_text: String,
}

impl LlmVerdict {
    /// Predicted label: thresholded score when both are available (score
    /// supersedes the flag — that is what scores are for), the flag
    /// otherwise.
    pub fn predicted_label(&self, threshold: Option<f64>) -> Label {
        match (threshold, self.score) {
            (Some(threshold), Some(score)) => {
                if score >= threshold {
                    Label::Safety
                } else {
                    Label::NonSafety
                }
            }
            _ => self.flag.to_label(),
        }
    }
}

/// Why a single response could not be turned into a verdict. Both cases are
/// retryable: the next attempt may produce compliant output.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("no JSON object found in model response")]
    ParseError,
    #[error("schema violation: {0}")]
    SchemaError(String),
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(
        "classification of record {record_id} failed after {attempts} attempt(s): {last_error}"
    )]
    ClassificationFailure {
        record_id: String,
        attempts: u32,
        last_error: String,
        /// Last raw response seen, empty if no response was ever received.
        raw_text: String,
    },
    #[error("missing API key: environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("invalid runner configuration: {0}")]
    Config(String),
    #[error("verdict sink failure: {0}")]
    Sink(#[from] io::Error),
}

/// Outcome accounting for one `run_batch` call. `total` covers every
/// requested record including ones already present from earlier runs;
/// `failed` counts only this run's exhausted records, so
/// `total = succeeded + failed` holds across resumes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRunReport {
    pub total: u64,
    pub succeeded: u64,
    pub failed: u64,
    pub overridden: u64,
    /// (record id, final error) for each failure this run.
    pub failures: Vec<(String, String)>,
}

/// Append-only JSONL verdict store providing batch resumability: records
/// whose ids are already present are skipped on the next run. Every append
/// is flushed so a crash loses at most the line being written; unparseable
/// (truncated) lines are ignored on load and dropped by the next sort.
pub struct JsonlSink {
    path: PathBuf,
    writer: BufWriter<File>,
    seen: HashSet<String>,
}

impl JsonlSink {
    /// Opens (creating if needed) a sink file and indexes the ids already in
    /// it.
    pub fn open(path: impl Into<PathBuf>) -> io::Result<JsonlSink> {
        let path = path.into();
        let mut seen = HashSet::new();
        let mut unterminated_tail = false;
        match std::fs::read(&path) {
            Ok(bytes) => {
                for line in String::from_utf8_lossy(&bytes).lines() {
                    if let Ok(verdict) = serde_json::from_str::<LlmVerdict>(line) {
                        seen.insert(verdict.record_id);
                    }
                }
                unterminated_tail = bytes.last().is_some_and(|&b| b != b'\n');
            }
            Err(error) if error.kind() == io::ErrorKind::NotFound => {}
            Err(error) => return Err(error),
        }
        let mut writer = BufWriter::new(OpenOptions::new().create(true).append(true).open(&path)?);
        if unterminated_tail {
            // Seal a truncated line from an interrupted write so the next
            // append starts on a fresh line instead of merging into it.
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
        Ok(JsonlSink { path, writer, seen })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, record_id: &str) -> bool {
        self.seen.contains(record_id)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    /// Appends one verdict and flushes it to disk.
    pub fn append(&mut self, verdict: &LlmVerdict) -> io::Result<()> {
        let line = serde_json::to_string(verdict)?;
        self.writer.write_all(line.as_bytes())?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()?;
        self.seen.insert(verdict.record_id.clone());
        Ok(())
    }

    /// Rewrites the sink sorted by record id (later duplicates win, corrupt
    /// lines dropped) and returns the sorted verdicts. The rewrite goes
    /// through a temporary file and an atomic rename.
    pub fn finalize(&mut self) -> io::Result<Vec<LlmVerdict>> {
        self.writer.flush()?;
        let bytes = std::fs::read(&self.path)?;
        let text = String::from_utf8_lossy(&bytes);
        let mut by_id: BTreeMap<String, LlmVerdict> = BTreeMap::new();
        for line in text.lines() {
            if let Ok(verdict) = serde_json::from_str::<LlmVerdict>(line) {
                by_id.insert(verdict.record_id.clone(), verdict);
            }
        }
        let tmp_path = self.path.with_extension("jsonl.tmp");
        {
            let mut tmp = BufWriter::new(File::create(&tmp_path)?);
            for verdict in by_id.values() {
                tmp.write_all(serde_json::to_string(verdict)?.as_bytes())?;
                tmp.write_all(b"\n")?;
            }
            tmp.flush()?;
        }
        std::fs::rename(&tmp_path, &self.path)?;
        // The old append handle points at the replaced inode; reopen.
        self.writer = BufWriter::new(OpenOptions::new().append(true).open(&self.path)?);
        self.seen = by_id.keys().cloned().collect();
        Ok(by_id.into_values().collect())
    }

    /// Loads the sink's parseable verdicts in file order without rewriting.
    pub fn load(path: impl AsRef<Path>) -> io::Result<Vec<LlmVerdict>> {
        let bytes = std::fs::read(path)?;
        Ok(String::from_utf8_lossy(&bytes)
            .lines()
            .filter_map(|line| serde_json::from_str(line).ok())
            .collect())
    }
}

/// Classifies one record: the keyword override short-circuits (one recorded
/// attempt, no client call); otherwise the prompt is sent and the response
/// parsed, retrying with exponential backoff on transient client errors and
/// on parse/schema failures.
pub fn classify_record(
    record: &ScrRecord,
    template: &PromptTemplate,
    client: &dyn ChatClient,
    policy: &RetryPolicy,
) -> Result<LlmVerdict, RunnerError> {
    if policy.max_attempts < 1 {
        return Err(RunnerError::Config(
            "retry policy needs max_attempts >= 1".to_string(),
        ));
    }
    if let Some(forced) = keyword_override(template, record) {
        return Ok(LlmVerdict {
            record_id: record.id.clone(),
            prompt_id: template.id,
            flag: Flag::Yes,
            score: template.schema.has_score().then_some(forced.score),
            attempts: 1,
            forced_by_override: true,
            raw_text: String::new(),
        });
    }

    let prompt = render(template, record);
    let mut last_error = String::new();
    let mut last_raw = String::new();
    for attempt in 1..=policy.max_attempts {
        match client.complete(&prompt) {
            Ok(raw) => match parse_response(&raw, template.schema) {
                Ok((flag, score)) => {
                    return Ok(LlmVerdict {
                        record_id: record.id.clone(),
                        prompt_id: template.id,
                        flag,
                        score,
                        attempts: attempt,
                        forced_by_override: false,
                        raw_text: raw,
                    });
                }
                Err(failure) => {
                    last_error = failure.to_string();
                    last_raw = raw;
                }
            },
            Err(chat_error) => {
                last_error = chat_error.message.clone();
                if !chat_error.retryable {
                    return Err(RunnerError::ClassificationFailure {
                        record_id: record.id.clone(),
                        attempts: attempt,
                        last_error,
                        raw_text: last_raw,
                    });
                }
            }
        }
        if attempt < policy.max_attempts {
            policy.wait_after(attempt);
        }
    }
    Err(RunnerError::ClassificationFailure {
        record_id: record.id.clone(),
        attempts: policy.max_attempts,
        last_error,
        raw_text: last_raw,
    })
}

/// Runs a batch with at most `concurrency` in-flight classifications.
/// Verdicts are appended (and flushed) to the sink as they complete; records
/// already present in the sink are skipped, making interrupted batches
/// resumable. The report phase rewrites the sink sorted by record id. A sink
/// write failure aborts the batch but preserves everything already appended.
pub fn run_batch(
    records: &[ScrRecord],
    template: &PromptTemplate,
    client: &dyn ChatClient,
    policy: &RetryPolicy,
    concurrency: usize,
    sink: &mut JsonlSink,
) -> Result<BatchRunReport, RunnerError> {
    if concurrency < 1 {
        return Err(RunnerError::Config(
            "concurrency must be at least 1".to_string(),
        ));
    }
    let pending: Vec<&ScrRecord> = records.iter().filter(|r| !sink.contains(&r.id)).collect();

    let mut failures: Vec<(String, String)> = Vec::new();
    let mut sink_error: Option<io::Error> = None;
    {
        let cursor = AtomicUsize::new(0);
        let stop = AtomicBool::new(false);
        let cursor = &cursor;
        let stop = &stop;
        let pending = &pending;
        let (sender, receiver) = mpsc::channel::<Result<LlmVerdict, RunnerError>>();
        thread::scope(|scope| {
            let workers = concurrency.min(pending.len().max(1));
            for _ in 0..workers {
                let sender = sender.clone();
                scope.spawn(move || loop {
                    if stop.load(Ordering::Relaxed) {
                        break;
                    }
                    let index = cursor.fetch_add(1, Ordering::Relaxed);
                    let Some(record) = pending.get(index) else {
                        break;
                    };
                    let result = classify_record(record, template, client, policy);
                    if sender.send(result).is_err() {
                        break;
                    }
                });
            }
            drop(sender);
            while let Ok(result) = receiver.recv() {
                match result {
                    Ok(verdict) => {
                        if let Err(error) = sink.append(&verdict) {
                            stop.store(true, Ordering::Relaxed);
                            sink_error = Some(error);
                            break;
                        }
                    }
                    Err(RunnerError::ClassificationFailure {
                        record_id,
                        attempts,
                        last_error,
                        ..
                    }) => {
                        failures.push((
                            record_id,
                            format!("{last_error} (after {attempts} attempt(s))"),
                        ));
                    }
                    Err(other) => {
                        // Non-classification errors are fatal to the batch.
                        stop.store(true, Ordering::Relaxed);
                        failures.push(("<batch>".to_string(), other.to_string()));
                        break;
                    }
                }
            }
        });
    }
    if let Some(error) = sink_error {
        return Err(RunnerError::Sink(error));
    }

    let sorted = sink.finalize()?;
    let requested: HashSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    let mut succeeded = 0u64;
    let mut overridden = 0u64;
    for verdict in &sorted {
        if requested.contains(verdict.record_id.as_str()) {
            succeeded += 1;
            if verdict.forced_by_override {
                overridden += 1;
            }
        }
    }
    failures.sort();
    Ok(BatchRunReport {
        total: records.len() as u64,
        succeeded,
        failed: failures.len() as u64,
        overridden,
        failures,
    })
}
