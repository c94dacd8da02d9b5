//! Station condition record (SCR) datasets: loading, validation, summary
//! statistics, and a deterministic synthetic-corpus generator for testing.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ground-truth safety classification of a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "safety")]
    Safety,
    #[serde(rename = "non_safety")]
    NonSafety,
}

impl Label {
    /// Parses a label value; accepted values are `safety` and `non_safety`,
    /// case-insensitive.
    pub fn parse(s: &str) -> Result<Label, CorpusError> {
        match s.to_ascii_lowercase().as_str() {
            "safety" => Ok(Label::Safety),
            "non_safety" => Ok(Label::NonSafety),
            other => Err(CorpusError::BadLabel(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Safety => "safety",
            Label::NonSafety => "non_safety",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One station condition record. `text` holds the pre-concatenated report
/// fields; `label` is the human classification when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing, skip_deserializing)]
    pub token_count: Option<u32>,
}

impl ScrRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> ScrRecord {
        ScrRecord {
            id: id.into(),
            text: text.into(),
            label,
            token_count: None,
        }
    }
}

/// Summary statistics over a corpus's token counts and labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub count: usize,
    pub min_tokens: u32,
    pub max_tokens: u32,
    pub mean_tokens: f64,
    pub median_tokens: f64,
    pub class_counts: BTreeMap<Label, usize>,
}

/// On-disk corpus layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("duplicate record id {id:?} at lines {first} and {second}")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },
    #[error("unknown label value {0:?} (expected \"safety\" or \"non_safety\")")]
    BadLabel(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("safety_fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("synthetic corpus needs n >= 10, got {0}")]
    TooSmall(usize),
    #[error("CSV is missing required column {0:?}")]
    MissingColumn(String),
}

/// Token counting backend. The reference counter is [`ApproxTokenizer`];
/// callers with an exact tokenizer plug it in through this trait.
pub trait Tokenizer {
    fn count_tokens(&self, text: &str) -> u32;
}

/// Byte-length approximation: `ceil(bytes / 4)`. Length statistics are
/// diagnostic, so a model-exact tokenizer is not required.
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxTokenizer;

impl Tokenizer for ApproxTokenizer {
    fn count_tokens(&self, text: &str) -> u32 {
        text.len().div_ceil(4) as u32
    }
}

/// Counts whitespace-separated words; handy as an injected exact tokenizer
/// in tests and offline experiments.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn count_tokens(&self, text: &str) -> u32 {
        text.split_whitespace().count() as u32
    }
}

fn validate_and_push(
    records: &mut Vec<ScrRecord>,
    seen: &mut HashMap<String, usize>,
    record: ScrRecord,
    line: usize,
) -> Result<(), CorpusError> {
    if record.text.trim().is_empty() {
        return Err(CorpusError::MalformedRow {
            line,
            reason: "text is empty".into(),
        });
    }
    if let Some(&first) = seen.get(&record.id) {
        return Err(CorpusError::DuplicateId {
            id: record.id,
            first,
            second: line,
        });
    }
    seen.insert(record.id.clone(), line);
    records.push(record);
    Ok(())
}

/// Loads a corpus from JSONL (one object per line, keys `id`/`text`/`label`)
/// or CSV (header row with the same column names, RFC 4180 quoting).
/// Records come back in file order; duplicate ids and empty texts are rejected.
pub fn load_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<Vec<ScrRecord>, CorpusError> {
    let path = path.as_ref();
    match format {
        CorpusFormat::Jsonl => load_jsonl(path),
        CorpusFormat::Csv => load_csv(path, "id", &["text"], Some("label")),
    }
}

/// Picks the corpus format from the file extension (`.csv` is CSV, anything
/// else is JSONL).
pub fn format_for_path(path: impl AsRef<Path>) -> CorpusFormat {
    match path.as_ref().extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
        _ => CorpusFormat::Jsonl,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn load_jsonl(path: &Path) -> Result<Vec<ScrRecord>, CorpusError> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        text: String,
        #[serde(default)]
        label: Option<String>,
    }

    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut seen = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRow {
            line: line_no,
            reason: e.to_string(),
        })?;
        let label = match row.label {
            Some(s) => Some(Label::parse(&s).map_err(|e| CorpusError::MalformedRow {
                line: line_no,
                reason: e.to_string(),
            })?),
            None => None,
        };
        let record = ScrRecord::new(row.id, row.text, label);
        validate_and_push(&mut records, &mut seen, record, line_no)?;
    }
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(records)
}

/// Loads a CSV corpus, joining the named text columns with `\n` into the
/// record text. `load_corpus` uses the single-column form (`text`); ingest
/// pipelines with split source fields pass several columns here.
pub fn load_csv(
    path: &Path,
    id_column: &str,
    text_columns: &[&str],
    label_column: Option<&str>,
) -> Result<Vec<ScrRecord>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let col_index = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let id_idx = col_index(id_column)?;
    let text_idxs = text_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<Vec<_>, _>>()?;
    let label_idx = match label_column {
        Some(name) => headers.iter().position(|h| h == name),
        None => None,
    };

    let mut records = Vec::new();
    let mut seen = HashMap::new();
    for (idx, row) in reader.records().enumerate() {
        // Header is line 1.
        let line_no = idx + 2;
        let row = row.map_err(|e| CorpusError::MalformedRow {
            line: line_no,
            reason: e.to_string(),
        })?;
        let field = |i: usize| row.get(i).unwrap_or("").to_string();
        let text = text_idxs
            .iter()
            .map(|&i| field(i))
            .collect::<Vec<_>>()
            .join("\n");
        let label = match label_idx {
            Some(i) => {
                let raw = field(i);
                if raw.trim().is_empty() {
                    None
                } else {
                    Some(
                        Label::parse(raw.trim()).map_err(|e| CorpusError::MalformedRow {
                            line: line_no,
                            reason: e.to_string(),
                        })?,
                    )
                }
            }
            None => None,
        };
        let record = ScrRecord::new(field(id_idx), text, label);
        validate_and_push(&mut records, &mut seen, record, line_no)?;
    }
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(records)
}

/// Writes a corpus in the canonical serialization for `format`. JSONL output
/// round-trips byte-identically through `load_corpus`.
pub fn save_corpus(
    records: &[ScrRecord],
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    match format {
        CorpusFormat::Jsonl => {
            for record in records {
                let line = serde_json::to_string(record).expect("record serialization");
                writeln!(writer, "{line}").map_err(|e| io_err(path, e))?;
            }
        }
        CorpusFormat::Csv => {
            let mut csv_writer = csv::Writer::from_writer(writer);
            csv_writer
                .write_record(["id", "text", "label"])
                .map_err(|e| CorpusError::MalformedRow {
                    line: 1,
                    reason: e.to_string(),
                })?;
            for record in records {
                let label = record.label.map(|l| l.as_str()).unwrap_or("");
                csv_writer
                    .write_record([record.id.as_str(), record.text.as_str(), label])
                    .map_err(|e| CorpusError::MalformedRow {
                        line: 0,
                        reason: e.to_string(),
                    })?;
            }
            csv_writer.flush().map_err(|e| io_err(path, e))?;
            return Ok(());
        }
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// Computes corpus statistics, filling in missing token counts with
/// `tokenizer`. The median of an even-length list is the mean of the two
/// central values.
pub fn compute_stats(
    records: &[ScrRecord],
    tokenizer: &dyn Tokenizer,
) -> Result<CorpusStats, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut counts: Vec<u32> = records
        .iter()
        .map(|r| {
            r.token_count
                .unwrap_or_else(|| tokenizer.count_tokens(&r.text))
        })
        .collect();
    counts.sort_unstable();
    let n = counts.len();
    let sum: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    let median = if n % 2 == 1 {
        f64::from(counts[n / 2])
    } else {
        (f64::from(counts[n / 2 - 1]) + f64::from(counts[n / 2])) / 2.0
    };
    let mut class_counts = BTreeMap::new();
    for record in records {
        if let Some(label) = record.label {
            *class_counts.entry(label).or_insert(0) += 1;
        }
    }
    Ok(CorpusStats {
        count: n,
        min_tokens: counts[0],
        max_tokens: counts[n - 1],
        mean_tokens: sum as f64 / n as f64,
        median_tokens: median,
        class_counts,
    })
}

const SAFETY_EVENTS: &[&str] = &[
    "Worker slipped on {S} near the {A} and sustained a minor injury.",
    "Employee reported a cut on the hand while handling {S} containers in the {A}.",
    "Technician was exposed to {S} fumes during maintenance work in the {A}.",
    "A ladder tipped over in the {A}; the contractor fell and bruised an arm.",
    "Hot piping in the {A} caused a burn to an operator's forearm during rounds.",
    "Trip hazard from loose cabling observed along the {A} walkway.",
    "Falling object from scaffolding in the {A} narrowly missed a worker below.",
    "Operator reported dizziness after working near open {S} drums without ventilation.",
    "Unsecured grating in the {A} created a fall hazard for the night shift crew.",
    "Forklift reversed without a spotter in the {A}, nearly striking an employee.",
];

const NON_SAFETY_EVENTS: &[&str] = &[
    "Scheduled delivery of {E} spares delayed by two weeks due to a vendor backlog.",
    "Pump {E} exhibited elevated vibration readings during routine surveillance.",
    "Inventory count mismatch for {E} gaskets found in the central warehouse.",
    "Preventive maintenance on the {A} compressor deferred to the next outage window.",
    "Software licence renewal for the {E} monitoring system is overdue.",
    "Valve {E} packing shows minor seepage; engineering evaluation requested.",
    "Training session on the revised {E} procedure rescheduled to next month.",
    "Documentation gap found in the {E} work order closure package.",
    "Spare {E} breaker failed acceptance testing and was returned to the supplier.",
    "Lighting upgrade in the {A} administration building awaiting procurement approval.",
];

const AREAS: &[&str] = &[
    "turbine hall",
    "pump house",
    "maintenance shop",
    "warehouse annex",
    "boiler room",
    "loading dock",
    "cooling tower basin",
    "auxiliary bay",
];

const SUBSTANCES: &[&str] = &[
    "hydraulic oil",
    "solvent",
    "resin",
    "coolant",
    "lubricant",
    "degreaser",
];

const EQUIPMENT: &[&str] = &[
    "P-201", "V-114", "C-330", "HX-07", "MOV-52", "B-118", "FW-19",
];

fn fill_template(template: &str, rng: &mut ChaCha8Rng) -> String {
    let mut text = template.to_string();
    while let Some(pos) = text.find("{A}") {
        let choice = AREAS.choose(rng).unwrap();
        text.replace_range(pos..pos + 3, choice);
    }
    while let Some(pos) = text.find("{S}") {
        let choice = SUBSTANCES.choose(rng).unwrap();
        text.replace_range(pos..pos + 3, choice);
    }
    while let Some(pos) = text.find("{E}") {
        let choice = EQUIPMENT.choose(rng).unwrap();
        text.replace_range(pos..pos + 3, choice);
    }
    text
}

/// Generates a deterministic labeled corpus with exactly
/// `round(n * safety_fraction)` SAFETY records. Safety texts come from
/// injury/hazard phrase templates, the rest from equipment/logistics
/// templates; fixed seed gives a byte-identical corpus.
pub fn generate_synthetic_corpus(
    n: usize,
    safety_fraction: f64,
    seed: u64,
) -> Result<Vec<ScrRecord>, CorpusError> {
    if n < 10 {
        return Err(CorpusError::TooSmall(n));
    }
    if !(safety_fraction > 0.0 && safety_fraction < 1.0) {
        return Err(CorpusError::BadFraction(safety_fraction));
    }
    let n_safety = (n as f64 * safety_fraction).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut labels = vec![Label::Safety; n_safety];
    labels.resize(n, Label::NonSafety);
    labels.shuffle(&mut rng);

    let records = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let template = match label {
                Label::Safety => SAFETY_EVENTS.choose(&mut rng).unwrap(),
                Label::NonSafety => NON_SAFETY_EVENTS.choose(&mut rng).unwrap(),
            };
            ScrRecord::new(
                format!("SCR-{:06}", i + 1),
                fill_template(template, &mut rng),
                Some(label),
            )
        })
        .collect();
    Ok(records)
}
