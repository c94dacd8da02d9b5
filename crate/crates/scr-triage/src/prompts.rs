//! Registry of the five versioned classification system prompts, their
//! response schemas, template rendering, and the deterministic committee
//! keyword override.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ScrRecord;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown prompt id {0:?}; valid ids are P1, P2, P3, P4, P5")]
    UnknownId(String),
}

/// Identifier of a registered prompt version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PromptId {
    P1,
    P2,
    P3,
    P4,
    P5,
}

impl PromptId {
    pub const ALL: [PromptId; 5] = [
        PromptId::P1,
        PromptId::P2,
        PromptId::P3,
        PromptId::P4,
        PromptId::P5,
    ];

    pub fn parse(s: &str) -> Result<PromptId, PromptError> {
        match s.to_ascii_uppercase().as_str() {
            "P1" => Ok(PromptId::P1),
            "P2" => Ok(PromptId::P2),
            "P3" => Ok(PromptId::P3),
            "P4" => Ok(PromptId::P4),
            "P5" => Ok(PromptId::P5),
            other => Err(PromptError::UnknownId(other.to_string())),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PromptId::P1 => "P1",
            PromptId::P2 => "P2",
            PromptId::P3 => "P3",
            PromptId::P4 => "P4",
            PromptId::P5 => "P5",
        }
    }
}

impl fmt::Display for PromptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shape of the JSON object a prompt instructs the model to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseSchema {
    /// `{"safety": "Y/N"}`
    YesNo,
    /// `{"safety score": x, "safety": "Y/N"}` with x in [0, 1]
    ScoreUnitYesNo,
    /// `{"safety score": x, "safety": "Y/N"}` with x in [0, 100]
    ScorePercentYesNo,
}

impl ResponseSchema {
    pub fn has_score(&self) -> bool {
        !matches!(self, ResponseSchema::YesNo)
    }

    /// Inclusive score range, when the schema carries one.
    pub fn score_range(&self) -> Option<(f64, f64)> {
        match self {
            ResponseSchema::YesNo => None,
            ResponseSchema::ScoreUnitYesNo => Some((0.0, 1.0)),
            ResponseSchema::ScorePercentYesNo => Some((0.0, 100.0)),
        }
    }
}

/// A versioned system prompt with its expected response schema. The text is
/// compiled in from the fixture files under `prompts/`; the test suite pins
/// each file's SHA-256 so edits are caught.
#[derive(Debug, Clone, Copy)]
pub struct PromptTemplate {
    pub id: PromptId,
    pub system_text: &'static str,
    pub schema: ResponseSchema,
    /// Trigger phrases that force a SAFETY verdict without a model call.
    pub overrides: &'static [&'static str],
}

pub const JHSC_TRIGGERS: &[&str] = &["JHSC", "Joint Health & Safety Committee"];

static TEMPLATES: [PromptTemplate; 5] = [
    PromptTemplate {
        id: PromptId::P1,
        system_text: include_str!("../prompts/p1.txt"),
        schema: ResponseSchema::YesNo,
        overrides: &[],
    },
    PromptTemplate {
        id: PromptId::P2,
        system_text: include_str!("../prompts/p2.txt"),
        schema: ResponseSchema::YesNo,
        overrides: &[],
    },
    PromptTemplate {
        id: PromptId::P3,
        system_text: include_str!("../prompts/p3.txt"),
        schema: ResponseSchema::YesNo,
        overrides: &[],
    },
    PromptTemplate {
        id: PromptId::P4,
        system_text: include_str!("../prompts/p4.txt"),
        schema: ResponseSchema::ScoreUnitYesNo,
        overrides: &[],
    },
    PromptTemplate {
        id: PromptId::P5,
        system_text: include_str!("../prompts/p5.txt"),
        schema: ResponseSchema::ScorePercentYesNo,
        overrides: JHSC_TRIGGERS,
    },
];

/// Returns the registered template for `id`.
pub fn get_template(id: PromptId) -> &'static PromptTemplate {
    &TEMPLATES[id as usize]
}

/// Parses a prompt id string and returns its template; unknown ids report
/// the valid set.
pub fn lookup_template(id: &str) -> Result<&'static PromptTemplate, PromptError> {
    Ok(get_template(PromptId::parse(id)?))
}

/// A prompt ready to send: the template's system text verbatim plus the
/// record text as the user message, with no interpolation or escaping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

pub fn render(template: &PromptTemplate, record: &ScrRecord) -> RenderedPrompt {
    RenderedPrompt {
        system: template.system_text.to_string(),
        user: record.text.clone(),
    }
}

/// Verdict forced by a trigger phrase, bypassing the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcedVerdict {
    /// Pinned to the top of the percent scale.
    pub score: f64,
}

/// Checks the committee rule: under P5, any record mentioning the JHSC
/// acronym (case-sensitive, delimited by non-alphanumerics) or the full
/// committee phrase (case-insensitive, `&` or `and`) is a safety event with
/// score 100. The phrase also remains in the prompt text; this pre-check
/// just removes the dependence on model compliance. `None` for every other
/// template or when no trigger is present.
pub fn keyword_override(template: &PromptTemplate, record: &ScrRecord) -> Option<ForcedVerdict> {
    if template.overrides.is_empty() {
        return None;
    }
    if contains_acronym(&record.text, "JHSC") || contains_committee_phrase(&record.text) {
        return Some(ForcedVerdict { score: 100.0 });
    }
    None
}

/// Case-sensitive whole-word search: a hit must be delimited by
/// non-alphanumeric characters or the string edges.
fn contains_acronym(text: &str, acronym: &str) -> bool {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(pos) = text[start..].find(acronym) {
        let begin = start + pos;
        let end = begin + acronym.len();
        let left_ok = begin == 0 || !bytes[begin - 1].is_ascii_alphanumeric();
        let right_ok = end == bytes.len() || !bytes[end].is_ascii_alphanumeric();
        if left_ok && right_ok {
            return true;
        }
        start = begin + 1;
    }
    false
}

fn contains_committee_phrase(text: &str) -> bool {
    let lowered = text.to_lowercase();
    lowered.contains("joint health & safety committee")
        || lowered.contains("joint health and safety committee")
}
