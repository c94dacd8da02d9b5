//! Verdict extraction: pull the first balanced, parseable JSON object out of
//! a raw model response and validate it against the prompt's schema.

use serde_json::Value;

use crate::prompts::ResponseSchema;
use crate::runner::{Flag, ParseFailure};

/// Parses a raw response into `(flag, score)` under `schema`. The response
/// may surround the JSON with prose; the first balanced `{...}` substring
/// that parses as a JSON object is used. Keys beyond the schema's are
/// ignored (and a stray score under a yes/no schema is dropped).
pub fn parse_response(
    raw: &str,
    schema: ResponseSchema,
) -> Result<(Flag, Option<f64>), ParseFailure> {
    let object = extract_json_object(raw).ok_or(ParseFailure::ParseError)?;
    let map = object.as_object().expect("extractor only returns objects");

    let flag_value = map
        .get("safety")
        .ok_or_else(|| ParseFailure::SchemaError("missing key \"safety\"".to_string()))?;
    let flag_text = flag_value.as_str().ok_or_else(|| {
        ParseFailure::SchemaError(format!("\"safety\" must be a string, got {flag_value}"))
    })?;
    let flag = match flag_text.to_ascii_lowercase().as_str() {
        "y" => Flag::Yes,
        "n" => Flag::No,
        other => {
            return Err(ParseFailure::SchemaError(format!(
                "\"safety\" must be \"Y\" or \"N\", got {other:?}"
            )))
        }
    };

    let score = match schema.score_range() {
        None => None,
        Some((min, max)) => {
            let score_value = map.get("safety score").ok_or_else(|| {
                ParseFailure::SchemaError("missing key \"safety score\"".to_string())
            })?;
            let score = score_value.as_f64().ok_or_else(|| {
                ParseFailure::SchemaError(format!(
                    "\"safety score\" must be numeric, got {score_value}"
                ))
            })?;
            if !(score >= min && score <= max) {
                return Err(ParseFailure::SchemaError(format!(
                    "\"safety score\" {score} is outside [{min}, {max}]"
                )));
            }
            Some(score)
        }
    };
    Ok((flag, score))
}

/// Renders a verdict pair back into the wire format the prompts request.
/// `parse_response` round-trips anything this produces.
pub fn format_response(flag: Flag, score: Option<f64>) -> String {
    match score {
        Some(score) => format!(
            "{{\"safety score\": {score}, \"safety\": \"{}\"}}",
            flag.as_str()
        ),
        None => format!("{{\"safety\": \"{}\"}}", flag.as_str()),
    }
}

/// First balanced `{...}` substring that parses as a JSON object. The brace
/// scan is string-aware so braces inside JSON strings do not confuse it; an
/// unparseable balanced span is skipped and the scan resumes at the next
/// opening brace (which finds objects nested inside malformed wrappers).
fn extract_json_object(raw: &str) -> Option<Value> {
    let bytes = raw.as_bytes();
    for (start, &byte) in bytes.iter().enumerate() {
        if byte != b'{' {
            continue;
        }
        if let Some(end) = balanced_end(bytes, start) {
            if let Ok(value) = serde_json::from_str::<Value>(&raw[start..=end]) {
                if value.is_object() {
                    return Some(value);
                }
            }
        }
    }
    None
}

/// Index of the `}` closing the object opened at `start`, if balanced.
fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0u32;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &byte) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if byte == b'\\' {
                escaped = true;
            } else if byte == b'"' {
                in_string = false;
            }
            continue;
        }
        match byte {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + offset);
                }
            }
            _ => {}
        }
    }
    None
}
