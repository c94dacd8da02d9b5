//! Chat-client abstraction plus deterministic stand-ins: a keyword-scored
//! mock, a scripted-response client, a closure adapter, and a call-counting
//! wrapper.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::prompts::{RenderedPrompt, ResponseSchema};
use crate::runner::parse::format_response;
use crate::runner::{Flag, RunnerError};

/// Failure to obtain any response text. `retryable` distinguishes transient
/// conditions (network, rate limits, server errors) from permanent ones
/// (bad credentials, malformed protocol).
#[derive(Debug, Clone, Error)]
#[error("{message}")]
pub struct ChatError {
    pub message: String,
    pub retryable: bool,
}

impl ChatError {
    pub fn transient(message: impl Into<String>) -> ChatError {
        ChatError {
            message: message.into(),
            retryable: true,
        }
    }

    pub fn permanent(message: impl Into<String>) -> ChatError {
        ChatError {
            message: message.into(),
            retryable: false,
        }
    }
}

/// A synchronous chat-completion backend. Implementations must be safe for
/// concurrent calls; `run_batch` invokes them from multiple workers.
pub trait ChatClient: Send + Sync {
    /// Returns the raw response text for one rendered prompt.
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String, ChatError>;
}

/// Default keyword rules for `MockChatClient`, tuned to the synthetic corpus
/// templates: every safety template hits a keyword scoring ≥ 58, every
/// non-safety template one scoring ≤ 22, and no score is a multiple of 5.
pub const DEFAULT_MOCK_RULES: &[(&str, f64)] = &[
    ("injur", 88.0),
    ("cut", 74.0),
    ("fumes", 81.0),
    ("ladder", 66.0),
    ("burn", 92.0),
    ("hazard", 83.0),
    ("scaffolding", 96.0),
    ("dizziness", 71.0),
    ("forklift", 58.0),
    ("vibration", 22.0),
    ("seepage", 18.0),
    ("failed", 16.0),
    ("deferred", 13.0),
    ("overdue", 11.0),
    ("delayed", 9.0),
    ("procurement", 8.0),
    ("mismatch", 7.0),
    ("rescheduled", 6.0),
    ("documentation", 4.0),
];

/// Deterministic stand-in for a hosted model: scores a record as the maximum
/// over matched keyword rules (0 if none match, percent scale), answers Y
/// iff that score reaches 50, and emits well-formed JSON for its schema.
/// Keyword matching is case-insensitive substring containment on the user
/// message.
#[derive(Debug, Clone)]
pub struct MockChatClient {
    rules: Vec<(String, f64)>,
    schema: ResponseSchema,
}

impl MockChatClient {
    /// `rules` maps keyword → percent score and must be non-empty.
    pub fn new(
        rules: Vec<(String, f64)>,
        schema: ResponseSchema,
    ) -> Result<MockChatClient, RunnerError> {
        if rules.is_empty() {
            return Err(RunnerError::Config(
                "mock client needs at least one rule".to_string(),
            ));
        }
        let rules = rules
            .into_iter()
            .map(|(keyword, score)| (keyword.to_lowercase(), score))
            .collect();
        Ok(MockChatClient { rules, schema })
    }

    /// Mock wired with `DEFAULT_MOCK_RULES`.
    pub fn with_default_rules(schema: ResponseSchema) -> MockChatClient {
        let rules = DEFAULT_MOCK_RULES
            .iter()
            .map(|(keyword, score)| (keyword.to_string(), *score))
            .collect();
        MockChatClient::new(rules, schema).expect("default rules are non-empty")
    }

    /// Percent-scale score the mock assigns to a text.
    pub fn score_text(&self, text: &str) -> f64 {
        let lowered = text.to_lowercase();
        self.rules
            .iter()
            .filter(|(keyword, _)| lowered.contains(keyword))
            .map(|(_, score)| *score)
            .fold(0.0, f64::max)
    }
}

impl ChatClient for MockChatClient {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String, ChatError> {
        let percent = self.score_text(&prompt.user);
        let flag = if percent >= 50.0 { Flag::Yes } else { Flag::No };
        let score = match self.schema {
            ResponseSchema::YesNo => None,
            ResponseSchema::ScoreUnitYesNo => Some(percent / 100.0),
            ResponseSchema::ScorePercentYesNo => Some(percent),
        };
        Ok(format_response(flag, score))
    }
}

/// Replays a fixed sequence of responses; calls beyond the script fail
/// permanently. Intended for retry-path tests.
pub struct ScriptedChatClient {
    responses: Mutex<VecDeque<Result<String, ChatError>>>,
}

impl ScriptedChatClient {
    pub fn new(responses: Vec<Result<String, ChatError>>) -> ScriptedChatClient {
        ScriptedChatClient {
            responses: Mutex::new(responses.into()),
        }
    }

    /// Convenience constructor: every entry is a successful raw response.
    pub fn replying(responses: &[&str]) -> ScriptedChatClient {
        ScriptedChatClient::new(responses.iter().map(|r| Ok(r.to_string())).collect())
    }
}

impl ChatClient for ScriptedChatClient {
    fn complete(&self, _prompt: &RenderedPrompt) -> Result<String, ChatError> {
        self.responses
            .lock()
            .expect("script lock")
            .pop_front()
            .unwrap_or_else(|| Err(ChatError::permanent("script exhausted")))
    }
}

/// Adapts a closure into a `ChatClient`.
pub struct FnChatClient<F>(pub F);

impl<F> ChatClient for FnChatClient<F>
where
    F: Fn(&RenderedPrompt) -> Result<String, ChatError> + Send + Sync,
{
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String, ChatError> {
        (self.0)(prompt)
    }
}

/// Counts how many times the wrapped client is invoked; used to assert
/// call-budget contracts (override short-circuits, cache hits, retries).
pub struct CountingChatClient<C> {
    inner: C,
    calls: AtomicU64,
}

impl<C> CountingChatClient<C> {
    pub fn new(inner: C) -> CountingChatClient<C> {
        CountingChatClient {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<C: ChatClient> ChatClient for CountingChatClient<C> {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String, ChatError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(prompt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt(user: &str) -> RenderedPrompt {
        RenderedPrompt {
            system: "system".to_string(),
            user: user.to_string(),
        }
    }

    #[test]
    fn mock_takes_max_over_matched_rules() {
        let client = MockChatClient::new(
            vec![("injured".to_string(), 90.0), ("hazard".to_string(), 70.0)],
            ResponseSchema::ScorePercentYesNo,
        )
        .unwrap();
        let raw = client
            .complete(&prompt("worker injured by hazard"))
            .unwrap();
        assert_eq!(raw, "{\"safety score\": 90, \"safety\": \"Y\"}");
    }

    #[test]
    fn mock_defaults_to_zero_and_flag_n() {
        let client = MockChatClient::new(
            vec![("injured".to_string(), 90.0)],
            ResponseSchema::ScorePercentYesNo,
        )
        .unwrap();
        let raw = client
            .complete(&prompt("routine paperwork update"))
            .unwrap();
        assert_eq!(raw, "{\"safety score\": 0, \"safety\": \"N\"}");
    }

    #[test]
    fn mock_is_deterministic() {
        let client = MockChatClient::with_default_rules(ResponseSchema::ScorePercentYesNo);
        let p = prompt("worker slipped near the ladder");
        assert_eq!(client.complete(&p).unwrap(), client.complete(&p).unwrap());
    }

    #[test]
    fn mock_schema_controls_payload_shape() {
        let text = prompt("burn reported");
        let yn = MockChatClient::with_default_rules(ResponseSchema::YesNo);
        assert_eq!(yn.complete(&text).unwrap(), "{\"safety\": \"Y\"}");
        let unit = MockChatClient::with_default_rules(ResponseSchema::ScoreUnitYesNo);
        assert_eq!(
            unit.complete(&text).unwrap(),
            "{\"safety score\": 0.92, \"safety\": \"Y\"}"
        );
    }

    #[test]
    fn mock_matching_is_case_insensitive() {
        let client = MockChatClient::new(
            vec![("JHSC".to_string(), 90.0)],
            ResponseSchema::ScorePercentYesNo,
        )
        .unwrap();
        assert_eq!(client.score_text("raised at the jhsc meeting"), 90.0);
    }

    #[test]
    fn mock_rejects_empty_rules() {
        assert!(MockChatClient::new(Vec::new(), ResponseSchema::YesNo).is_err());
    }

    #[test]
    fn default_rules_cover_both_score_bands() {
        let client = MockChatClient::with_default_rules(ResponseSchema::ScorePercentYesNo);
        assert!(client.score_text("worker sustained a minor injury") >= 50.0);
        assert!(client.score_text("elevated vibration readings") < 50.0);
        for (_, score) in DEFAULT_MOCK_RULES {
            assert!(
                (score / 5.0 - (score / 5.0).round()).abs() > 1e-9,
                "rule score {score} is a multiple of 5"
            );
        }
    }

    #[test]
    fn scripted_client_replays_in_order_then_fails() {
        let client = ScriptedChatClient::replying(&["first", "second"]);
        let p = prompt("anything");
        assert_eq!(client.complete(&p).unwrap(), "first");
        assert_eq!(client.complete(&p).unwrap(), "second");
        let err = client.complete(&p).unwrap_err();
        assert!(!err.retryable);
    }

    #[test]
    fn counting_client_counts() {
        let client = CountingChatClient::new(ScriptedChatClient::replying(&["a", "b"]));
        let p = prompt("x");
        assert_eq!(client.calls(), 0);
        client.complete(&p).unwrap();
        client.complete(&p).unwrap();
        assert_eq!(client.calls(), 2);
    }

    #[test]
    fn fn_client_delegates() {
        let client = FnChatClient(|p: &RenderedPrompt| Ok(format!("echo {}", p.user)));
        assert_eq!(client.complete(&prompt("hi")).unwrap(), "echo hi");
    }
}
