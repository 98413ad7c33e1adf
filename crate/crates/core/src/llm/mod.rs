//! Prompt assembly, providers and the validate-and-repair generation loop.

mod mock;
mod prompt;
mod provider;

pub use mock::{FailingProvider, MockProvider, ScriptedProvider};
pub use prompt::{
    build_followup_prompt, build_init_prompt, dataset_digest, format_instructions, Directive,
    PromptBundle,
};
pub use provider::{
    ChatMessage, CompletionRequest, Provider, ProviderError, ProviderKind, RemoteProvider, Role,
};

use serde_json::Value;
use thiserror::Error;

use crate::narrative::{
    NarrativeDocument, ValidationError, ValidationErrorKind, ValidationErrors, Validator,
};

/// Repair attempts after the first call.
pub const DEFAULT_MAX_RETRIES: u32 = 2;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("no valid response after {attempts} attempts: {errors}")]
    Failure {
        attempts: u32,
        errors: ValidationErrors,
    },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// A validated provider answer.
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub document: NarrativeDocument,
    pub raw_text: String,
    pub attempts: u32,
    pub provider: ProviderKind,
}

/// Parses the outermost JSON object in `raw`, tolerating prose or code
/// fences around it.
pub fn extract_json(raw: &str) -> Result<Value, ValidationErrors> {
    let not_json = |detail: String| {
        ValidationErrors(vec![ValidationError {
            path: "$".to_string(),
            kind: ValidationErrorKind::NotJson,
            detail,
        }])
    };
    if let Ok(v) = serde_json::from_str::<Value>(raw.trim()) {
        return Ok(v);
    }
    let (start, end) = match (raw.find('{'), raw.rfind('}')) {
        (Some(s), Some(e)) if s < e => (s, e),
        _ => return Err(not_json("no JSON object in response".to_string())),
    };
    serde_json::from_str(&raw[start..=end]).map_err(|e| not_json(e.to_string()))
}

fn repair_message(errors: &ValidationErrors) -> String {
    let mut out = String::from(
        "Your previous reply was rejected. Fix these problems and reply with the corrected JSON object only:\n",
    );
    for e in errors.iter() {
        out.push_str(&format!("- {e}\n"));
    }
    out
}

/// Calls the provider until a response validates, at most
/// `max_retries + 1` times. Each retry sees the rejected reply and the
/// validator's errors. Provider errors abort immediately.
pub fn generate(
    bundle: &PromptBundle,
    validator: &Validator<'_>,
    provider: &dyn Provider,
    max_retries: u32,
) -> Result<Generation, LlmError> {
    let fixture_key = bundle.fixture_key();
    let mut messages = bundle.to_messages();
    let mut last_errors = ValidationErrors(Vec::new());
    for attempt in 1..=max_retries + 1 {
        let raw = provider.complete(&CompletionRequest {
            messages: messages.clone(),
            fixture_key: fixture_key.clone(),
            attempt,
        })?;
        match extract_json(&raw).and_then(|v| validator.validate(&v)) {
            Ok(document) => {
                return Ok(Generation {
                    document,
                    raw_text: raw,
                    attempts: attempt,
                    provider: provider.kind(),
                })
            }
            Err(errors) => {
                messages.push(ChatMessage::new(Role::Assistant, raw));
                messages.push(ChatMessage::new(Role::User, repair_message(&errors)));
                last_errors = errors;
            }
        }
    }
    Err(LlmError::Failure {
        attempts: max_retries + 1,
        errors: last_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::testing::seattle;
    use crate::narrative::SemanticLevel;

    const GOOD: &str = r#"{"paragraphs":[{"sentences":[{"items":[
        {"kind":"leaf","text":"Prices rise with size.","layer":3,"fields":["avg_price","avg_house_size"]}
    ]}]}]}"#;
    const BAD_LEVEL: &str = r#"{"paragraphs":[{"sentences":[{"items":[
        {"kind":"leaf","text":"Prices rise with size.","layer":7,"fields":["avg_price"]}
    ]}]}]}"#;

    fn bundle() -> PromptBundle {
        PromptBundle {
            dataset_digest: "digest".into(),
            dataset_description: "d".into(),
            goal: "g".into(),
            format_instructions: "f".into(),
            history: Vec::new(),
            directive: None,
        }
    }

    #[test]
    fn extract_handles_fences() {
        let v = extract_json("Here you go:\n```json\n{\"a\": 1}\n```").unwrap();
        assert_eq!(v["a"], 1);
        let err = extract_json("sorry, no").unwrap_err();
        assert_eq!(err.0[0].kind, ValidationErrorKind::NotJson);
    }

    #[test]
    fn repair_then_success() {
        let ds = seattle();
        let provider = ScriptedProvider::new([BAD_LEVEL, GOOD]);
        let gen = generate(&bundle(), &Validator::new(&ds), &provider, 2).unwrap();
        assert_eq!(gen.attempts, 2);
        assert_eq!(gen.document.leaf_count(), 1);
        let requests = provider.requests();
        let last = &requests[1].messages;
        assert_eq!(last[last.len() - 2].content, BAD_LEVEL);
        assert!(last[last.len() - 1].content.contains("$.paragraphs[0].sentences[0].items[0].layer"));
    }

    #[test]
    fn gives_up_after_bound() {
        let ds = seattle();
        let provider = ScriptedProvider::new(["nope", "nope", "nope", GOOD]);
        match generate(&bundle(), &Validator::new(&ds), &provider, 2) {
            Err(LlmError::Failure { attempts, errors }) => {
                assert_eq!(attempts, 3);
                assert_eq!(errors.0[0].kind, ValidationErrorKind::NotJson);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(provider.call_count(), 3);
    }

    #[test]
    fn level_restriction_is_enforced() {
        let ds = seattle();
        let v = Validator::new(&ds).with_allowed_levels(&[SemanticLevel::L1, SemanticLevel::L2]);
        let provider = ScriptedProvider::new([GOOD]);
        assert!(matches!(generate(&bundle(), &v, &provider, 0), Err(LlmError::Failure { attempts: 1, .. })));
    }

    #[test]
    fn provider_errors_are_not_retried() {
        let ds = seattle();
        let provider = FailingProvider::new(ProviderError::Transport("down".into()));
        assert!(matches!(
            generate(&bundle(), &Validator::new(&ds), &provider, 2),
            Err(LlmError::Provider(ProviderError::Transport(_)))
        ));
        assert_eq!(provider.call_count(), 1);
    }
}
