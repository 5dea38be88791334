//! Asks the model which entities a question mentions and parses the reply.

use std::collections::HashSet;

use serde::Deserialize;
use thiserror::Error;

use crate::entity::{EntityKind, ExtractedProperty};
use crate::gateway::{CompletionRequest, Gateway, GatewayError, Message, OutputSchema};
use crate::guard::strip_code_fences;
use crate::prompts;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("empty query")]
    EmptyQuery,
    #[error("malformed extraction payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub properties: Vec<ExtractedProperty>,
    /// Entries that were dropped while parsing, with the reason.
    pub warnings: Vec<String>,
}

pub fn properties_schema() -> OutputSchema {
    let kinds: Vec<&str> = EntityKind::ALL.iter().map(|k| k.as_str()).collect();
    OutputSchema {
        name: "extracted_properties".to_string(),
        schema: serde_json::json!({
            "type": "object",
            "properties": {
                "properties": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "kind": { "type": "string", "enum": kinds },
                            "value": { "type": "string" }
                        },
                        "required": ["kind", "value"],
                        "additionalProperties": false
                    }
                }
            },
            "required": ["properties"],
            "additionalProperties": false
        }),
    }
}

pub fn build_extraction_prompt(model_name: &str, user_query: &str) -> CompletionRequest {
    debug_assert!(!user_query.trim().is_empty(), "caller rejects empty queries");
    let kinds = EntityKind::ALL
        .iter()
        .map(|k| format!("- {}: {}", k.as_str(), k.definition()))
        .collect::<Vec<_>>()
        .join("\n");
    let system = prompts::render(prompts::EXTRACTION, &[("kinds", &kinds)]);
    CompletionRequest::new(model_name, vec![Message::system(system), Message::user(user_query)])
        .with_schema(properties_schema())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Payload {
    Wrapped { properties: Vec<Item> },
    Bare(Vec<Item>),
}

#[derive(Deserialize)]
struct Item {
    kind: String,
    value: String,
}

/// Accepts `{"properties": [{kind, value}, ...]}` or the bare array.
pub fn parse_structured_payload(response_text: &str) -> Result<Extraction, ExtractError> {
    let text = strip_code_fences(response_text);
    let payload: Payload = serde_json::from_str(text).map_err(|e| ExtractError::Malformed(e.to_string()))?;
    let items = match payload {
        Payload::Wrapped { properties } => properties,
        Payload::Bare(items) => items,
    };

    let mut out = Extraction::default();
    let mut seen = HashSet::new();
    for item in items {
        let value = item.value.trim();
        let Ok(kind) = item.kind.trim().parse::<EntityKind>() else {
            out.warnings.push(format!("dropped unknown kind {:?} (value {value:?})", item.kind));
            continue;
        };
        if value.is_empty() {
            out.warnings.push(format!("dropped empty {kind} value"));
            continue;
        }
        if seen.insert((kind, value.to_string())) {
            out.properties.push(ExtractedProperty::new(kind, value));
        }
    }
    Ok(out)
}

/// Runs the extraction prompt, re-prompting once if the reply cannot be
/// parsed.
pub fn extract(gateway: &Gateway, model_name: &str, user_query: &str) -> Result<Extraction, ExtractError> {
    if user_query.trim().is_empty() {
        return Err(ExtractError::EmptyQuery);
    }
    let mut request = build_extraction_prompt(model_name, user_query);
    let reply = gateway.complete(&request)?;
    match parse_structured_payload(&reply) {
        Ok(found) => Ok(found),
        Err(ExtractError::Malformed(reason)) => {
            request.messages.push(Message::assistant(reply));
            request.messages.push(Message::user(format!(
                "Your reply could not be parsed ({reason}). Reply again with only the JSON object."
            )));
            parse_structured_payload(&gateway.complete(&request)?)
        }
        Err(other) => Err(other),
    }
}
