//! SQL agent: turns a validated question into SQL, runs it through the
//! guard and the read-only executor, then asks the model to present the
//! rows.
//!
//! Generation gets two attempts. If the first statement is rejected by the
//! guard or fails in the database, the model sees its own statement and the
//! error and is asked for a corrected one.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::database::{DatabaseHandle, ResultTable};
use crate::entity::ExtractedProperty;
use crate::gateway::{CompletionRequest, Gateway, GatewayError, Message};
use crate::guard::guard_sql;
use crate::prompts;

pub const GENERATION_ATTEMPTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanedQuery {
    pub original_text: String,
    pub properties: Vec<ExtractedProperty>,
    pub schema_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extraction,
    Validation,
    Generation,
    Execution,
    Rendering,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Extraction => "extraction",
            Stage::Validation => "validation",
            Stage::Generation => "generation",
            Stage::Execution => "execution",
            Stage::Rendering => "rendering",
        })
    }
}

/// One line of intermediate feedback shown to the user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFeedback {
    pub stage: Stage,
    pub message: String,
}

impl StepFeedback {
    pub fn new(stage: Stage, message: impl Into<String>) -> Self {
        Self { stage, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerBundle {
    pub sql: String,
    pub result_table: ResultTable,
    pub rendered_answer: String,
    pub step_trace: Vec<StepFeedback>,
    /// The validated properties the SQL was generated from.
    pub properties: Vec<ExtractedProperty>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("generated SQL was rejected: {reason}")]
    GuardRejected { sql: String, reason: String },
    #[error("generated SQL failed: {reason}")]
    ExecutionFailed { sql: String, reason: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

fn entities_block(properties: &[ExtractedProperty]) -> String {
    let mut out = String::from("Validated entities:\n");
    if properties.is_empty() {
        out.push_str("(none)\n");
    }
    for p in properties {
        match &p.resolved {
            Some(r) => out.push_str(&format!(
                "- {}: \"{}\" is {} (primary key {})\n",
                p.kind, p.raw_value, r.canonical_name, r.primary_key
            )),
            None => out.push_str(&format!("- {}: \"{}\" (unvalidated, match by name)\n", p.kind, p.raw_value)),
        }
    }
    out
}

pub fn build_sql_prompt(model_name: &str, cq: &CleanedQuery, row_cap: usize) -> CompletionRequest {
    let system = prompts::render(
        prompts::SQL_GENERATION,
        &[("schema", cq.schema_text.trim_end()), ("row_cap", &row_cap.to_string())],
    );
    let user = format!("Question:\n{}\n\n{}", cq.original_text, entities_block(&cq.properties));
    CompletionRequest::new(model_name, vec![Message::system(system), Message::user(user.trim_end())])
}

fn with_correction(mut request: CompletionRequest, sql: &str, error: &str) -> CompletionRequest {
    request.messages.push(Message::assistant(sql));
    request.messages.push(Message::user(format!(
        "That statement failed: {error}\nWrite a corrected statement."
    )));
    request
}

pub fn build_summary_prompt(model_name: &str, question: &str, sql: &str, table: &ResultTable) -> CompletionRequest {
    let system = prompts::render(prompts::ANSWER_SUMMARY, &[]);
    let note = if table.truncated { ", truncated" } else { "" };
    let user = format!(
        "Question:\n{question}\n\nSQL:\n{sql}\n\nRows ({}{note}):\n{}",
        table.rows.len(),
        table.to_markdown()
    );
    CompletionRequest::new(model_name, vec![Message::system(system), Message::user(user.trim_end())])
}

fn row_count(n: usize, truncated: bool) -> String {
    let plural = if n == 1 { "row" } else { "rows" };
    if truncated {
        format!("Query returned {n} {plural} (truncated)")
    } else {
        format!("Query returned {n} {plural}")
    }
}

pub fn answer(
    gateway: &Gateway,
    db: &DatabaseHandle,
    model_name: &str,
    row_cap: usize,
    cq: &CleanedQuery,
) -> Result<AnswerBundle, AgentError> {
    let base = build_sql_prompt(model_name, cq, row_cap);
    let mut request = base.clone();
    let mut trace = Vec::new();
    let mut last_error = None;

    for attempt in 1..=GENERATION_ATTEMPTS {
        let reply = gateway.complete(&request)?;
        let verdict = guard_sql(&reply, row_cap);
        let approved = match verdict.approved() {
            Some(a) => a.clone(),
            None => {
                let reason = verdict.reason.clone().unwrap_or_default();
                trace.push(StepFeedback::new(
                    Stage::Generation,
                    format!("Attempt {attempt}: SQL rejected ({reason})"),
                ));
                request = with_correction(base.clone(), &reply, &reason);
                last_error = Some(AgentError::GuardRejected { sql: verdict.normalized_sql, reason });
                continue;
            }
        };
        let sql = approved.sql();
        trace.push(StepFeedback::new(Stage::Generation, format!("Generated SQL: {sql}")));
        let table = match db.execute_readonly(&approved, row_cap) {
            Ok(t) => t,
            Err(e) => {
                let reason = e.to_string();
                trace.push(StepFeedback::new(
                    Stage::Execution,
                    format!("Attempt {attempt}: execution failed ({reason})"),
                ));
                request = with_correction(base.clone(), &reply, &reason);
                last_error = Some(AgentError::ExecutionFailed { sql, reason });
                continue;
            }
        };
        trace.push(StepFeedback::new(Stage::Execution, row_count(table.rows.len(), table.truncated)));

        let rendered = gateway.complete(&build_summary_prompt(model_name, &cq.original_text, &sql, &table))?;
        trace.push(StepFeedback::new(Stage::Rendering, "Answer rendered"));
        return Ok(AnswerBundle {
            sql,
            result_table: table,
            rendered_answer: rendered.trim().to_string(),
            step_trace: trace,
            properties: cq.properties.clone(),
        });
    }
    Err(last_error.expect("at least one attempt"))
}
