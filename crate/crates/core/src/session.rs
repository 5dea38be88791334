//! Per-conversation driver for the full pipeline.
//!
//! A [`Session`] moves between three states:
//!
//! ```text
//! Idle ──submit──▶ Processing ──▶ Idle                   (answer or failure)
//!                             └─▶ AwaitingClarification  (ambiguous mention)
//! AwaitingClarification ──resolve──▶ Processing ──▶ Idle | AwaitingClarification
//! ```
//!
//! Ambiguous mentions are queued and asked about one at a time. Every
//! transition is recorded so tests can check that nothing else happens.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{self, AgentError, AnswerBundle, CleanedQuery, Stage, StepFeedback};
use crate::config::EngineConfig;
use crate::database::{DatabaseHandle, DbError, DEFAULT_ROW_CAP};
use crate::entity::{EntityKind, ExtractedProperty, LookupEntry};
use crate::extractor::{self, ExtractError};
use crate::gateway::Gateway;
use crate::validator::{apply_user_choice, validate_property, Ambiguity, Candidate, ChoiceError, UserChoice, ValidationOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    Processing,
    AwaitingClarification,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Idle => "idle",
            SessionState::Processing => "processing",
            SessionState::AwaitingClarification => "awaiting clarification",
        })
    }
}

/// The only transitions a session may take.
pub const ALLOWED_TRANSITIONS: [(SessionState, SessionState); 4] = [
    (SessionState::Idle, SessionState::Processing),
    (SessionState::Processing, SessionState::Idle),
    (SessionState::Processing, SessionState::AwaitingClarification),
    (SessionState::AwaitingClarification, SessionState::Processing),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clarification {
    pub kind: EntityKind,
    pub raw_value: String,
    pub candidates: Vec<Candidate>,
    pub allows_pass_through: bool,
    pub allows_custom: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepResult {
    FinalAnswer(AnswerBundle),
    NeedsClarification(Clarification),
    Failure { error: String, user_message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HistoryEntry {
    UserText { text: String },
    Step(StepFeedback),
    ClarificationPrompt { kind: EntityKind, raw_value: String, options: Vec<String> },
    Choice { description: String },
    Answer { markdown: String, sql: String },
    Failure { message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("not allowed while the session is {0}")]
    OutOfTurn(SessionState),
    #[error(transparent)]
    InvalidChoice(#[from] ChoiceError),
    #[error("custom values are not accepted in this session")]
    CustomNotAllowed,
}

/// Shared, read-only context for all sessions.
#[derive(Debug)]
pub struct Engine {
    gateway: Gateway,
    db: DatabaseHandle,
    model_name: String,
    few_shot: usize,
    row_cap: usize,
    validator_enabled: bool,
    schema_text: String,
    lookups: HashMap<EntityKind, Vec<LookupEntry>>,
}

impl Engine {
    pub fn new(gateway: Gateway, db: DatabaseHandle, model_name: impl Into<String>, few_shot: usize) -> Result<Self, DbError> {
        let schema_text = db.schema_description()?;
        let mut lookups = HashMap::new();
        for kind in EntityKind::ALL {
            lookups.insert(kind, db.list_candidates(kind)?);
        }
        Ok(Self {
            gateway,
            db,
            model_name: model_name.into(),
            few_shot: few_shot.max(1),
            row_cap: DEFAULT_ROW_CAP,
            validator_enabled: true,
            schema_text,
            lookups,
        })
    }

    pub fn from_config(config: &EngineConfig, gateway: Gateway, db: DatabaseHandle) -> Result<Self, DbError> {
        Self::new(gateway, db, config.model_name.clone(), config.few_shot)
    }

    pub fn with_row_cap(mut self, row_cap: usize) -> Self {
        self.row_cap = row_cap.max(1);
        self
    }

    /// Forwards every extracted string unvalidated. Used to measure what
    /// the validator contributes.
    pub fn without_validator(mut self) -> Self {
        self.validator_enabled = false;
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn database(&self) -> &DatabaseHandle {
        &self.db
    }

    pub fn few_shot(&self) -> usize {
        self.few_shot
    }

    fn lookup(&self, kind: EntityKind) -> &[LookupEntry] {
        self.lookups.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone)]
struct Pending {
    original_text: String,
    properties: Vec<ExtractedProperty>,
    /// Index into `properties` and the ambiguity to settle for it.
    queue: VecDeque<(usize, Ambiguity)>,
    trace: Vec<StepFeedback>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    state: SessionState,
    allows_custom: bool,
    pending: Option<Pending>,
    history: Vec<HistoryEntry>,
    transitions: Vec<(SessionState, SessionState)>,
}

fn describe(p: &ExtractedProperty) -> String {
    format!("{} \"{}\"", p.kind, p.raw_value)
}

impl Session {
    pub fn new(id: impl Into<String>, allows_custom: bool) -> Self {
        Self {
            id: id.into(),
            state: SessionState::Idle,
            allows_custom,
            pending: None,
            history: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn allows_custom(&self) -> bool {
        self.allows_custom
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    pub fn transitions(&self) -> &[(SessionState, SessionState)] {
        &self.transitions
    }

    /// The clarification currently waiting for an answer.
    pub fn pending_clarification(&self) -> Option<Clarification> {
        let (_, amb) = self.pending.as_ref()?.queue.front()?;
        Some(self.clarification(amb))
    }

    fn move_to(&mut self, next: SessionState) {
        debug_assert!(ALLOWED_TRANSITIONS.contains(&(self.state, next)), "{} -> {next}", self.state);
        self.transitions.push((self.state, next));
        self.state = next;
    }

    fn clarification(&self, amb: &Ambiguity) -> Clarification {
        Clarification {
            kind: amb.kind,
            raw_value: amb.raw_value.clone(),
            candidates: amb.candidates.clone(),
            allows_pass_through: true,
            allows_custom: self.allows_custom,
        }
    }

    fn step(&mut self, trace: &mut Vec<StepFeedback>, stage: Stage, message: impl Into<String>) {
        let feedback = StepFeedback::new(stage, message);
        self.history.push(HistoryEntry::Step(feedback.clone()));
        trace.push(feedback);
    }

    fn fail(&mut self, error: String, user_message: String) -> StepResult {
        self.pending = None;
        self.history.push(HistoryEntry::Failure { message: user_message.clone() });
        self.move_to(SessionState::Idle);
        StepResult::Failure { error, user_message }
    }

    pub fn submit_query(&mut self, engine: &Engine, user_text: &str) -> Result<StepResult, SessionError> {
        if self.state != SessionState::Idle {
            return Err(SessionError::OutOfTurn(self.state));
        }
        let text = user_text.trim();
        if text.is_empty() {
            return Ok(StepResult::Failure {
                error: ExtractError::EmptyQuery.to_string(),
                user_message: "empty query".to_string(),
            });
        }
        self.move_to(SessionState::Processing);
        self.history.push(HistoryEntry::UserText { text: text.to_string() });

        let mut trace = Vec::new();
        let extraction = match extractor::extract(&engine.gateway, &engine.model_name, text) {
            Ok(e) => e,
            Err(e) => return Ok(self.fail(e.to_string(), format!("Could not read the question: {e}"))),
        };
        let found = if extraction.properties.is_empty() {
            "No entities found".to_string()
        } else {
            let list: Vec<String> = extraction.properties.iter().map(describe).collect();
            format!("Found {}", list.join(", "))
        };
        self.step(&mut trace, Stage::Extraction, found);
        for warning in &extraction.warnings {
            self.step(&mut trace, Stage::Extraction, format!("Ignored: {warning}"));
        }

        let mut properties = Vec::with_capacity(extraction.properties.len());
        let mut queue = VecDeque::new();
        for prop in extraction.properties {
            if !engine.validator_enabled {
                self.step(&mut trace, Stage::Validation, format!("{} passed through (validation off)", describe(&prop)));
                properties.push(prop);
                continue;
            }
            let outcome = validate_property(&prop, engine.lookup(prop.kind), engine.few_shot);
            let message = match &outcome {
                ValidationOutcome::Resolved { primary_key, canonical_name, .. } => {
                    format!("{} matched {canonical_name} ({primary_key})", describe(&prop))
                }
                ValidationOutcome::Ambiguous(amb) => {
                    format!("{} needs clarification ({} options)", describe(&prop), amb.candidates.len())
                }
                ValidationOutcome::Unmatched { .. } => format!("{} not found, passed through", describe(&prop)),
            };
            self.step(&mut trace, Stage::Validation, message);
            if let ValidationOutcome::Ambiguous(amb) = &outcome {
                queue.push_back((properties.len(), amb.clone()));
            }
            properties.push(outcome.apply_to(&prop));
        }

        self.pending = Some(Pending {
            original_text: text.to_string(),
            properties,
            queue,
            trace,
        });
        Ok(self.advance(engine))
    }

    pub fn resolve_clarification(&mut self, engine: &Engine, choice: UserChoice) -> Result<StepResult, SessionError> {
        if self.state != SessionState::AwaitingClarification {
            return Err(SessionError::OutOfTurn(self.state));
        }
        if matches!(choice, UserChoice::Custom(_)) && !self.allows_custom {
            return Err(SessionError::CustomNotAllowed);
        }
        let pending = self.pending.as_ref().expect("awaiting implies pending");
        let (index, amb) = pending.queue.front().expect("awaiting implies a queued ambiguity");
        let (index, amb) = (*index, amb.clone());
        let prop = apply_user_choice(&amb, &choice, engine.lookup(amb.kind), engine.few_shot)?;

        self.move_to(SessionState::Processing);
        let description = match (&choice, &prop.resolved) {
            (UserChoice::PassThrough, _) => format!("kept \"{}\" as written", amb.raw_value),
            (_, Some(r)) => format!("\"{}\" is {} ({})", amb.raw_value, r.canonical_name, r.primary_key),
            (_, None) => format!("\"{}\" replaced by \"{}\", passed through", amb.raw_value, prop.raw_value),
        };
        self.history.push(HistoryEntry::Choice { description: description.clone() });
        let mut pending = self.pending.take().expect("checked above");
        pending.queue.pop_front();
        pending.properties[index] = prop;
        let feedback = StepFeedback::new(Stage::Validation, format!("User chose: {description}"));
        self.history.push(HistoryEntry::Step(feedback.clone()));
        pending.trace.push(feedback);
        self.pending = Some(pending);
        Ok(self.advance(engine))
    }

    /// From Processing: ask the next question or run the agent.
    fn advance(&mut self, engine: &Engine) -> StepResult {
        let pending = self.pending.as_ref().expect("processing implies pending");
        if let Some((_, amb)) = pending.queue.front() {
            let clarification = self.clarification(amb);
            self.history.push(HistoryEntry::ClarificationPrompt {
                kind: amb.kind,
                raw_value: amb.raw_value.clone(),
                options: amb.candidates.iter().map(|c| c.canonical_name.clone()).collect(),
            });
            self.move_to(SessionState::AwaitingClarification);
            return StepResult::NeedsClarification(clarification);
        }

        let pending = self.pending.take().expect("checked above");
        let cq = CleanedQuery {
            original_text: pending.original_text,
            properties: pending.properties,
            schema_text: engine.schema_text.clone(),
        };
        match agent::answer(&engine.gateway, &engine.db, &engine.model_name, engine.row_cap, &cq) {
            Ok(mut bundle) => {
                for step in &bundle.step_trace {
                    self.history.push(HistoryEntry::Step(step.clone()));
                }
                let mut trace = pending.trace;
                trace.append(&mut bundle.step_trace);
                bundle.step_trace = trace;
                self.history.push(HistoryEntry::Answer {
                    markdown: bundle.rendered_answer.clone(),
                    sql: bundle.sql.clone(),
                });
                self.move_to(SessionState::Idle);
                StepResult::FinalAnswer(bundle)
            }
            Err(e) => {
                let user_message = match &e {
                    AgentError::GuardRejected { .. } => "The generated query was not a safe read-only query.".to_string(),
                    AgentError::ExecutionFailed { .. } => "The generated query could not be run.".to_string(),
                    AgentError::Gateway(g) => format!("The language model could not be reached: {g}"),
                };
                self.fail(e.to_string(), user_message)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::database::build_database;
    use crate::dataset::fixture::{generate_fixture, FixtureSizes};
    use crate::gateway::{ChatTransport, CompletionRequest, TransportError, TransportReply};
    use std::sync::Mutex;

    /// Answers extraction prompts from a table keyed by query, SQL prompts
    /// with a count query and summaries with a fixed sentence.
    struct Fake {
        extractions: Vec<(&'static str, &'static str)>,
        sql: Mutex<Vec<&'static str>>,
    }

    impl ChatTransport for Fake {
        fn send(&self, req: &CompletionRequest) -> Result<TransportReply, TransportError> {
            let user = &req.messages[1].content;
            let text = if req.structured_output_schema.is_some() {
                self.extractions.iter().find(|(q, _)| q == user).map(|(_, e)| e.to_string()).unwrap_or("[]".into())
            } else if req.messages[0].content.contains("SQLite") {
                let mut sql = self.sql.lock().unwrap();
                if sql.is_empty() { "SELECT 1".into() } else { sql.remove(0).to_string() }
            } else {
                "done".into()
            };
            Ok(TransportReply { text, usage: None })
        }
    }

    fn engine(sql: Vec<&'static str>) -> (tempfile::TempDir, Engine) {
        let dir = tempfile::tempdir().unwrap();
        let db = build_database(&generate_fixture(7, &FixtureSizes::default()), &dir.path().join("g.db")).unwrap();
        let fake = Fake {
            extractions: vec![
                ("messi cards?", r#"[{"kind":"player","value":"messi"}]"#),
                ("Lionel cards?", r#"[{"kind":"player","value":"Lionel"}]"#),
                ("Lionel or Henry?", r#"[{"kind":"player","value":"Lionel"},{"kind":"player","value":"Henry"}]"#),
            ],
            sql: Mutex::new(sql),
        };
        (dir, Engine::new(Gateway::live(Box::new(fake)), db, "m", 3).unwrap())
    }

    #[test]
    fn one_step_query() {
        let (_d, eng) = engine(vec![]);
        let mut s = Session::new("s", true);
        let StepResult::FinalAnswer(bundle) = s.submit_query(&eng, "messi cards?").unwrap() else { panic!() };
        assert_eq!(bundle.rendered_answer, "done");
        let stages: Vec<Stage> = bundle.step_trace.iter().map(|f| f.stage).collect();
        assert_eq!(stages, vec![Stage::Extraction, Stage::Validation, Stage::Generation, Stage::Execution, Stage::Rendering]);
        assert_eq!(s.state(), SessionState::Idle);
        assert!(!s.history().iter().any(|h| matches!(h, HistoryEntry::ClarificationPrompt { .. })));
        assert_eq!(
            s.transitions(),
            &[(SessionState::Idle, SessionState::Processing), (SessionState::Processing, SessionState::Idle)]
        );
    }

    #[test]
    fn two_ambiguities_are_asked_in_turn() {
        let (_d, eng) = engine(vec![]);
        let mut s = Session::new("s", false);
        let StepResult::NeedsClarification(first) = s.submit_query(&eng, "Lionel or Henry?").unwrap() else { panic!() };
        assert_eq!(first.raw_value, "Lionel");
        assert_eq!(first.candidates.len(), 2);
        assert!(!first.allows_custom);
        assert_eq!(s.submit_query(&eng, "again"), Err(SessionError::OutOfTurn(SessionState::AwaitingClarification)));
        assert_eq!(
            s.resolve_clarification(&eng, UserChoice::Custom("Messi".into())),
            Err(SessionError::CustomNotAllowed)
        );
        assert!(matches!(
            s.resolve_clarification(&eng, UserChoice::Select(9)),
            Err(SessionError::InvalidChoice(ChoiceError::InvalidChoice { index: 9, available: 2 }))
        ));
        let StepResult::NeedsClarification(second) = s.resolve_clarification(&eng, UserChoice::Select(1)).unwrap() else { panic!() };
        assert_eq!(second.raw_value, "Henry");
        let result = s.resolve_clarification(&eng, UserChoice::PassThrough).unwrap();
        assert!(matches!(result, StepResult::FinalAnswer(_)));
        assert_eq!(s.state(), SessionState::Idle);
        assert_eq!(s.resolve_clarification(&eng, UserChoice::PassThrough), Err(SessionError::OutOfTurn(SessionState::Idle)));
        for t in s.transitions() {
            assert!(ALLOWED_TRANSITIONS.contains(t));
        }
    }

    #[test]
    fn custom_value_is_revalidated() {
        let (_d, eng) = engine(vec![]);
        let mut s = Session::new("s", true);
        s.submit_query(&eng, "Lionel cards?").unwrap();
        let StepResult::FinalAnswer(_) = s.resolve_clarification(&eng, UserChoice::Custom("Messi".into())).unwrap() else { panic!() };
        assert!(s.history().iter().any(|h| matches!(h, HistoryEntry::Choice { description } if description.contains("p_messi"))));
    }

    #[test]
    fn blank_and_failures_return_to_idle() {
        let (_d, eng) = engine(vec!["DROP TABLE games", "DELETE FROM games"]);
        let mut s = Session::new("s", true);
        let StepResult::Failure { user_message, .. } = s.submit_query(&eng, "   ").unwrap() else { panic!() };
        assert_eq!(user_message, "empty query");
        assert!(s.history().is_empty());
        let result = s.submit_query(&eng, "messi cards?").unwrap();
        assert!(matches!(result, StepResult::Failure { .. }));
        assert_eq!(s.state(), SessionState::Idle);
        assert!(matches!(s.history().last(), Some(HistoryEntry::Failure { .. })));
    }

    #[test]
    fn bypass_forwards_raw_strings() {
        let (_d, eng) = engine(vec![]);
        let eng = eng.without_validator();
        let mut s = Session::new("s", true);
        let StepResult::FinalAnswer(_) = s.submit_query(&eng, "Lionel cards?").unwrap() else { panic!() };
    }
}
