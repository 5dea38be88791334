//! Read-only statement guard for model-written SQL.
//!
//! The guard tokenizes the text (string literals, quoted identifiers and
//! comments are recognized so their contents are never mistaken for
//! keywords), then accepts exactly one statement headed by `SELECT` or
//! `WITH` that contains no mutating, DDL, transaction or connection-level
//! keyword. Accepted statements lose their comments and trailing semicolon
//! and get a `LIMIT` when they have none at the top level.
//!
//! The only way to obtain an [`ApprovedSql`] is through this module, and
//! the database executor accepts nothing else.

use std::fmt;

use serde::Serialize;

/// Keywords that may not appear anywhere outside literals and comments.
const FORBIDDEN: &[&str] = &[
    "INSERT", "UPDATE", "DELETE", "DROP", "CREATE", "ALTER", "PRAGMA", "ATTACH", "DETACH",
    "VACUUM", "REINDEX", "ANALYZE", "TRUNCATE", "GRANT", "REVOKE", "BEGIN", "COMMIT", "ROLLBACK",
    "SAVEPOINT", "RELEASE", "INTO", "UPSERT", "MERGE", "LOAD_EXTENSION", "EXEC", "EXECUTE",
    "CALL", "COPY",
];

/// Forbidden unless used as a function call, e.g. `replace(name, 'a', 'b')`.
const FORBIDDEN_UNLESS_CALL: &[&str] = &["REPLACE"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum GuardReason {
    Empty,
    MultipleStatements,
    NonReadOnly,
    ForbiddenKeyword(String),
    UnterminatedLiteral,
    UnterminatedComment,
}

impl fmt::Display for GuardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardReason::Empty => f.write_str("empty statement"),
            GuardReason::MultipleStatements => f.write_str("multiple statements"),
            GuardReason::NonReadOnly => f.write_str("non-read-only statement"),
            GuardReason::ForbiddenKeyword(k) => write!(f, "forbidden keyword {k}"),
            GuardReason::UnterminatedLiteral => f.write_str("unterminated string or identifier"),
            GuardReason::UnterminatedComment => f.write_str("unterminated comment"),
        }
    }
}

/// A statement the guard accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApprovedSql {
    body: String,
    appended_limit: Option<usize>,
}

impl ApprovedSql {
    /// The statement as it should be shown and logged.
    pub fn sql(&self) -> String {
        match self.appended_limit {
            Some(cap) => format!("{} LIMIT {cap}", self.body),
            None => self.body.clone(),
        }
    }

    /// The statement without the guard's `LIMIT`.
    pub fn body(&self) -> &str {
        &self.body
    }

    /// The cap the guard appended, if the statement had no `LIMIT` itself.
    pub fn appended_limit(&self) -> Option<usize> {
        self.appended_limit
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GuardVerdict {
    pub allowed: bool,
    pub normalized_sql: String,
    pub reason: Option<String>,
    #[serde(skip)]
    approved: Option<ApprovedSql>,
}

impl GuardVerdict {
    pub fn approved(&self) -> Option<&ApprovedSql> {
        self.approved.as_ref()
    }

    pub fn into_approved(self) -> Result<ApprovedSql, String> {
        match self.approved {
            Some(a) => Ok(a),
            None => Err(self.reason.unwrap_or_else(|| "rejected".to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Semicolon,
    Open,
    Close,
    Other,
}

struct Lexed {
    tokens: Vec<Tok>,
    /// Source with comments replaced by a single space.
    stripped: String,
}

fn lex(src: &str) -> Result<Lexed, GuardReason> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let mut stripped = String::with_capacity(src.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            '-' if next == Some('-') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                stripped.push(' ');
            }
            '/' if next == Some('*') => {
                let mut j = i + 2;
                loop {
                    if j + 1 >= chars.len() {
                        return Err(GuardReason::UnterminatedComment);
                    }
                    if chars[j] == '*' && chars[j + 1] == '/' {
                        break;
                    }
                    j += 1;
                }
                i = j + 2;
                stripped.push(' ');
            }
            '\'' | '"' | '`' | '[' => {
                let close = if c == '[' { ']' } else { c };
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None => return Err(GuardReason::UnterminatedLiteral),
                        Some(&d) if d == close => {
                            // Doubled quote is an escaped quote.
                            if close != ']' && chars.get(j + 1) == Some(&close) {
                                j += 2;
                                continue;
                            }
                            break;
                        }
                        Some(_) => j += 1,
                    }
                }
                stripped.extend(&chars[i..=j]);
                tokens.push(Tok::Other);
                i = j + 1;
            }
            ';' => {
                tokens.push(Tok::Semicolon);
                stripped.push(c);
                i += 1;
            }
            '(' => {
                tokens.push(Tok::Open);
                stripped.push(c);
                i += 1;
            }
            ')' => {
                tokens.push(Tok::Close);
                stripped.push(c);
                i += 1;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                stripped.push_str(&word);
                tokens.push(Tok::Word(word.to_uppercase()));
            }
            c if c.is_whitespace() => {
                stripped.push(c);
                i += 1;
            }
            _ => {
                stripped.push(c);
                tokens.push(Tok::Other);
                i += 1;
            }
        }
    }
    Ok(Lexed { tokens, stripped })
}

/// Removes Markdown code fences. When the text contains a fenced block,
/// only the first block's content is kept.
pub fn strip_code_fences(text: &str) -> &str {
    let trimmed = text.trim();
    let Some(open) = trimmed.find("```") else {
        return trimmed;
    };
    let after = &trimmed[open + 3..];
    // Skip the info string (e.g. "sql") up to the end of the fence line.
    let body_start = after.find('\n').map(|n| n + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => body[..close].trim(),
        None => body.trim(),
    }
}

fn reject(normalized: String, reason: GuardReason) -> GuardVerdict {
    GuardVerdict {
        allowed: false,
        normalized_sql: normalized,
        reason: Some(reason.to_string()),
        approved: None,
    }
}

/// Judges `sql_text`, appending `LIMIT row_cap` to accepted statements
/// without a top-level `LIMIT`.
pub fn guard_sql(sql_text: &str, row_cap: usize) -> GuardVerdict {
    let text = strip_code_fences(sql_text);
    let lexed = match lex(text) {
        Ok(l) => l,
        Err(reason) => return reject(text.to_string(), reason),
    };
    let normalized = lexed
        .stripped
        .trim()
        .trim_end_matches(|c: char| c == ';' || c.is_whitespace())
        .trim()
        .to_string();

    let statements: Vec<&[Tok]> = lexed
        .tokens
        .split(|t| *t == Tok::Semicolon)
        .filter(|s| !s.is_empty())
        .collect();
    let statement = match statements.as_slice() {
        [] => return reject(normalized, GuardReason::Empty),
        [one] => *one,
        _ => return reject(normalized, GuardReason::MultipleStatements),
    };

    match statement.first() {
        Some(Tok::Word(w)) if w == "SELECT" || w == "WITH" => {}
        _ => return reject(normalized, GuardReason::NonReadOnly),
    }

    let mut depth = 0i32;
    let mut has_limit = false;
    for (i, tok) in statement.iter().enumerate() {
        match tok {
            Tok::Open => depth += 1,
            Tok::Close => depth -= 1,
            Tok::Word(w) => {
                if FORBIDDEN.contains(&w.as_str()) {
                    return reject(normalized, GuardReason::ForbiddenKeyword(w.clone()));
                }
                if FORBIDDEN_UNLESS_CALL.contains(&w.as_str())
                    && statement.get(i + 1) != Some(&Tok::Open)
                {
                    return reject(normalized, GuardReason::ForbiddenKeyword(w.clone()));
                }
                if w == "LIMIT" && depth == 0 {
                    has_limit = true;
                }
            }
            _ => {}
        }
    }

    let approved = ApprovedSql {
        body: normalized,
        appended_limit: (!has_limit).then_some(row_cap),
    };
    GuardVerdict {
        allowed: true,
        normalized_sql: approved.sql(),
        reason: None,
        approved: Some(approved),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_select_gets_a_limit() {
        let v = guard_sql("SELECT * FROM games", 100);
        assert!(v.allowed);
        assert_eq!(v.normalized_sql, "SELECT * FROM games LIMIT 100");
        assert_eq!(v.approved().unwrap().body(), "SELECT * FROM games");
    }

    #[test]
    fn deny_examples() {
        let v = guard_sql("DROP TABLE games", 100);
        assert!(!v.allowed);
        assert_eq!(v.reason.as_deref(), Some("non-read-only statement"));
        let v = guard_sql("SELECT 1; DELETE FROM games", 100);
        assert!(!v.allowed);
        assert_eq!(v.reason.as_deref(), Some("multiple statements"));
        assert!(v.approved().is_none());
    }

    #[test]
    fn existing_limit_is_kept() {
        let v = guard_sql("select name from teams limit 3;", 100);
        assert_eq!(v.normalized_sql, "select name from teams limit 3");
        let v = guard_sql("SELECT * FROM (SELECT * FROM games LIMIT 2)", 100);
        assert!(v.normalized_sql.ends_with("LIMIT 100"));
    }

    #[test]
    fn fences_and_comments_are_stripped() {
        let v = guard_sql("Here you go:\n```sql\nSELECT 1 -- one\n```\nthanks", 5);
        assert!(v.allowed, "{v:?}");
        assert_eq!(v.normalized_sql, "SELECT 1 LIMIT 5");
        let v = guard_sql("```\nSELECT 2; /* x */\n```", 5);
        assert_eq!(v.normalized_sql, "SELECT 2 LIMIT 5");
    }

    #[test]
    fn literals_do_not_trigger_keywords() {
        let v = guard_sql("SELECT 'DROP TABLE games; --' AS x, \"delete\" FROM teams", 10);
        assert!(v.allowed, "{v:?}");
        let v = guard_sql("SELECT 'it''s' AS x", 10);
        assert!(v.allowed, "{v:?}");
        let v = guard_sql("SELECT replace(name, 'a', 'b') FROM teams", 10);
        assert!(v.allowed, "{v:?}");
    }

    #[test]
    fn sneaky_statements_are_rejected() {
        for sql in [
            "WITH x AS (SELECT 1) DELETE FROM games",
            "SELECT * INTO backup FROM games",
            "SELECT 1; ATTACH DATABASE 'x.db' AS x",
            "SELECT load_extension('evil')",
            "REPLACE INTO teams VALUES (1)",
            "SELECT 'abc",
            "SELECT 1 /* open",
            "",
            "  ;  ",
        ] {
            let v = guard_sql(sql, 10);
            assert!(!v.allowed, "{sql}");
            assert!(v.reason.is_some());
        }
    }
}
