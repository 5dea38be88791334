//! Embedded SQLite store built from a [`DatasetBundle`].
//!
//! The database is written once by [`build_database`] (to a temporary file
//! that is renamed over the target) and afterwards only opened read-only.
//! Read connections additionally run with `query_only`, and statements are
//! rejected unless SQLite itself reports them as read-only.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rusqlite::types::ValueRef;
use rusqlite::{params, Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::DatasetBundle;
use crate::entity::{EntityKind, LookupEntry};
use crate::guard::ApprovedSql;

pub const SCHEMA_SQL: &str = include_str!("../../../docs/schema.sql");

/// Default cap on rows returned to the summarizer.
pub const DEFAULT_ROW_CAP: usize = 100;

/// Tables in schema order, with the columns that order their rows.
pub const TABLES: [(&str, &str); 7] = [
    ("leagues", "league_key"),
    ("teams", "team_key"),
    ("players", "player_key"),
    ("player_teams", "player_key, season, team_key"),
    ("games", "game_key"),
    ("events", "event_key"),
    ("captions", "caption_key"),
];

const SAMPLE_ROWS: usize = 3;

#[derive(Debug, Error)]
pub enum DbError {
    #[error("storage error at {path}: {reason}")]
    Storage { path: String, reason: String },
    #[error("database error: {0}")]
    Engine(String),
    #[error("statement is not read-only")]
    NotReadOnly,
}

impl From<rusqlite::Error> for DbError {
    fn from(e: rusqlite::Error) -> Self {
        DbError::Engine(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

impl Value {
    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Integer(i) => Some(*i),
            Value::Real(r) if r.fract() == 0.0 => Some(*r as i64),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<ValueRef<'_>> for Value {
    fn from(v: ValueRef<'_>) -> Self {
        match v {
            ValueRef::Null => Value::Null,
            ValueRef::Integer(i) => Value::Integer(i),
            ValueRef::Real(r) => Value::Real(r),
            ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => Value::Text(hex::encode(b)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// More rows existed than were returned.
    pub truncated: bool,
}

impl ResultTable {
    pub fn to_markdown(&self) -> String {
        fn cell(s: &str) -> String {
            s.replace('|', "\\|").replace('\n', " ")
        }
        let mut out = String::new();
        out.push_str("| ");
        out.push_str(
            &self
                .column_names
                .iter()
                .map(|c| cell(c))
                .collect::<Vec<_>>()
                .join(" | "),
        );
        out.push_str(" |\n|");
        for _ in &self.column_names {
            out.push_str(" --- |");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str("| ");
            out.push_str(
                &row.iter()
                    .map(|v| cell(&v.to_string()))
                    .collect::<Vec<_>>()
                    .join(" | "),
            );
            out.push_str(" |\n");
        }
        out
    }

    /// The single value of a one-cell result.
    pub fn scalar(&self) -> Option<&Value> {
        match (self.column_names.len(), self.rows.as_slice()) {
            (1, [row]) => row.first(),
            _ => None,
        }
    }
}

fn storage(path: &Path, reason: impl ToString) -> DbError {
    DbError::Storage {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

fn insert_bundle(conn: &mut Connection, bundle: &DatasetBundle) -> rusqlite::Result<()> {
    let tx = conn.transaction()?;
    {
        let mut stmt = tx.prepare("INSERT INTO leagues VALUES (?1, ?2, ?3)")?;
        for l in &bundle.leagues {
            stmt.execute(params![l.league_key, l.name, l.country])?;
        }
        let mut stmt = tx.prepare("INSERT INTO teams VALUES (?1, ?2, ?3, ?4)")?;
        for t in &bundle.teams {
            stmt.execute(params![t.team_key, t.name, t.league_key, t.venue])?;
        }
        let mut stmt = tx.prepare("INSERT INTO players VALUES (?1, ?2)")?;
        let mut spell = tx.prepare("INSERT OR IGNORE INTO player_teams VALUES (?1, ?2, ?3)")?;
        for p in &bundle.players {
            stmt.execute(params![p.player_key, p.name])?;
            for a in &p.affiliations {
                spell.execute(params![p.player_key, a.season, a.team_key])?;
            }
        }
        let mut stmt =
            tx.prepare("INSERT INTO games VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)")?;
        for g in &bundle.games {
            stmt.execute(params![
                g.game_key,
                g.season,
                g.league_key,
                g.home_team_key,
                g.away_team_key,
                g.home_score,
                g.away_score,
                g.date.to_string(),
                g.venue,
                g.attendance,
            ])?;
        }
        let mut stmt = tx.prepare("INSERT INTO events VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)")?;
        for e in &bundle.events {
            stmt.execute(params![
                e.event_key,
                e.game_key,
                e.label,
                e.game_time.half,
                e.game_time.minute,
                e.game_time.second,
                e.team_key,
                e.player_key,
            ])?;
        }
        let mut stmt = tx.prepare("INSERT INTO captions VALUES (?1, ?2, ?3, ?4)")?;
        for c in &bundle.captions {
            stmt.execute(params![c.caption_key, c.game_key, c.start_time, c.text])?;
        }
    }
    tx.commit()
}

/// Writes `bundle` to a fresh database at `db_path`, replacing any existing
/// file only once the new one is complete.
pub fn build_database(bundle: &DatasetBundle, db_path: &Path) -> Result<DatabaseHandle, DbError> {
    if let Some(parent) = db_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| storage(db_path, e))?;
    }
    let mut tmp = db_path.as_os_str().to_owned();
    tmp.push(format!(".tmp-{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    if tmp.exists() {
        fs::remove_file(&tmp).map_err(|e| storage(&tmp, e))?;
    }

    let result = (|| -> Result<(), DbError> {
        let mut conn = Connection::open(&tmp).map_err(|e| storage(&tmp, e))?;
        conn.execute_batch("PRAGMA foreign_keys = ON;")
            .map_err(|e| storage(&tmp, e))?;
        conn.execute_batch(SCHEMA_SQL).map_err(|e| storage(&tmp, e))?;
        insert_bundle(&mut conn, bundle).map_err(|e| storage(&tmp, e))?;
        let violations: i64 = conn
            .query_row("SELECT COUNT(*) FROM pragma_foreign_key_check", [], |r| r.get(0))
            .map_err(|e| storage(&tmp, e))?;
        if violations > 0 {
            return Err(storage(&tmp, format!("{violations} foreign key violations")));
        }
        conn.close().map_err(|(_, e)| storage(&tmp, e))?;
        fs::rename(&tmp, db_path).map_err(|e| storage(db_path, e))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result?;
    DatabaseHandle::open(db_path)
}

/// Read-only access to a built database. Cheap to share; each call borrows
/// a pooled connection.
pub struct DatabaseHandle {
    path: PathBuf,
    pool: Mutex<Vec<Connection>>,
}

impl fmt::Debug for DatabaseHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DatabaseHandle").field("path", &self.path).finish()
    }
}

impl DatabaseHandle {
    pub fn open(path: &Path) -> Result<Self, DbError> {
        if !path.is_file() {
            return Err(storage(path, "database file does not exist"));
        }
        let handle = Self {
            path: path.to_path_buf(),
            pool: Mutex::new(Vec::new()),
        };
        let conn = handle.connect()?;
        handle.release(conn);
        Ok(handle)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn connect(&self) -> Result<Connection, DbError> {
        let conn = Connection::open_with_flags(
            &self.path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )
        .map_err(|e| storage(&self.path, e))?;
        conn.execute_batch("PRAGMA query_only = ON;")?;
        Ok(conn)
    }

    fn with_conn<T>(&self, f: impl FnOnce(&Connection) -> Result<T, DbError>) -> Result<T, DbError> {
        let pooled = self.pool.lock().expect("pool lock").pop();
        let conn = match pooled {
            Some(c) => c,
            None => self.connect()?,
        };
        let out = f(&conn);
        self.release(conn);
        out
    }

    fn release(&self, conn: Connection) {
        self.pool.lock().expect("pool lock").push(conn);
    }

    /// Lookup table for one entity kind, ordered by name then key.
    pub fn list_candidates(&self, kind: EntityKind) -> Result<Vec<LookupEntry>, DbError> {
        let sql = match kind {
            EntityKind::League => "SELECT league_key, name FROM leagues ORDER BY name, league_key",
            EntityKind::Team => "SELECT team_key, name FROM teams ORDER BY name, team_key",
            EntityKind::Player => "SELECT player_key, name FROM players ORDER BY name, player_key",
            EntityKind::Season => "SELECT DISTINCT season, season FROM games ORDER BY season",
            EntityKind::EventLabel => "SELECT DISTINCT label, label FROM events ORDER BY label",
            EntityKind::Venue => {
                "SELECT venue, venue FROM games UNION SELECT venue, venue FROM teams ORDER BY 1"
            }
        };
        self.with_conn(|conn| {
            let mut stmt = conn.prepare(sql)?;
            let rows = stmt.query_map([], |r| {
                Ok(LookupEntry::new(r.get::<_, String>(0)?, r.get::<_, String>(1)?))
            })?;
            Ok(rows.collect::<Result<Vec<_>, _>>()?)
        })
    }

    /// Runs an approved statement and returns at most `row_cap` rows.
    pub fn execute_readonly(&self, sql: &ApprovedSql, row_cap: usize) -> Result<ResultTable, DbError> {
        let row_cap = row_cap.max(1);
        let text = match sql.appended_limit() {
            // One extra row tells us whether the cap cut anything off.
            Some(cap) => format!("{} LIMIT {}", sql.body(), cap.min(row_cap) + 1),
            None => sql.body().to_string(),
        };
        let row_cap = sql.appended_limit().map_or(row_cap, |cap| cap.min(row_cap));
        self.with_conn(|conn| {
            let mut stmt = conn.prepare(&text)?;
            if !stmt.readonly() {
                return Err(DbError::NotReadOnly);
            }
            let column_names: Vec<String> = stmt.column_names().iter().map(|c| c.to_string()).collect();
            let width = column_names.len();
            let mut rows = Vec::new();
            let mut truncated = false;
            let mut cursor = stmt.query([])?;
            while let Some(row) = cursor.next()? {
                if rows.len() == row_cap {
                    truncated = true;
                    break;
                }
                let mut values = Vec::with_capacity(width);
                for i in 0..width {
                    values.push(Value::from(row.get_ref(i)?));
                }
                rows.push(values);
            }
            Ok(ResultTable {
                column_names,
                rows,
                truncated,
            })
        })
    }

    /// Row count per table, in schema order.
    pub fn table_counts(&self) -> Result<Vec<(String, usize)>, DbError> {
        self.with_conn(|conn| {
            TABLES
                .iter()
                .map(|(table, _)| {
                    let n: i64 = conn.query_row(&format!("SELECT COUNT(*) FROM {table}"), [], |r| r.get(0))?;
                    Ok((table.to_string(), n as usize))
                })
                .collect()
        })
    }

    /// Deterministic text rendering of tables, columns, keys and a few
    /// sample rows, used as grounding for SQL generation.
    pub fn schema_description(&self) -> Result<String, DbError> {
        self.with_conn(|conn| {
            let mut out = String::new();
            for (table, order) in TABLES {
                let count: i64 = conn.query_row(&format!("SELECT COUNT(*) FROM {table}"), [], |r| r.get(0))?;
                out.push_str(&format!("TABLE {table} ({count} rows)\n"));

                let mut fks = std::collections::BTreeMap::new();
                let mut stmt = conn.prepare(&format!(
                    "SELECT \"from\", \"table\", \"to\" FROM pragma_foreign_key_list('{table}')"
                ))?;
                let rows = stmt.query_map([], |r| {
                    Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, String>(2)?))
                })?;
                for row in rows {
                    let (from, to_table, to_col) = row?;
                    fks.insert(from, format!("{to_table}.{to_col}"));
                }

                let mut stmt = conn.prepare(&format!(
                    "SELECT name, type, \"notnull\", pk FROM pragma_table_info('{table}') ORDER BY cid"
                ))?;
                let columns = stmt
                    .query_map([], |r| {
                        Ok((
                            r.get::<_, String>(0)?,
                            r.get::<_, String>(1)?,
                            r.get::<_, bool>(2)?,
                            r.get::<_, i64>(3)?,
                        ))
                    })?
                    .collect::<Result<Vec<_>, _>>()?;
                for (name, ty, not_null, pk) in &columns {
                    let mut line = format!("  {name} {ty}");
                    if *pk > 0 {
                        line.push_str(" PRIMARY KEY");
                    } else if *not_null {
                        line.push_str(" NOT NULL");
                    }
                    if let Some(target) = fks.get(name) {
                        line.push_str(&format!(" -> {target}"));
                    }
                    if let Some(note) = column_note(table, name) {
                        line.push_str(&format!("  # {note}"));
                    }
                    out.push_str(&line);
                    out.push('\n');
                }

                if count == 0 {
                    out.push_str("  sample rows: none\n");
                } else {
                    let mut stmt = conn.prepare(&format!(
                        "SELECT * FROM {table} ORDER BY {order} LIMIT {SAMPLE_ROWS}"
                    ))?;
                    let width = stmt.column_count();
                    let mut cursor = stmt.query([])?;
                    out.push_str("  sample rows:\n");
                    while let Some(row) = cursor.next()? {
                        let cells = (0..width)
                            .map(|i| row.get_ref(i).map(|v| Value::from(v).to_string()))
                            .collect::<Result<Vec<_>, _>>()?;
                        out.push_str(&format!("    {}\n", cells.join(" | ")));
                    }
                }
                out.push('\n');
            }
            Ok(out)
        })
    }

    /// SHA-256 over every row of every table, in key order.
    pub fn content_checksum(&self) -> Result<String, DbError> {
        self.with_conn(|conn| {
            let mut hasher = Sha256::new();
            for (table, order) in TABLES {
                hasher.update(table.as_bytes());
                hasher.update(b"\n");
                let mut stmt = conn.prepare(&format!("SELECT * FROM {table} ORDER BY {order}"))?;
                let width = stmt.column_count();
                let mut cursor = stmt.query([])?;
                while let Some(row) = cursor.next()? {
                    for i in 0..width {
                        let v = Value::from(row.get_ref(i)?);
                        hasher.update(format!("{v:?}\u{1f}").as_bytes());
                    }
                    hasher.update(b"\n");
                }
            }
            Ok(hex::encode(hasher.finalize()))
        })
    }
}

fn column_note(table: &str, column: &str) -> Option<&'static str> {
    Some(match (table, column) {
        ("games", "season") | ("player_teams", "season") => "format YYYY-YYYY, e.g. 2015-2016",
        ("games", "date") => "ISO-8601 date",
        ("games", "venue") => "stadium of the home team",
        ("events", "label") => "event type, e.g. Goal, Yellow card, Red card, Substitution",
        ("events", "half") => "1 or 2",
        ("events", "minute") => "minute within the half",
        ("events", "team_key") => "team the event is credited to",
        ("events", "player_key") => "NULL when no player is attached",
        ("captions", "start_time") => "seconds from kick-off",
        _ => return None,
    })
}
