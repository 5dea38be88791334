//! `soccerrag` command line: `setup`, `query` and `serve`.
//!
//! Everything goes through [`run`] with explicit streams and environment so
//! transcripts can be reproduced byte for byte in tests.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use soccerrag_core::config::{self, keys, EngineConfig};
use soccerrag_core::database::{build_database, DatabaseHandle};
use soccerrag_core::dataset::fixture::{generate_fixture, FixtureSizes};
use soccerrag_core::dataset::{parse_dataset, write_dataset};
use soccerrag_core::gateway::{Gateway, DEFAULT_CASSETTE_DIR};
use soccerrag_core::session::{Clarification, Engine, HistoryEntry, Session, StepResult};
use soccerrag_core::validator::UserChoice;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "soccerrag", version, about = "Ask questions about a soccer match archive in plain English")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the database from a dataset directory or a generated fixture.
    Setup {
        /// Directory holding the dataset JSONL files.
        #[arg(long, conflicts_with = "fixture")]
        data_dir: Option<PathBuf>,
        /// Generate a synthetic dataset from this seed instead.
        #[arg(long)]
        fixture: Option<u64>,
        /// Also write the generated fixture as JSONL files here.
        #[arg(long, requires = "fixture")]
        export: Option<PathBuf>,
    },
    /// Answer one question.
    Query {
        /// The question, in quotes. A literal `\n` becomes a line break.
        #[arg(short = 'q', long = "query")]
        query: String,
        /// Cassette directory used in record and replay modes.
        #[arg(long, default_value = DEFAULT_CASSETTE_DIR)]
        cassettes: PathBuf,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8000)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Built chat UI to serve at `/`.
        #[arg(long, default_value = "ui/dist")]
        ui_dir: PathBuf,
        #[arg(long, default_value = DEFAULT_CASSETTE_DIR)]
        cassettes: PathBuf,
    },
}

/// Streams used by a command.
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
    /// Echo what was read from stdin, for non-interactive input.
    pub echo_input: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, env: &HashMap<String, String>, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(io.stderr, "{text}");
            } else {
                let _ = write!(io.stdout, "{text}");
            }
            return e.exit_code();
        }
    };
    let code = match cli.command {
        Command::Setup { data_dir, fixture, export } => cmd_setup(env, data_dir, fixture, export, io),
        Command::Query { query, cassettes } => cmd_query(env, &query, &cassettes, io),
        Command::Serve { port, host, ui_dir, cassettes } => {
            cmd_serve(env, SocketAddr::new(host, port), ui_dir, &cassettes, io)
        }
    };
    let _ = io.stdout.flush();
    code
}

/// Turns the two-character sequence `\n` into a line break.
pub fn translate_linebreaks(query: &str) -> String {
    query
        .replace("\\n", "\n")
        .lines()
        .map(str::trim)
        .collect::<Vec<_>>()
        .join("\n")
}

fn database_path(env: &HashMap<String, String>) -> PathBuf {
    let url = env
        .get(keys::DATABASE_URL)
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .unwrap_or(config::DEFAULT_DATABASE_URL);
    PathBuf::from(url.strip_prefix("sqlite://").unwrap_or(url))
}

fn cmd_setup(
    env: &HashMap<String, String>,
    data_dir: Option<PathBuf>,
    fixture: Option<u64>,
    export: Option<PathBuf>,
    io: &mut Io<'_>,
) -> i32 {
    let bundle = match fixture {
        Some(seed) => {
            let bundle = generate_fixture(seed, &FixtureSizes::default());
            if let Some(dir) = export {
                if let Err(e) = write_dataset(&bundle, &dir) {
                    let _ = writeln!(io.stderr, "error: {e}");
                    return EXIT_FAILURE;
                }
                let _ = writeln!(io.stdout, "Wrote fixture {seed} to {}", dir.display());
            }
            bundle
        }
        None => {
            let dir = data_dir.unwrap_or_else(|| PathBuf::from("data"));
            if !dir.is_dir() {
                let _ = writeln!(io.stderr, "error: dataset directory {} does not exist", dir.display());
                return EXIT_USAGE;
            }
            match parse_dataset(&dir) {
                Ok(b) => b,
                Err(e) => {
                    let _ = writeln!(io.stderr, "error: {e}");
                    return EXIT_FAILURE;
                }
            }
        }
    };

    let path = database_path(env);
    let db = match build_database(&bundle, &path) {
        Ok(db) => db,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            return EXIT_FAILURE;
        }
    };
    let _ = writeln!(io.stdout, "Built {}", path.display());
    match db.table_counts() {
        Ok(counts) => {
            for (table, n) in counts {
                let _ = writeln!(io.stdout, "  {table:<13}{n:>7}");
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn open_engine(env: &HashMap<String, String>, cassettes: &Path) -> Result<Engine, String> {
    let config: EngineConfig = config::load_config(env).map_err(|e| e.to_string())?;
    let db_path = database_path(env);
    if !db_path.is_file() {
        return Err(format!(
            "no database at {}; run `soccerrag setup` first",
            db_path.display()
        ));
    }
    let db = DatabaseHandle::open(&db_path).map_err(|e| e.to_string())?;
    let gateway = Gateway::from_config(&config, cassettes).map_err(|e| e.to_string())?;
    Engine::from_config(&config, gateway, db).map_err(|e| e.to_string())
}

/// Prints history entries as they are appended.
struct Printer {
    shown: usize,
}

impl Printer {
    fn flush(&mut self, session: &Session, out: &mut dyn Write) {
        for entry in &session.history()[self.shown..] {
            match entry {
                HistoryEntry::Step(step) => {
                    let _ = writeln!(out, "[{}] {}", step.stage, step.message);
                }
                HistoryEntry::Answer { markdown, sql } => {
                    let _ = writeln!(out, "\nSQL:\n{sql}\n\nAnswer:\n{markdown}");
                }
                HistoryEntry::Failure { message } => {
                    let _ = writeln!(out, "\nError: {message}");
                }
                HistoryEntry::UserText { .. }
                | HistoryEntry::ClarificationPrompt { .. }
                | HistoryEntry::Choice { .. } => {}
            }
        }
        self.shown = session.history().len();
    }
}

fn print_clarification(c: &Clarification, out: &mut dyn Write) {
    let _ = writeln!(out, "\nWhich {} did you mean by \"{}\"?", c.kind, c.raw_value);
    for (i, cand) in c.candidates.iter().enumerate() {
        let _ = writeln!(out, "  {}) {}", i + 1, cand.canonical_name);
    }
    let _ = writeln!(out, "  p) keep \"{}\" as written", c.raw_value);
    if c.allows_custom {
        let _ = writeln!(out, "  or type a different value");
    }
}

/// Reads one answer to a clarification. `None` means stdin is exhausted.
fn read_choice(c: &Clarification, io: &mut Io<'_>) -> Option<UserChoice> {
    loop {
        let _ = write!(io.stdout, "Choice: ");
        let _ = io.stdout.flush();
        let mut line = String::new();
        match io.stdin.read_line(&mut line) {
            Ok(0) | Err(_) => {
                let _ = writeln!(io.stdout);
                return None;
            }
            Ok(_) => {}
        }
        let input = line.trim();
        if io.echo_input {
            let _ = writeln!(io.stdout, "{input}");
        }
        if input.is_empty() {
            continue;
        }
        if input.eq_ignore_ascii_case("p") {
            return Some(UserChoice::PassThrough);
        }
        if let Ok(n) = input.parse::<usize>() {
            if (1..=c.candidates.len()).contains(&n) {
                return Some(UserChoice::Select(n - 1));
            }
            let _ = writeln!(io.stdout, "Please enter a number between 1 and {}.", c.candidates.len());
            continue;
        }
        if c.allows_custom {
            return Some(UserChoice::Custom(input.to_string()));
        }
        let _ = writeln!(io.stdout, "Please enter a number or p.");
    }
}

fn cmd_query(env: &HashMap<String, String>, query: &str, cassettes: &Path, io: &mut Io<'_>) -> i32 {
    let engine = match open_engine(env, cassettes) {
        Ok(e) => e,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            return EXIT_FAILURE;
        }
    };
    let text = translate_linebreaks(query);
    let _ = writeln!(io.stdout, "Query:\n{text}\n");

    let mut session = Session::new("cli", true);
    let mut printer = Printer { shown: 0 };
    let mut step = session.submit_query(&engine, &text);
    loop {
        let result = match step {
            Ok(r) => r,
            Err(e) => {
                let _ = writeln!(io.stderr, "error: {e}");
                return EXIT_FAILURE;
            }
        };
        printer.flush(&session, io.stdout);
        match result {
            StepResult::FinalAnswer(_) => return EXIT_OK,
            StepResult::Failure { error, user_message } => {
                if session.history().is_empty() {
                    let _ = writeln!(io.stdout, "Error: {user_message}");
                }
                let _ = writeln!(io.stderr, "error: {error}");
                return EXIT_FAILURE;
            }
            StepResult::NeedsClarification(c) => {
                print_clarification(&c, io.stdout);
                let Some(choice) = read_choice(&c, io) else {
                    let _ = writeln!(io.stderr, "error: input ended before a choice was made");
                    return EXIT_FAILURE;
                };
                step = session.resolve_clarification(&engine, choice);
            }
        }
    }
}

fn cmd_serve(
    env: &HashMap<String, String>,
    addr: SocketAddr,
    ui_dir: PathBuf,
    cassettes: &Path,
    io: &mut Io<'_>,
) -> i32 {
    let engine = match open_engine(env, cassettes) {
        Ok(e) => e,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            return EXIT_FAILURE;
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            return EXIT_FAILURE;
        }
    };
    let _ = writeln!(io.stderr, "Listening on http://{addr}");
    let state = soccerrag_server::AppState::new(engine);
    match runtime.block_on(soccerrag_server::serve(state, addr, Some(ui_dir))) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(io.stderr, "error: {e}");
            EXIT_FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linebreak_translation() {
        assert_eq!(
            translate_linebreaks("Is Lionel or Henry in the database \\n What teams have they played for?"),
            "Is Lionel or Henry in the database\nWhat teams have they played for?"
        );
        assert_eq!(translate_linebreaks("plain"), "plain");
    }

    #[test]
    fn database_url_forms() {
        let mut env = HashMap::new();
        assert_eq!(database_path(&env), PathBuf::from("./data/games.db"));
        env.insert("DATABASE_URL".to_string(), "sqlite://x/y.db".to_string());
        assert_eq!(database_path(&env), PathBuf::from("x/y.db"));
    }
}
