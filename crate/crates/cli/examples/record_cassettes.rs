//! Regenerates `fixtures/cassettes/*.jsonl` by running every scenario in the
//! test corpus through the real pipeline in record mode.
//!
//! The model on the other end is a scripted stand-in: it answers extraction
//! prompts from a table, writes SQL from the validated-entities block of the
//! generation prompt, and summarizes by echoing the result rows. Run with
//!
//! ```text
//! cargo run -p soccerrag-cli --example record_cassettes
//! ```

#[path = "../tests/support/corpus.rs"]
mod corpus;

use std::fs;
use std::path::{Path, PathBuf};

use corpus::{Choice, Metric, Scenario, ADVERSARIAL, CLI_RUNS, EXTRA_SCENARIOS, HIT_RATE, WORKED_EXAMPLES};
use soccerrag_core::config::{DEFAULT_FEW_SHOT, DEFAULT_MODEL};
use soccerrag_core::database::{build_database, DatabaseHandle};
use soccerrag_core::dataset::parse_dataset;
use soccerrag_core::gateway::{ChatTransport, CompletionRequest, Gateway, TransportError, TransportReply};
use soccerrag_core::session::{Engine, Session, StepResult};
use soccerrag_core::validator::UserChoice;

#[derive(Debug)]
struct Entity {
    kind: String,
    raw: String,
    key: Option<String>,
}

fn parse_entities(user: &str) -> Vec<Entity> {
    let Some((_, block)) = user.split_once("Validated entities:\n") else {
        return Vec::new();
    };
    block
        .lines()
        .filter_map(|line| {
            let line = line.strip_prefix("- ")?;
            let (kind, rest) = line.split_once(": \"")?;
            let (raw, rest) = rest.split_once('"')?;
            let key = rest
                .split_once("(primary key ")
                .map(|(_, k)| k.trim_end_matches(')').to_string());
            Some(Entity { kind: kind.to_string(), raw: raw.to_string(), key })
        })
        .collect()
}

fn question_of(user: &str) -> &str {
    let body = user.strip_prefix("Question:\n").unwrap_or(user);
    body.split("\n\n").next().unwrap_or(body)
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Predicate on a key column: the primary key when known, else a name match.
fn key_filter(col: &str, e: &Entity) -> String {
    match (&e.key, e.kind.as_str()) {
        (Some(k), _) => format!("{col} = {}", quote(k)),
        (None, "player") => format!(
            "{col} IN (SELECT player_key FROM players WHERE name LIKE {})",
            quote(&format!("%{}%", e.raw))
        ),
        (None, "team") => format!(
            "{col} IN (SELECT team_key FROM teams WHERE name LIKE {})",
            quote(&format!("%{}%", e.raw))
        ),
        (None, _) => format!("{col} = {}", quote(&e.raw)),
    }
}

fn of_kind<'a>(entities: &'a [Entity], kind: &str) -> Vec<&'a Entity> {
    entities.iter().filter(|e| e.kind == kind).collect()
}

const SCORE: &str = "g.home_score || '-' || g.away_score";
const TEAMS_JOIN: &str =
    "JOIN teams ht ON ht.team_key = g.home_team_key JOIN teams at ON at.team_key = g.away_team_key";

fn write_sql(question: &str, entities: &[Entity]) -> String {
    let player = of_kind(entities, "player");
    let team = of_kind(entities, "team");
    let season = of_kind(entities, "season");
    let label = of_kind(entities, "event_label");

    if question == corpus::REAL_MADRID_HOME_ADVANTAGE {
        let t = team[0];
        return format!(
            "SELECT AVG(CASE WHEN {} THEN home_score - away_score END) - AVG(CASE WHEN {} THEN away_score - home_score END) AS home_advantage FROM games WHERE {}",
            key_filter("home_team_key", t),
            key_filter("away_team_key", t),
            key_filter("season", season[0])
        );
    }
    if question == corpus::MESSI_HOME_YELLOWS {
        return format!(
            "SELECT COUNT(*) AS yellow_cards FROM events e JOIN games g ON g.game_key = e.game_key WHERE {} AND {} AND {} AND e.team_key = g.home_team_key",
            key_filter("e.player_key", player[0]),
            key_filter("e.label", label[0]),
            key_filter("g.season", season[0])
        );
    }
    if question == corpus::MANU_GAMES_TABLE {
        return format!(
            "SELECT ht.name AS HomeTeam, at.name AS AwayTeam, {SCORE} AS Score, g.venue AS Venue, g.attendance AS Attendance, g.date AS Date FROM games g {TEAMS_JOIN} WHERE {} AND ({} OR {}) ORDER BY g.date",
            key_filter("g.season", season[0]),
            key_filter("g.home_team_key", team[0]),
            key_filter("g.away_team_key", team[0])
        );
    }
    if question == corpus::LIONEL_YELLOW_GAMES {
        return format!(
            "SELECT DISTINCT g.game_key AS GameId, ht.name AS HomeTeam, at.name AS AwayTeam, {SCORE} AS Score, g.date AS Date FROM events e JOIN games g ON g.game_key = e.game_key {TEAMS_JOIN} WHERE {} AND {} ORDER BY g.date, g.game_key",
            key_filter("e.player_key", player[0]),
            key_filter("e.label", label[0])
        );
    }
    if question == corpus::CHELSEA_BURNLEY_CARDS {
        let (a, b) = (team[0], team[1]);
        return format!(
            "SELECT DISTINCT p.name AS player FROM events e JOIN games g ON g.game_key = e.game_key JOIN players p ON p.player_key = e.player_key WHERE {} AND {} AND (({} AND {}) OR ({} AND {})) ORDER BY p.name",
            key_filter("g.season", season[0]),
            key_filter("e.label", label[0]),
            key_filter("g.home_team_key", a),
            key_filter("g.away_team_key", b),
            key_filter("g.home_team_key", b),
            key_filter("g.away_team_key", a)
        );
    }
    if question == corpus::LIONEL_OR_HENRY {
        let filters: Vec<String> = player.iter().map(|p| key_filter("pt.player_key", p)).collect();
        return format!(
            "SELECT p.name AS Player, t.name AS Team, pt.season AS Season FROM player_teams pt JOIN players p ON p.player_key = pt.player_key JOIN teams t ON t.team_key = pt.team_key WHERE {} ORDER BY p.name, pt.season",
            filters.join(" OR ")
        );
    }
    if let Some(case) = HIT_RATE.iter().find(|c| c.query == question) {
        return match case.metric {
            Metric::SeasonsListed => format!(
                "SELECT COUNT(DISTINCT pt.season) AS seasons FROM player_teams pt WHERE {}",
                key_filter("pt.player_key", player[0])
            ),
            Metric::Games => format!(
                "SELECT COUNT(*) AS games FROM games g WHERE {} OR {}",
                key_filter("g.home_team_key", team[0]),
                key_filter("g.away_team_key", team[0])
            ),
            Metric::HomeGames => format!(
                "SELECT COUNT(*) AS home_games FROM games g WHERE {}",
                key_filter("g.home_team_key", team[0])
            ),
        };
    }
    if let Some(adv) = ADVERSARIAL.iter().find(|a| a.query == question) {
        return adv.first.to_string();
    }
    if question == corpus::SMALL_TALK {
        return "SELECT 'Hello! Ask me about games, teams, players or events.' AS reply".to_string();
    }
    panic!("no scripted SQL for question {question:?}");
}

fn extraction_for(query: &str) -> String {
    let items: Vec<(&str, &str)> = match query {
        corpus::REAL_MADRID_HOME_ADVANTAGE => vec![("team", "Real Madrids"), ("season", "2015/16")],
        corpus::MESSI_HOME_YELLOWS => vec![("player", "messi"), ("season", "2015-16"), ("event_label", "yellow cards")],
        corpus::MANU_GAMES_TABLE => vec![("team", "ManU"), ("season", "16-17")],
        corpus::LIONEL_YELLOW_GAMES => vec![("player", "Lionel"), ("event_label", "yellow card")],
        corpus::CHELSEA_BURNLEY_CARDS => vec![
            ("team", "Chelsea"),
            ("team", "Burnley"),
            ("season", "2014-15"),
            ("event_label", "yellow card"),
        ],
        corpus::LIONEL_OR_HENRY => vec![("player", "Lionel"), ("player", "Henry")],
        corpus::SMALL_TALK => vec![],
        q => {
            if let Some(case) = HIT_RATE.iter().find(|c| c.query == q) {
                let kind = if case.metric == Metric::SeasonsListed { "player" } else { "team" };
                vec![(kind, case.raw_value)]
            } else if ADVERSARIAL.iter().any(|a| a.query == q) {
                vec![]
            } else {
                panic!("no scripted extraction for {q:?}")
            }
        }
    };
    let list: Vec<serde_json::Value> = items
        .into_iter()
        .map(|(k, v)| serde_json::json!({ "kind": k, "value": v }))
        .collect();
    serde_json::json!({ "properties": list }).to_string()
}

fn summarize(user: &str) -> String {
    let question = question_of(user);
    let (_, rows) = user.split_once("\nRows (").expect("summary prompt carries rows");
    let (count, table) = rows.split_once("):\n").expect("row header");
    let count: usize = count.split(',').next().unwrap().trim().parse().unwrap();
    let table = table.trim_end();
    if count == 0 {
        return "I could not find any matching data in the archive.".to_string();
    }
    if question.to_lowercase().contains("markdown") {
        return table.to_string();
    }
    let lines: Vec<&str> = table.lines().collect();
    let single_cell = count == 1 && !lines[0].trim_matches('|').contains('|');
    if single_cell {
        let value = lines[2].trim_matches(|c| c == '|' || c == ' ');
        return format!("The answer is {value}.");
    }
    format!("Here is what I found:\n\n{table}")
}

struct StandIn;

impl ChatTransport for StandIn {
    fn send(&self, request: &CompletionRequest) -> Result<TransportReply, TransportError> {
        let system = &request.messages[0].content;
        let user = &request.messages[1].content;
        let text = if request.structured_output_schema.is_some() {
            extraction_for(user)
        } else if system.starts_with("You write SQLite queries") {
            let question = question_of(user);
            if request.messages.len() > 2 {
                ADVERSARIAL
                    .iter()
                    .find(|a| a.query == question)
                    .map(|a| a.second.to_string())
                    .unwrap_or_else(|| panic!("unexpected correction for {question:?}"))
            } else {
                write_sql(question, &parse_entities(user))
            }
        } else {
            summarize(user)
        };
        Ok(TransportReply { text, usage: None })
    }
}

fn engine(db_path: &Path, cassettes: &Path, file: &str, validator: bool) -> Engine {
    let gateway = Gateway::record(Box::new(StandIn), cassettes, file).expect("cassette file");
    let db = DatabaseHandle::open(db_path).expect("database");
    let engine = Engine::new(gateway, db, DEFAULT_MODEL, DEFAULT_FEW_SHOT).expect("engine");
    if validator {
        engine
    } else {
        engine.without_validator()
    }
}

fn play(engine: &Engine, name: &str, query: &str, choices: &[UserChoice]) {
    let mut session = Session::new(name, true);
    let mut result = session.submit_query(engine, query).expect("submit");
    let mut choices = choices.iter();
    loop {
        match result {
            StepResult::FinalAnswer(_) => break,
            StepResult::Failure { error, .. } => {
                println!("  {name}: failure ({error})");
                return;
            }
            StepResult::NeedsClarification(c) => {
                let choice = choices
                    .next()
                    .cloned()
                    .unwrap_or_else(|| panic!("{name}: no scripted answer for {:?}", c.raw_value));
                result = session.resolve_clarification(engine, choice).expect("clarify");
            }
        }
    }
    println!("  {name}: answered");
}

fn scenario_choices(s: &Scenario) -> Vec<UserChoice> {
    s.choices.iter().map(|c| c.to_user_choice()).collect()
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let cassettes = root.join("fixtures/cassettes");
    fs::create_dir_all(&cassettes).unwrap();
    for entry in fs::read_dir(&cassettes).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "jsonl") {
            fs::remove_file(path).unwrap();
        }
    }

    let bundle = parse_dataset(&root.join("data")).expect("dataset");
    let tmp = std::env::temp_dir().join(format!("soccerrag-record-{}", std::process::id()));
    let db_path = tmp.join("games.db");
    build_database(&bundle, &db_path).expect("database");

    println!("worked examples");
    let eng = engine(&db_path, &cassettes, "worked_examples.jsonl", true);
    for s in WORKED_EXAMPLES.iter().chain(EXTRA_SCENARIOS.iter()) {
        play(&eng, s.name, s.query, &scenario_choices(s));
    }

    println!("command line runs");
    let eng = engine(&db_path, &cassettes, "cli.jsonl", true);
    for run in CLI_RUNS {
        let query = soccerrag_cli::translate_linebreaks(run.arg);
        let choices: Vec<UserChoice> = corpus::cli_choices(run.stdin, 2).into_iter().map(Choice::to_user_choice).collect();
        play(&eng, run.name, &query, &choices);
    }

    println!("hit rate");
    let on = engine(&db_path, &cassettes, "hit_rate.jsonl", true);
    for case in HIT_RATE {
        play(&on, case.raw_value, case.query, &[UserChoice::Select(0)]);
    }
    drop(on);
    let off = engine(&db_path, &cassettes, "hit_rate.jsonl", false);
    for case in HIT_RATE {
        play(&off, case.raw_value, case.query, &[]);
    }

    println!("adversarial");
    let eng = engine(&db_path, &cassettes, "adversarial.jsonl", true);
    for adv in ADVERSARIAL {
        play(&eng, adv.query, adv.query, &[]);
    }

    let _ = fs::remove_dir_all(tmp);
}
