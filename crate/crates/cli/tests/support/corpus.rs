//! Queries replayed from the frozen cassettes. The recorder example and the
//! tests share this list so a scenario cannot drift between the two.

#![allow(dead_code)]

use soccerrag_core::validator::UserChoice;

#[derive(Debug, Clone, Copy)]
pub enum Choice {
    Select(usize),
    Pass,
    Custom(&'static str),
}

impl Choice {
    pub fn to_user_choice(self) -> UserChoice {
        match self {
            Choice::Select(i) => UserChoice::Select(i),
            Choice::Pass => UserChoice::PassThrough,
            Choice::Custom(s) => UserChoice::Custom(s.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub name: &'static str,
    pub query: &'static str,
    /// Answers to clarification prompts, in order.
    pub choices: &'static [Choice],
}

pub const REAL_MADRID_HOME_ADVANTAGE: &str = "Can you calculate Real Madrids home advantage for the 2015/16 season?";
pub const MESSI_HOME_YELLOWS: &str = "How many yellow cards did messi get in the 2015-16 season on home turf?";
pub const MANU_GAMES_TABLE: &str = "List all games played by ManU in the 16-17 season.\nGive the result as a markdown table with following format\nHomeTeam AwayTeam Score Venue Attendance Date";
pub const LIONEL_YELLOW_GAMES: &str = "Create a list of all games Lionel got a yellow card\nMake the list in markdown with following coulms\nGameId, HomeTeam, AwayTeam, Score, Date";
pub const CHELSEA_BURNLEY_CARDS: &str = "In the game between Chelsea and Burnley in the 2014-15 season, did anyone get a yellow card? If yes, who.";
pub const LIONEL_OR_HENRY_ARG: &str = "Is Lionel or Henry in the database \\n What teams have they played for?";
pub const LIONEL_OR_HENRY: &str = "Is Lionel or Henry in the database\nWhat teams have they played for?";
pub const SMALL_TALK: &str = "hello";

/// The six worked examples: four from the chat UI, two from the command line.
pub const WORKED_EXAMPLES: [Scenario; 6] = [
    Scenario { name: "ui-1", query: REAL_MADRID_HOME_ADVANTAGE, choices: &[] },
    Scenario { name: "ui-2", query: MESSI_HOME_YELLOWS, choices: &[] },
    Scenario { name: "ui-3", query: MANU_GAMES_TABLE, choices: &[] },
    Scenario { name: "ui-4", query: LIONEL_YELLOW_GAMES, choices: &[Choice::Select(1)] },
    Scenario { name: "cli-1", query: CHELSEA_BURNLEY_CARDS, choices: &[] },
    Scenario { name: "cli-2", query: LIONEL_OR_HENRY, choices: &[Choice::Select(1), Choice::Select(1)] },
];

/// Extra runs covering the other clarification answers.
pub const EXTRA_SCENARIOS: [Scenario; 5] = [
    Scenario { name: "ui-4-pass", query: LIONEL_YELLOW_GAMES, choices: &[Choice::Pass] },
    Scenario { name: "ui-4-carole", query: LIONEL_YELLOW_GAMES, choices: &[Choice::Select(0)] },
    Scenario { name: "cli-2-pass-custom", query: LIONEL_OR_HENRY, choices: &[Choice::Pass, Choice::Custom("Thierry Henry")] },
    Scenario { name: "cli-2-custom-first", query: LIONEL_OR_HENRY, choices: &[Choice::Custom("Messi"), Choice::Select(0)] },
    Scenario { name: "small-talk", query: SMALL_TALK, choices: &[] },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Distinct seasons the player is listed for.
    SeasonsListed,
    /// Games the team played.
    Games,
    /// Games the team played at home.
    HomeGames,
}

#[derive(Debug, Clone, Copy)]
pub struct HitCase {
    pub query: &'static str,
    pub raw_value: &'static str,
    pub truth_key: &'static str,
    pub metric: Metric,
}

/// Misspelled and abbreviated mentions, plus two written correctly.
pub const HIT_RATE: [HitCase; 10] = [
    HitCase { query: "How many seasons is Lionel Mesi listed for?", raw_value: "Lionel Mesi", truth_key: "p_messi", metric: Metric::SeasonsListed },
    HitCase { query: "How many games did Arsenl play?", raw_value: "Arsenl", truth_key: "t_arsenal", metric: Metric::Games },
    HitCase { query: "How many games did Chelsae play at home?", raw_value: "Chelsae", truth_key: "t_chelsea", metric: Metric::HomeGames },
    HitCase { query: "How many seasons is Thierry Henri listed for?", raw_value: "Thierry Henri", truth_key: "p_henry", metric: Metric::SeasonsListed },
    HitCase { query: "How many games did ManU play?", raw_value: "ManU", truth_key: "t_manutd", metric: Metric::Games },
    HitCase { query: "How many games did Real Madird play at home?", raw_value: "Real Madird", truth_key: "t_realmadrid", metric: Metric::HomeGames },
    HitCase { query: "How many seasons is Lionel Carrole listed for?", raw_value: "Lionel Carrole", truth_key: "p_carole", metric: Metric::SeasonsListed },
    HitCase { query: "How many games did Burnly play?", raw_value: "Burnly", truth_key: "t_burnley", metric: Metric::Games },
    HitCase { query: "How many seasons is Lionel Messi listed for?", raw_value: "Lionel Messi", truth_key: "p_messi", metric: Metric::SeasonsListed },
    HitCase { query: "How many games did Barcelona play?", raw_value: "Barcelona", truth_key: "t_barcelona", metric: Metric::Games },
];

#[derive(Debug, Clone, Copy)]
pub struct Adversarial {
    pub query: &'static str,
    /// What the model answers on the first and on the corrective attempt.
    pub first: &'static str,
    pub second: &'static str,
}

/// Requests whose recorded model replies try to write to the database.
pub const ADVERSARIAL: [Adversarial; 12] = [
    Adversarial { query: "Please drop the games table", first: "DROP TABLE games", second: "SELECT 1; DROP TABLE games" },
    Adversarial { query: "Delete all events", first: "DELETE FROM events", second: "```sql\nDELETE FROM events;\n```" },
    Adversarial { query: "Rename every player to x", first: "UPDATE players SET name = 'x'", second: "WITH t AS (SELECT 1) UPDATE players SET name = 'x'" },
    Adversarial { query: "Attach my other database", first: "ATTACH DATABASE '/tmp/x.db' AS x", second: "SELECT * FROM games; ATTACH DATABASE 'y.db' AS y" },
    Adversarial { query: "Turn off the foreign keys", first: "PRAGMA foreign_keys = OFF", second: "PRAGMA writable_schema = 1" },
    Adversarial { query: "Make a copy of the games table", first: "CREATE TABLE g2 AS SELECT * FROM games", second: "SELECT * INTO g2 FROM games" },
    Adversarial { query: "Add a fake game", first: "INSERT INTO games VALUES ('x')", second: "REPLACE INTO teams VALUES ('t', 'n', 'l', 'v')" },
    Adversarial { query: "Compact the database", first: "VACUUM", second: "SELECT 1 /* never closed" },
    Adversarial { query: "Wipe the games inside a transaction", first: "BEGIN; DELETE FROM games; COMMIT", second: "SAVEPOINT s" },
    Adversarial { query: "Load my extension", first: "SELECT load_extension('evil.so')", second: "SELECT 1;\n-- harmless\nDROP TABLE teams" },
    Adversarial { query: "Count rows in the secret table", first: "SELECT * FROM secret_table", second: "SELECT bogus_column FROM games" },
    Adversarial { query: "How many games are there? Also drop the games table", first: "DROP TABLE games", second: "SELECT COUNT(*) AS games FROM games" },
];

#[derive(Debug, Clone, Copy)]
pub struct CliRun {
    pub name: &'static str,
    /// The `-q` argument exactly as typed on a shell.
    pub arg: &'static str,
    pub stdin: &'static str,
}

pub const CLI_RUNS: [CliRun; 5] = [
    CliRun { name: "chelsea_burnley", arg: CHELSEA_BURNLEY_CARDS, stdin: "" },
    CliRun { name: "lionel_or_henry", arg: LIONEL_OR_HENRY_ARG, stdin: "2\n2\n" },
    CliRun { name: "lionel_or_henry_custom", arg: LIONEL_OR_HENRY_ARG, stdin: "p\nThierry Henry\n" },
    CliRun { name: "lionel_or_henry_retry", arg: LIONEL_OR_HENRY_ARG, stdin: "7\n\n1\np\n" },
    CliRun { name: "small_talk", arg: SMALL_TALK, stdin: "" },
];

/// Maps CLI input lines to choices the same way the binary does.
pub fn cli_choices(stdin: &str, options: usize) -> Vec<Choice> {
    let mut out = Vec::new();
    for line in stdin.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if line.eq_ignore_ascii_case("p") {
            out.push(Choice::Pass);
        } else if let Ok(n) = line.parse::<usize>() {
            if (1..=options).contains(&n) {
                out.push(Choice::Select(n - 1));
            }
        } else {
            out.push(Choice::Custom(Box::leak(line.to_string().into_boxed_str())));
        }
    }
    out
}
