//! Textual dataset format and its in-memory bundle.
//!
//! A dataset directory holds one JSON Lines file per entity kind:
//! `leagues.jsonl`, `teams.jsonl`, `players.jsonl`, `games.jsonl`,
//! `events.jsonl` and `captions.jsonl`. Each non-blank line is one record.
//! [`parse_dataset`] checks record shape, then cross-references, and reports
//! every broken reference together with the file and line that holds it.

pub mod fixture;
pub mod soccernet;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Highest minute accepted in a half, stoppage time included.
pub const MAX_GAME_MINUTE: u32 = 130;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FileKind {
    Leagues,
    Teams,
    Players,
    Games,
    Events,
    Captions,
}

impl FileKind {
    pub const ALL: [FileKind; 6] = [
        FileKind::Leagues,
        FileKind::Teams,
        FileKind::Players,
        FileKind::Games,
        FileKind::Events,
        FileKind::Captions,
    ];

    pub fn stem(self) -> &'static str {
        match self {
            FileKind::Leagues => "leagues",
            FileKind::Teams => "teams",
            FileKind::Players => "players",
            FileKind::Games => "games",
            FileKind::Events => "events",
            FileKind::Captions => "captions",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.jsonl", self.stem())
    }
}

impl fmt::Display for FileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.stem())
    }
}

/// The entity a key refers to, used in integrity reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RefKind {
    League,
    Team,
    Player,
    Game,
    Event,
    Caption,
}

impl fmt::Display for RefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefKind::League => "league",
            RefKind::Team => "team",
            RefKind::Player => "player",
            RefKind::Game => "game",
            RefKind::Event => "event",
            RefKind::Caption => "caption",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    pub line: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntegrityIssue {
    DanglingReference {
        kind: RefKind,
        key: String,
        at: Location,
    },
    DuplicateKey {
        kind: RefKind,
        key: String,
        at: Location,
    },
    DuplicateName {
        kind: RefKind,
        name: String,
        at: Location,
    },
}

impl fmt::Display for IntegrityIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntegrityIssue::DanglingReference { kind, key, at } => {
                write!(f, "{at}: reference to unknown {kind} {key:?}")
            }
            IntegrityIssue::DuplicateKey { kind, key, at } => {
                write!(f, "{at}: duplicate {kind} key {key:?}")
            }
            IntegrityIssue::DuplicateName { kind, name, at } => {
                write!(f, "{at}: duplicate {kind} name {name:?}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing dataset file for {0}")]
    MissingFile(FileKind),
    #[error("{file}:{line}: malformed record: {reason}")]
    MalformedRecord {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("dataset integrity check failed:\n{}", render_issues(.0))]
    Integrity(Vec<IntegrityIssue>),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn render_issues(issues: &[IntegrityIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl IngestError {
    /// All dangling references carried by an integrity failure.
    pub fn dangling(&self) -> Vec<(RefKind, &str)> {
        match self {
            IngestError::Integrity(issues) => issues
                .iter()
                .filter_map(|i| match i {
                    IntegrityIssue::DanglingReference { kind, key, .. } => {
                        Some((*kind, key.as_str()))
                    }
                    _ => None,
                })
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Half and clock position of an event, serialized as `"<half> - mm:ss"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GameTime {
    pub half: u8,
    pub minute: u32,
    pub second: u32,
}

impl GameTime {
    pub fn new(half: u8, minute: u32, second: u32) -> Result<Self, String> {
        if !(1..=2).contains(&half) {
            return Err(format!("half must be 1 or 2, got {half}"));
        }
        if minute > MAX_GAME_MINUTE {
            return Err(format!("minute {minute} exceeds {MAX_GAME_MINUTE}"));
        }
        if second >= 60 {
            return Err(format!("second {second} out of range"));
        }
        Ok(Self {
            half,
            minute,
            second,
        })
    }
}

impl fmt::Display for GameTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} - {:02}:{:02}", self.half, self.minute, self.second)
    }
}

impl FromStr for GameTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (half, clock) = s
            .split_once('-')
            .ok_or_else(|| format!("game time {s:?} is not '<half> - mm:ss'"))?;
        let (mm, ss) = clock
            .trim()
            .split_once(':')
            .ok_or_else(|| format!("game time {s:?} has no mm:ss clock"))?;
        let half = half
            .trim()
            .parse::<u8>()
            .map_err(|e| format!("bad half in {s:?}: {e}"))?;
        let minute = mm
            .parse::<u32>()
            .map_err(|e| format!("bad minute in {s:?}: {e}"))?;
        let second = ss
            .parse::<u32>()
            .map_err(|e| format!("bad second in {s:?}: {e}"))?;
        GameTime::new(half, minute, second)
    }
}

impl Serialize for GameTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GameTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Checks the canonical `YYYY-YYYY` season shape with consecutive years.
pub fn is_canonical_season(s: &str) -> bool {
    let Some((a, b)) = s.split_once('-') else {
        return false;
    };
    if a.len() != 4 || b.len() != 4 {
        return false;
    }
    match (a.parse::<u32>(), b.parse::<u32>()) {
        (Ok(a), Ok(b)) => b == a + 1,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeagueRecord {
    pub league_key: String,
    pub name: String,
    pub country: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamRecord {
    pub team_key: String,
    pub name: String,
    pub league_key: String,
    pub venue: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affiliation {
    pub season: String,
    pub team_key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerRecord {
    pub player_key: String,
    pub name: String,
    #[serde(default)]
    pub affiliations: Vec<Affiliation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameRecord {
    pub game_key: String,
    pub season: String,
    pub league_key: String,
    pub home_team_key: String,
    pub away_team_key: String,
    pub home_score: u32,
    pub away_score: u32,
    pub date: NaiveDate,
    pub venue: String,
    pub attendance: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub event_key: String,
    pub game_key: String,
    pub label: String,
    pub game_time: GameTime,
    pub team_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionRecord {
    pub caption_key: String,
    pub game_key: String,
    /// Seconds from kick-off.
    pub start_time: u32,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetBundle {
    pub leagues: Vec<LeagueRecord>,
    pub teams: Vec<TeamRecord>,
    pub players: Vec<PlayerRecord>,
    pub games: Vec<GameRecord>,
    pub events: Vec<EventRecord>,
    pub captions: Vec<CaptionRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub leagues: usize,
    pub teams: usize,
    pub players: usize,
    pub games: usize,
    pub events: usize,
    pub captions: usize,
}

impl DatasetBundle {
    pub fn counts(&self) -> RecordCounts {
        RecordCounts {
            leagues: self.leagues.len(),
            teams: self.teams.len(),
            players: self.players.len(),
            games: self.games.len(),
            events: self.events.len(),
            captions: self.captions.len(),
        }
    }

    /// Distinct seasons played, sorted.
    pub fn seasons(&self) -> BTreeSet<&str> {
        self.games.iter().map(|g| g.season.as_str()).collect()
    }

    pub fn team(&self, key: &str) -> Option<&TeamRecord> {
        self.teams.iter().find(|t| t.team_key == key)
    }

    pub fn player(&self, key: &str) -> Option<&PlayerRecord> {
        self.players.iter().find(|p| p.player_key == key)
    }

    pub fn game(&self, key: &str) -> Option<&GameRecord> {
        self.games.iter().find(|g| g.game_key == key)
    }

    /// Every cross-reference and uniqueness violation, in file order.
    /// Line numbers are 1-based positions within each list.
    pub fn integrity_issues(&self) -> Vec<IntegrityIssue> {
        let mut issues = Vec::new();
        let at = |kind: FileKind, idx: usize| Location {
            file: kind.file_name(),
            line: idx + 1,
        };

        fn keyset<'a, T>(
            items: &'a [T],
            key: impl Fn(&T) -> &str,
            name: impl Fn(&T) -> Option<&str>,
            kind: RefKind,
            file: FileKind,
            issues: &mut Vec<IntegrityIssue>,
        ) -> BTreeSet<&'a str>
        where
            T: 'a,
        {
            let mut keys = BTreeSet::new();
            let mut names = BTreeSet::new();
            for (idx, item) in items.iter().enumerate() {
                let loc = Location {
                    file: file.file_name(),
                    line: idx + 1,
                };
                let k: &'a str = key(item);
                if !keys.insert(k) {
                    issues.push(IntegrityIssue::DuplicateKey {
                        kind,
                        key: k.to_string(),
                        at: loc.clone(),
                    });
                }
                if let Some(n) = name(item) {
                    if !names.insert(n.to_string()) {
                        issues.push(IntegrityIssue::DuplicateName {
                            kind,
                            name: n.to_string(),
                            at: loc,
                        });
                    }
                }
            }
            keys
        }

        let leagues = keyset(
            &self.leagues,
            |l| l.league_key.as_str(),
            |l| Some(l.name.as_str()),
            RefKind::League,
            FileKind::Leagues,
            &mut issues,
        );
        let teams = keyset(
            &self.teams,
            |t| t.team_key.as_str(),
            |t| Some(t.name.as_str()),
            RefKind::Team,
            FileKind::Teams,
            &mut issues,
        );
        let players = keyset(
            &self.players,
            |p| p.player_key.as_str(),
            |p| Some(p.name.as_str()),
            RefKind::Player,
            FileKind::Players,
            &mut issues,
        );
        let games = keyset(
            &self.games,
            |g| g.game_key.as_str(),
            |_| None,
            RefKind::Game,
            FileKind::Games,
            &mut issues,
        );
        keyset(
            &self.events,
            |e| e.event_key.as_str(),
            |_| None,
            RefKind::Event,
            FileKind::Events,
            &mut issues,
        );
        keyset(
            &self.captions,
            |c| c.caption_key.as_str(),
            |_| None,
            RefKind::Caption,
            FileKind::Captions,
            &mut issues,
        );

        let mut dangling = |kind: RefKind, key: &str, known: &BTreeSet<&str>, loc: Location| {
            if !known.contains(key) {
                issues.push(IntegrityIssue::DanglingReference {
                    kind,
                    key: key.to_string(),
                    at: loc,
                });
            }
        };

        for (i, t) in self.teams.iter().enumerate() {
            dangling(RefKind::League, &t.league_key, &leagues, at(FileKind::Teams, i));
        }
        for (i, p) in self.players.iter().enumerate() {
            for a in &p.affiliations {
                dangling(RefKind::Team, &a.team_key, &teams, at(FileKind::Players, i));
            }
        }
        for (i, g) in self.games.iter().enumerate() {
            dangling(RefKind::League, &g.league_key, &leagues, at(FileKind::Games, i));
            dangling(RefKind::Team, &g.home_team_key, &teams, at(FileKind::Games, i));
            dangling(RefKind::Team, &g.away_team_key, &teams, at(FileKind::Games, i));
        }
        for (i, e) in self.events.iter().enumerate() {
            dangling(RefKind::Game, &e.game_key, &games, at(FileKind::Events, i));
            dangling(RefKind::Team, &e.team_key, &teams, at(FileKind::Events, i));
            if let Some(p) = &e.player_key {
                dangling(RefKind::Player, p, &players, at(FileKind::Events, i));
            }
        }
        for (i, c) in self.captions.iter().enumerate() {
            dangling(RefKind::Game, &c.game_key, &games, at(FileKind::Captions, i));
        }
        issues
    }
}

/// Per-record checks that do not need the rest of the bundle.
trait RecordCheck {
    fn check(&self) -> Result<(), String>;
}

fn require_non_empty(field: &str, value: &str) -> Result<(), String> {
    if value.trim().is_empty() {
        Err(format!("{field} must not be empty"))
    } else {
        Ok(())
    }
}

impl RecordCheck for LeagueRecord {
    fn check(&self) -> Result<(), String> {
        require_non_empty("league_key", &self.league_key)?;
        require_non_empty("name", &self.name)
    }
}

impl RecordCheck for TeamRecord {
    fn check(&self) -> Result<(), String> {
        require_non_empty("team_key", &self.team_key)?;
        require_non_empty("name", &self.name)
    }
}

impl RecordCheck for PlayerRecord {
    fn check(&self) -> Result<(), String> {
        require_non_empty("player_key", &self.player_key)?;
        require_non_empty("name", &self.name)?;
        for a in &self.affiliations {
            if !is_canonical_season(&a.season) {
                return Err(format!("affiliation season {:?} is not YYYY-YYYY", a.season));
            }
        }
        Ok(())
    }
}

impl RecordCheck for GameRecord {
    fn check(&self) -> Result<(), String> {
        require_non_empty("game_key", &self.game_key)?;
        if !is_canonical_season(&self.season) {
            return Err(format!("season {:?} is not YYYY-YYYY", self.season));
        }
        if self.home_team_key == self.away_team_key {
            return Err(format!(
                "home and away team are both {:?}",
                self.home_team_key
            ));
        }
        Ok(())
    }
}

impl RecordCheck for EventRecord {
    fn check(&self) -> Result<(), String> {
        require_non_empty("event_key", &self.event_key)?;
        require_non_empty("label", &self.label)
    }
}

impl RecordCheck for CaptionRecord {
    fn check(&self) -> Result<(), String> {
        require_non_empty("caption_key", &self.caption_key)?;
        require_non_empty("text", &self.text)
    }
}

fn read_records<T>(root: &Path, kind: FileKind) -> Result<Vec<T>, IngestError>
where
    T: for<'de> Deserialize<'de> + RecordCheck,
{
    let path = root.join(kind.file_name());
    let content = match fs::read_to_string(&path) {
        Ok(c) => c,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(IngestError::MissingFile(kind))
        }
        Err(source) => {
            return Err(IngestError::Io {
                path: path.display().to_string(),
                source,
            })
        }
    };
    let mut out = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| IngestError::MalformedRecord {
            file: kind.file_name(),
            line: idx + 1,
            reason,
        };
        let record: T = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        record.check().map_err(malformed)?;
        out.push(record);
    }
    Ok(out)
}

/// Reads and validates a dataset directory.
pub fn parse_dataset(root: &Path) -> Result<DatasetBundle, IngestError> {
    // Report a missing file before any parse error in another file.
    for kind in FileKind::ALL {
        if !root.join(kind.file_name()).is_file() {
            return Err(IngestError::MissingFile(kind));
        }
    }
    let bundle = DatasetBundle {
        leagues: read_records(root, FileKind::Leagues)?,
        teams: read_records(root, FileKind::Teams)?,
        players: read_records(root, FileKind::Players)?,
        games: read_records(root, FileKind::Games)?,
        events: read_records(root, FileKind::Events)?,
        captions: read_records(root, FileKind::Captions)?,
    };
    let issues = bundle.integrity_issues();
    if issues.is_empty() {
        Ok(bundle)
    } else {
        Err(IngestError::Integrity(issues))
    }
}

fn write_records<T: Serialize>(root: &Path, kind: FileKind, items: &[T]) -> Result<(), IngestError> {
    let path = root.join(kind.file_name());
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).expect("records serialize to JSON");
        buf.push(b'\n');
    }
    let mut file = fs::File::create(&path).map_err(io_err)?;
    file.write_all(&buf).map_err(io_err)
}

/// Writes a bundle in the layout [`parse_dataset`] reads.
pub fn write_dataset(bundle: &DatasetBundle, root: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(root).map_err(|source| IngestError::Io {
        path: root.display().to_string(),
        source,
    })?;
    write_records(root, FileKind::Leagues, &bundle.leagues)?;
    write_records(root, FileKind::Teams, &bundle.teams)?;
    write_records(root, FileKind::Players, &bundle.players)?;
    write_records(root, FileKind::Games, &bundle.games)?;
    write_records(root, FileKind::Events, &bundle.events)?;
    write_records(root, FileKind::Captions, &bundle.captions)
}

/// Event counts keyed by label, handy for reports.
pub fn label_histogram(bundle: &DatasetBundle) -> BTreeMap<&str, usize> {
    let mut out = BTreeMap::new();
    for e in &bundle.events {
        *out.entry(e.label.as_str()).or_insert(0) += 1;
    }
    out
}
