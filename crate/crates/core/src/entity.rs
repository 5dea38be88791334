use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The kinds of entity a query can mention. Each maps to one lookup
/// table/column pair in the database.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    League,
    Team,
    Player,
    Season,
    EventLabel,
    Venue,
}

impl EntityKind {
    pub const ALL: [EntityKind; 6] = [
        EntityKind::League,
        EntityKind::Team,
        EntityKind::Player,
        EntityKind::Season,
        EntityKind::EventLabel,
        EntityKind::Venue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::League => "league",
            EntityKind::Team => "team",
            EntityKind::Player => "player",
            EntityKind::Season => "season",
            EntityKind::EventLabel => "event_label",
            EntityKind::Venue => "venue",
        }
    }

    /// One-line definition used in the extraction prompt.
    pub fn definition(self) -> &'static str {
        match self {
            EntityKind::League => "a competition such as a national top division",
            EntityKind::Team => "a club or team name, including nicknames and abbreviations",
            EntityKind::Player => "a person who plays for a team, full name or part of it",
            EntityKind::Season => "a season such as 2015-16, 2015/16 or 16-17",
            EntityKind::EventLabel => {
                "a kind of in-game event such as goal, yellow card, red card, substitution"
            }
            EntityKind::Venue => "a stadium or ground where games are played",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or(())
    }
}

/// A database row an entity mention was matched to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub primary_key: String,
    pub canonical_name: String,
}

/// One entity mention pulled out of a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedProperty {
    pub kind: EntityKind,
    /// Surface form as written in the query.
    pub raw_value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<Resolution>,
}

impl ExtractedProperty {
    pub fn new(kind: EntityKind, raw_value: impl Into<String>) -> Self {
        Self {
            kind,
            raw_value: raw_value.into(),
            resolved: None,
        }
    }

    pub fn resolved_to(mut self, primary_key: impl Into<String>, canonical_name: impl Into<String>) -> Self {
        self.resolved = Some(Resolution {
            primary_key: primary_key.into(),
            canonical_name: canonical_name.into(),
        });
        self
    }
}

/// A lookup-table row offered to the validator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LookupEntry {
    pub primary_key: String,
    pub canonical_name: String,
}

impl LookupEntry {
    pub fn new(primary_key: impl Into<String>, canonical_name: impl Into<String>) -> Self {
        Self {
            primary_key: primary_key.into(),
            canonical_name: canonical_name.into(),
        }
    }
}
