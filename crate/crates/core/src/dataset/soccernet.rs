//! Adapter for SoccerNet `Labels-v2.json` action annotations.
//!
//! SoccerNet annotates each game with spotted actions (`gameTime`, `label`,
//! `team` as `"home"`/`"away"`/`"not applicable"`). They carry no player
//! identity, so converted events have `player_key: None`. Annotations that
//! are not attributed to either side are skipped and counted.

use serde::Deserialize;

use super::{EventRecord, GameRecord, GameTime};

#[derive(Debug, Deserialize)]
struct LabelsFile {
    annotations: Vec<Annotation>,
}

#[derive(Debug, Deserialize)]
struct Annotation {
    #[serde(rename = "gameTime")]
    game_time: String,
    label: String,
    #[serde(default)]
    team: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvertedLabels {
    pub events: Vec<EventRecord>,
    pub skipped: usize,
}

/// Converts one game's `Labels-v2.json` into event records for `game`.
pub fn events_from_labels(json: &str, game: &GameRecord) -> Result<ConvertedLabels, String> {
    let labels: LabelsFile = serde_json::from_str(json).map_err(|e| e.to_string())?;
    let mut events = Vec::new();
    let mut skipped = 0;
    for (n, a) in labels.annotations.into_iter().enumerate() {
        let team_key = match a.team.as_str() {
            "home" => game.home_team_key.clone(),
            "away" => game.away_team_key.clone(),
            _ => {
                skipped += 1;
                continue;
            }
        };
        let game_time: GameTime = a
            .game_time
            .parse()
            .map_err(|e| format!("annotation {}: {e}", n + 1))?;
        events.push(EventRecord {
            event_key: format!("{}_sn{:04}", game.game_key, n + 1),
            game_key: game.game_key.clone(),
            label: a.label,
            game_time,
            team_key,
            player_key: None,
        });
    }
    Ok(ConvertedLabels { events, skipped })
}
