//! Deterministic synthetic datasets.
//!
//! Every fixture contains a fixed set of anchor entities (see the `ANCHOR_*`
//! tables) so that the example questions the engine is demonstrated with
//! always have something to resolve against: Manchester United, two players
//! named Lionel, two players named Henry, a Chelsea v Burnley game in
//! 2014-2015, and at least one yellow card per season. Everything else is
//! drawn from fixed name pools with a seeded ChaCha stream.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    Affiliation, CaptionRecord, DatasetBundle, EventRecord, GameRecord, GameTime, LeagueRecord,
    PlayerRecord, TeamRecord,
};

pub const SEASONS: [&str; 3] = ["2014-2015", "2015-2016", "2016-2017"];

pub const YELLOW_CARD: &str = "Yellow card";
pub const RED_CARD: &str = "Red card";
pub const GOAL: &str = "Goal";

/// Labels the generator draws filler events from. Goals are derived from the
/// score line instead.
pub const FILLER_LABELS: [&str; 7] = [
    YELLOW_CARD,
    "Substitution",
    "Corner",
    "Foul",
    "Offside",
    "Shots on target",
    RED_CARD,
];

/// Labels whose events carry a player.
const PLAYER_LABELS: [&str; 6] = [GOAL, YELLOW_CARD, RED_CARD, "Substitution", "Foul", "Shots on target"];

/// (key, name, country)
pub const LEAGUES: [(&str, &str, &str); 5] = [
    ("l_epl", "Premier League", "England"),
    ("l_laliga", "La Liga", "Spain"),
    ("l_seriea", "Serie A", "Italy"),
    ("l_bundesliga", "Bundesliga", "Germany"),
    ("l_ligue1", "Ligue 1", "France"),
];

/// (key, name, league, venue); always present.
pub const ANCHOR_TEAMS: [(&str, &str, &str, &str); 6] = [
    ("t_manutd", "Manchester United", "l_epl", "Old Trafford"),
    ("t_chelsea", "Chelsea", "l_epl", "Stamford Bridge"),
    ("t_burnley", "Burnley", "l_epl", "Turf Moor"),
    ("t_arsenal", "Arsenal", "l_epl", "Emirates Stadium"),
    ("t_realmadrid", "Real Madrid", "l_laliga", "Santiago Bernabeu"),
    ("t_barcelona", "Barcelona", "l_laliga", "Camp Nou"),
];

/// (key, name, league, venue); drawn as needed.
pub const EXTRA_TEAMS: [(&str, &str, &str, &str); 22] = [
    ("t_mancity", "Manchester City", "l_epl", "Etihad Stadium"),
    ("t_liverpool", "Liverpool", "l_epl", "Anfield"),
    ("t_everton", "Everton", "l_epl", "Goodison Park"),
    ("t_tottenham", "Tottenham Hotspur", "l_epl", "White Hart Lane"),
    ("t_atletico", "Atletico Madrid", "l_laliga", "Vicente Calderon"),
    ("t_sevilla", "Sevilla", "l_laliga", "Ramon Sanchez Pizjuan"),
    ("t_valencia", "Valencia", "l_laliga", "Mestalla"),
    ("t_villarreal", "Villarreal", "l_laliga", "El Madrigal"),
    ("t_juventus", "Juventus", "l_seriea", "Juventus Stadium"),
    ("t_napoli", "Napoli", "l_seriea", "Stadio San Paolo"),
    ("t_roma", "Roma", "l_seriea", "Stadio Olimpico"),
    ("t_inter", "Inter Milan", "l_seriea", "San Siro"),
    ("t_bayern", "Bayern Munich", "l_bundesliga", "Allianz Arena"),
    ("t_dortmund", "Borussia Dortmund", "l_bundesliga", "Signal Iduna Park"),
    ("t_leverkusen", "Bayer Leverkusen", "l_bundesliga", "BayArena"),
    ("t_schalke", "Schalke", "l_bundesliga", "Veltins Arena"),
    ("t_psg", "Paris Saint-Germain", "l_ligue1", "Parc des Princes"),
    ("t_marseille", "Marseille", "l_ligue1", "Stade Velodrome"),
    ("t_lyon", "Lyon", "l_ligue1", "Parc Olympique Lyonnais"),
    ("t_monaco", "Monaco", "l_ligue1", "Stade Louis II"),
    ("t_stetienne", "Saint-Etienne", "l_ligue1", "Stade Geoffroy-Guichard"),
    ("t_wolfsburg", "Wolfsburg", "l_bundesliga", "Volkswagen Arena"),
];

/// (season, team key) spells of an anchor player.
type Spells = &'static [(&'static str, &'static str)];

/// (key, name, spells); always present.
pub const ANCHOR_PLAYERS: [(&str, &str, Spells); 4] = [
    (
        "p_messi",
        "Lionel Messi",
        &[
            ("2014-2015", "t_barcelona"),
            ("2015-2016", "t_barcelona"),
            ("2016-2017", "t_barcelona"),
        ],
    ),
    (
        "p_carole",
        "Lionel Carole",
        &[
            ("2014-2015", "t_burnley"),
            ("2015-2016", "t_burnley"),
            ("2016-2017", "t_chelsea"),
        ],
    ),
    (
        "p_henry",
        "Thierry Henry",
        &[("2014-2015", "t_arsenal"), ("2015-2016", "t_arsenal")],
    ),
    (
        "p_onyekuru",
        "Henry Onyekuru",
        &[("2015-2016", "t_chelsea"), ("2016-2017", "t_manutd")],
    ),
];

/// First names for generated players. None of them is close to the anchor
/// first names or surnames, so anchor lookups stay unambiguous.
pub const FIRST_NAMES: [&str; 24] = [
    "Aaron", "Bruno", "Carlos", "Diego", "Edin", "Felipe", "Gareth", "Ivan", "Jamie", "Kevin",
    "Luka", "Marco", "Nacho", "Oscar", "Paulo", "Raul", "Sergio", "Toni", "Victor", "Willian",
    "Xabi", "Yaya", "Zlatan", "Radamel",
];

pub const SURNAMES: [&str; 30] = [
    "Alaba", "Busquets", "Cazorla", "Dzeko", "Eriksen", "Fabregas", "Gomez", "Hazard", "Iniesta",
    "Jovetic", "Kante", "Lukaku", "Mata", "Neymar", "Ozil", "Pogba", "Quaresma", "Ramos", "Suarez",
    "Toure", "Umtiti", "Vardy", "Walcott", "Xhaka", "Yarmolenko", "Zaha", "Bale", "Silva",
    "Costa", "Kroos",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureSizes {
    /// Clamped to `2..=5`.
    pub leagues: usize,
    /// At least the anchor teams plus two per extra league.
    pub teams: usize,
    /// At least the number of anchor games.
    pub games: usize,
    pub players_per_team: usize,
    /// Filler events per game on top of goals and anchor cards.
    pub events_per_game: usize,
    pub captions_per_game: usize,
}

impl Default for FixtureSizes {
    fn default() -> Self {
        Self {
            leagues: 2,
            teams: 8,
            games: 40,
            players_per_team: 5,
            events_per_game: 8,
            captions_per_game: 3,
        }
    }
}

/// Games always generated, with the cards they must contain.
struct AnchorGame {
    season: &'static str,
    home: &'static str,
    away: &'static str,
    /// (player, team) yellow cards.
    yellow_cards: &'static [(&'static str, &'static str)],
}

const ANCHOR_GAMES: [AnchorGame; 8] = [
    AnchorGame {
        season: "2014-2015",
        home: "t_chelsea",
        away: "t_burnley",
        yellow_cards: &[("p_carole", "t_burnley")],
    },
    AnchorGame {
        season: "2015-2016",
        home: "t_barcelona",
        away: "t_realmadrid",
        yellow_cards: &[("p_messi", "t_barcelona")],
    },
    AnchorGame {
        season: "2015-2016",
        home: "t_realmadrid",
        away: "t_barcelona",
        yellow_cards: &[("p_messi", "t_barcelona")],
    },
    AnchorGame {
        season: "2016-2017",
        home: "t_manutd",
        away: "t_arsenal",
        yellow_cards: &[("p_onyekuru", "t_manutd")],
    },
    AnchorGame {
        season: "2016-2017",
        home: "t_chelsea",
        away: "t_manutd",
        yellow_cards: &[("p_carole", "t_chelsea")],
    },
    AnchorGame {
        season: "2014-2015",
        home: "t_arsenal",
        away: "t_chelsea",
        yellow_cards: &[("p_henry", "t_arsenal")],
    },
    AnchorGame {
        season: "2016-2017",
        home: "t_barcelona",
        away: "t_realmadrid",
        yellow_cards: &[("p_messi", "t_barcelona")],
    },
    AnchorGame {
        season: "2015-2016",
        home: "t_burnley",
        away: "t_arsenal",
        yellow_cards: &[("p_carole", "t_burnley"), ("p_henry", "t_arsenal")],
    },
];

pub const ANCHOR_GAME_COUNT: usize = ANCHOR_GAMES.len();

fn season_start(season: &str) -> NaiveDate {
    let year: i32 = season[..4].parse().expect("canonical season");
    NaiveDate::from_ymd_opt(year, 8, 8).expect("valid date")
}

struct Builder {
    rng: ChaCha8Rng,
    sizes: FixtureSizes,
    bundle: DatasetBundle,
    /// season -> team -> players
    squads: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

impl Builder {
    fn leagues(&mut self) {
        let n = self.sizes.leagues.clamp(2, LEAGUES.len());
        for (key, name, country) in &LEAGUES[..n] {
            self.bundle.leagues.push(LeagueRecord {
                league_key: key.to_string(),
                name: name.to_string(),
                country: country.to_string(),
            });
        }
    }

    fn teams(&mut self) {
        let leagues: Vec<String> = self.bundle.leagues.iter().map(|l| l.league_key.clone()).collect();
        let mut teams: Vec<(&str, &str, &str, &str)> = ANCHOR_TEAMS.to_vec();

        let mut pool: Vec<(&str, &str, &str, &str)> = EXTRA_TEAMS
            .iter()
            .copied()
            .filter(|t| leagues.iter().any(|l| l == t.2))
            .collect();
        pool.shuffle(&mut self.rng);

        // Leagues without anchor teams need two clubs to play each other.
        for league in &leagues[2..] {
            for _ in 0..2 {
                if let Some(pos) = pool.iter().position(|t| t.2 == league) {
                    teams.push(pool.remove(pos));
                }
            }
        }
        let target = self.sizes.teams.max(teams.len());
        while teams.len() < target && !pool.is_empty() {
            teams.push(pool.remove(0));
        }

        for (key, name, league, venue) in teams {
            self.bundle.teams.push(TeamRecord {
                team_key: key.to_string(),
                name: name.to_string(),
                league_key: league.to_string(),
                venue: venue.to_string(),
            });
        }
    }

    fn players(&mut self) {
        for (key, name, spells) in ANCHOR_PLAYERS {
            let affiliations = spells
                .iter()
                .map(|(season, team)| Affiliation {
                    season: season.to_string(),
                    team_key: team.to_string(),
                })
                .collect();
            self.bundle.players.push(PlayerRecord {
                player_key: key.to_string(),
                name: name.to_string(),
                affiliations,
            });
        }

        let mut names: Vec<(usize, usize)> = (0..FIRST_NAMES.len())
            .flat_map(|f| (0..SURNAMES.len()).map(move |s| (f, s)))
            .collect();
        names.shuffle(&mut self.rng);
        let mut names = names.into_iter();

        let teams: Vec<TeamRecord> = self.bundle.teams.clone();
        let mut serial = 0usize;
        for team in &teams {
            for _ in 0..self.sizes.players_per_team.max(1) {
                let Some((f, s)) = names.next() else { break };
                serial += 1;
                let mut affiliations = Vec::new();
                let mut current = team.team_key.clone();
                for season in SEASONS {
                    // Occasional transfer within the same league.
                    if self.rng.gen_bool(0.1) {
                        let options: Vec<&TeamRecord> = teams
                            .iter()
                            .filter(|t| t.league_key == team.league_key && t.team_key != current)
                            .collect();
                        if let Some(t) = options.choose(&mut self.rng) {
                            current = t.team_key.clone();
                        }
                    }
                    affiliations.push(Affiliation {
                        season: season.to_string(),
                        team_key: current.clone(),
                    });
                }
                self.bundle.players.push(PlayerRecord {
                    player_key: format!("p_{serial:04}"),
                    name: format!("{} {}", FIRST_NAMES[f], SURNAMES[s]),
                    affiliations,
                });
            }
        }

        for p in &self.bundle.players {
            for a in &p.affiliations {
                self.squads
                    .entry(a.season.clone())
                    .or_default()
                    .entry(a.team_key.clone())
                    .or_default()
                    .push(p.player_key.clone());
            }
        }
    }

    fn squad_pick(&mut self, season: &str, team: &str) -> Option<String> {
        let squad = self.squads.get(season)?.get(team)?;
        squad.choose(&mut self.rng).cloned()
    }

    fn random_time(&mut self) -> GameTime {
        let half = self.rng.gen_range(1..=2u8);
        let minute = self.rng.gen_range(0..=47u32);
        let second = self.rng.gen_range(0..60u32);
        GameTime::new(half, minute, second).expect("generated time within bounds")
    }

    fn game(&mut self, season: &str, home: &TeamRecord, away: &TeamRecord, cards: &[(&str, &str)]) {
        let index = self.bundle.games.len() + 1;
        let game_key = format!("g{index:04}");
        let home_score = self.rng.gen_range(0..=4u32);
        let away_score = self.rng.gen_range(0..=3u32);
        let date = season_start(season) + Duration::days(self.rng.gen_range(0..280));
        let attendance = self.rng.gen_range(15_000..=80_000u32);

        let mut pending: Vec<(GameTime, String, String, Option<String>)> = Vec::new();
        for (team, goals) in [(home, home_score), (away, away_score)] {
            for _ in 0..goals {
                let scorer = self.squad_pick(season, &team.team_key);
                let t = self.random_time();
                pending.push((t, GOAL.to_string(), team.team_key.clone(), scorer));
            }
        }
        for (player, team) in cards {
            let t = self.random_time();
            pending.push((
                t,
                YELLOW_CARD.to_string(),
                team.to_string(),
                Some(player.to_string()),
            ));
        }
        for _ in 0..self.sizes.events_per_game {
            let label = *FILLER_LABELS
                .choose(&mut self.rng)
                .expect("non-empty label set");
            // Red cards are rare.
            let label = if label == RED_CARD && self.rng.gen_bool(0.7) {
                "Foul"
            } else {
                label
            };
            let team = if self.rng.gen_bool(0.5) { home } else { away };
            let player = if PLAYER_LABELS.contains(&label) {
                self.squad_pick(season, &team.team_key)
            } else {
                None
            };
            let t = self.random_time();
            pending.push((t, label.to_string(), team.team_key.clone(), player));
        }
        pending.sort_by_key(|p| p.0);
        for (n, (game_time, label, team_key, player_key)) in pending.into_iter().enumerate() {
            self.bundle.events.push(EventRecord {
                event_key: format!("e{index:04}_{:03}", n + 1),
                game_key: game_key.clone(),
                label,
                game_time,
                team_key,
                player_key,
            });
        }

        let mut times: Vec<u32> = (0..self.sizes.captions_per_game)
            .map(|_| self.rng.gen_range(0..5_700))
            .collect();
        times.sort_unstable();
        for (n, start_time) in times.into_iter().enumerate() {
            let text = match n % 3 {
                0 => format!("Welcome to {} for {} against {}.", home.venue, home.name, away.name),
                1 => format!("{} pressing high, {} sitting deep.", home.name, away.name),
                _ => format!("It finishes {home_score}-{away_score} at {}.", home.venue),
            };
            self.bundle.captions.push(CaptionRecord {
                caption_key: format!("c{index:04}_{:02}", n + 1),
                game_key: game_key.clone(),
                start_time,
                text,
            });
        }

        self.bundle.games.push(GameRecord {
            game_key,
            season: season.to_string(),
            league_key: home.league_key.clone(),
            home_team_key: home.team_key.clone(),
            away_team_key: away.team_key.clone(),
            home_score,
            away_score,
            date,
            venue: home.venue.clone(),
            attendance,
        });
    }

    fn games(&mut self) {
        let teams = self.bundle.teams.clone();
        let team = |key: &str| {
            teams
                .iter()
                .find(|t| t.team_key == key)
                .expect("anchor team present")
                .clone()
        };
        for anchor in &ANCHOR_GAMES {
            self.game(anchor.season, &team(anchor.home), &team(anchor.away), anchor.yellow_cards);
        }

        let mut by_league: BTreeMap<&str, Vec<&TeamRecord>> = BTreeMap::new();
        for t in &teams {
            by_league.entry(t.league_key.as_str()).or_default().push(t);
        }
        let leagues: Vec<&Vec<&TeamRecord>> = by_league.values().filter(|v| v.len() >= 2).collect();
        let total = self.sizes.games.max(ANCHOR_GAME_COUNT);
        while self.bundle.games.len() < total {
            let league = leagues[self.rng.gen_range(0..leagues.len())];
            let pair: Vec<&&TeamRecord> = league.choose_multiple(&mut self.rng, 2).collect();
            let season = SEASONS[self.rng.gen_range(0..SEASONS.len())];
            let (home, away) = ((*pair[0]).clone(), (*pair[1]).clone());
            self.game(season, &home, &away, &[]);
        }
    }
}

/// Generates a fixture bundle. The same seed and sizes always produce the
/// same bundle.
pub fn generate_fixture(seed: u64, sizes: &FixtureSizes) -> DatasetBundle {
    let mut builder = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        sizes: *sizes,
        bundle: DatasetBundle::default(),
        squads: BTreeMap::new(),
    };
    builder.leagues();
    builder.teams();
    builder.players();
    builder.games();
    builder.bundle
}
