//! Brute-force reference answers computed straight from a bundle, with no
//! SQL and no shared code from the engine.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use soccerrag_core::dataset::{DatasetBundle, GameRecord};

/// Plain full-matrix Levenshtein distance over chars.
pub fn levenshtein_dp(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

fn involves(g: &GameRecord, team: &str) -> bool {
    g.home_team_key == team || g.away_team_key == team
}

pub fn games_for_team(b: &DatasetBundle, team: &str, season: Option<&str>, home_only: bool) -> usize {
    b.games
        .iter()
        .filter(|g| season.is_none_or(|s| g.season == s))
        .filter(|g| if home_only { g.home_team_key == team } else { involves(g, team) })
        .count()
}

/// Events matching every given filter. `home_only` keeps events credited
/// to the home side of their game.
pub fn event_count(
    b: &DatasetBundle,
    label: Option<&str>,
    player: Option<&str>,
    team: Option<&str>,
    season: Option<&str>,
    home_only: bool,
) -> usize {
    let games: BTreeMap<&str, &GameRecord> = b.games.iter().map(|g| (g.game_key.as_str(), g)).collect();
    b.events
        .iter()
        .filter(|e| label.is_none_or(|l| e.label == l))
        .filter(|e| player.is_none_or(|p| e.player_key.as_deref() == Some(p)))
        .filter(|e| team.is_none_or(|t| e.team_key == t))
        .filter(|e| {
            let g = games[e.game_key.as_str()];
            season.is_none_or(|s| g.season == s) && (!home_only || g.home_team_key == e.team_key)
        })
        .count()
}

pub fn goals_scored(b: &DatasetBundle, team: &str, season: Option<&str>) -> u64 {
    b.games
        .iter()
        .filter(|g| season.is_none_or(|s| g.season == s))
        .map(|g| {
            let mut n = 0;
            if g.home_team_key == team {
                n += g.home_score as u64;
            }
            if g.away_team_key == team {
                n += g.away_score as u64;
            }
            n
        })
        .sum()
}

/// Mean home goal difference minus mean away goal difference.
pub fn home_advantage(b: &DatasetBundle, team: &str, season: &str) -> f64 {
    let (mut home, mut away) = (Vec::new(), Vec::new());
    for g in b.games.iter().filter(|g| g.season == season) {
        let diff = g.home_score as f64 - g.away_score as f64;
        if g.home_team_key == team {
            home.push(diff);
        } else if g.away_team_key == team {
            away.push(-diff);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    mean(&home) - mean(&away)
}

pub fn games_of_team_in_season(b: &DatasetBundle, team: &str, season: &str) -> Vec<String> {
    b.games
        .iter()
        .filter(|g| g.season == season && involves(g, team))
        .map(|g| g.game_key.clone())
        .collect()
}

/// Names of players with a `label` event in any game between the two teams.
pub fn players_with_event_between(b: &DatasetBundle, team_a: &str, team_b: &str, season: &str, label: &str) -> BTreeSet<String> {
    let games: BTreeSet<&str> = b
        .games
        .iter()
        .filter(|g| g.season == season && involves(g, team_a) && involves(g, team_b))
        .map(|g| g.game_key.as_str())
        .collect();
    b.events
        .iter()
        .filter(|e| e.label == label && games.contains(e.game_key.as_str()))
        .filter_map(|e| e.player_key.as_deref())
        .filter_map(|k| b.player(k).map(|p| p.name.clone()))
        .collect()
}

pub fn games_with_player_event(b: &DatasetBundle, player: &str, label: &str) -> BTreeSet<String> {
    b.events
        .iter()
        .filter(|e| e.label == label && e.player_key.as_deref() == Some(player))
        .map(|e| e.game_key.clone())
        .collect()
}

/// (team name, season) pairs a player is listed for.
pub fn player_spells(b: &DatasetBundle, player: &str) -> BTreeSet<(String, String)> {
    b.player(player)
        .map(|p| {
            p.affiliations
                .iter()
                .map(|a| (b.team(&a.team_key).expect("known team").name.clone(), a.season.clone()))
                .collect()
        })
        .unwrap_or_default()
}

pub fn seasons_listed(b: &DatasetBundle, player: &str) -> usize {
    player_spells(b, player).iter().map(|(_, s)| s.clone()).collect::<BTreeSet<_>>().len()
}

fn ratio_dp(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        1.0
    } else {
        1.0 - levenshtein_dp(a, b) as f64 / longest as f64
    }
}

/// Every way of cutting `s` into `parts` non-empty pieces.
fn compositions(s: &[char], parts: usize) -> Vec<Vec<String>> {
    if parts == 1 {
        return if s.is_empty() { vec![] } else { vec![vec![s.iter().collect()]] };
    }
    let mut out = Vec::new();
    for cut in 1..s.len() {
        for mut rest in compositions(&s[cut..], parts - 1) {
            rest.insert(0, s[..cut].iter().collect());
            out.push(rest);
        }
    }
    out
}

fn abbreviates(short: &str, words: &[&str]) -> bool {
    if words.len() < 2 {
        return false;
    }
    let chars: Vec<char> = short.chars().collect();
    compositions(&chars, words.len())
        .iter()
        .any(|pieces| pieces.iter().zip(words).all(|(p, w)| w.starts_with(p.as_str())))
}

fn cover(from: &[&str], to: &[&str]) -> f64 {
    let mut total = 0.0;
    for x in from {
        let mut best: f64 = 0.0;
        for y in to {
            best = best.max(ratio_dp(x, y));
        }
        total += best;
    }
    total / from.len() as f64
}

/// The matching metric written out directly: edit ratio, or 0.95 times the
/// word-level score, whichever is larger.
pub fn metric(a: &str, b: &str) -> f64 {
    if a == b {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    let words = if (ta.len() == 1 && abbreviates(ta[0], &tb)) || (tb.len() == 1 && abbreviates(tb[0], &ta)) {
        1.0
    } else if ta.len() < tb.len() {
        cover(&ta, &tb)
    } else if ta.len() > tb.len() {
        cover(&tb, &ta)
    } else {
        cover(&ta, &tb).min(cover(&tb, &ta))
    };
    ratio_dp(a, b).max(0.95 * words)
}

/// Selection sort by score descending, then name, then key.
pub fn brute_force_rank(query: &str, entries: &[(String, String)], normalize: impl Fn(&str) -> String) -> Vec<(String, String, f64)> {
    let mut pool: Vec<(String, String, f64)> = entries
        .iter()
        .map(|(k, n)| (k.clone(), n.clone(), metric(query, &normalize(n))))
        .collect();
    let mut out = Vec::new();
    while !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            let (a, b) = (&pool[i], &pool[best]);
            let better = a.2 > b.2 || (a.2 == b.2 && (a.1 < b.1 || (a.1 == b.1 && a.0 < b.0)));
            if better {
                best = i;
            }
        }
        out.push(pool.remove(best));
    }
    out
}
