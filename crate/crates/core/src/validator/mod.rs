//! Matches extracted entity mentions against lookup tables.
//!
//! Each mention is scored against every candidate of its kind with
//! [`similarity`]. A clear winner is resolved to its primary key, a
//! plausible but unclear match is escalated to the user as a ranked list,
//! and anything below the floor passes through untouched.

pub mod season;
pub mod similarity;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entity::{EntityKind, ExtractedProperty, LookupEntry};
pub use similarity::{normalize, similarity};

/// Minimum score for an automatic match.
pub const AUTO_ACCEPT: f64 = 0.90;
/// Minimum score for a candidate to be offered to the user.
pub const CANDIDATE_FLOOR: f64 = 0.40;
/// Lead the best candidate needs over the runner-up to be accepted.
pub const SEPARATION_MARGIN: f64 = 0.10;

/// Absorbs rounding in threshold comparisons (`0.95 - 0.85 < 0.10` in f64).
const EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub primary_key: String,
    pub canonical_name: String,
    pub score: f64,
}

/// Score descending, then canonical name, then key.
pub fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.canonical_name.cmp(&b.canonical_name))
        .then_with(|| a.primary_key.cmp(&b.primary_key))
}

/// A mention with more than one plausible match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ambiguity {
    pub kind: EntityKind,
    pub raw_value: String,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ValidationOutcome {
    Resolved {
        primary_key: String,
        canonical_name: String,
        score: f64,
    },
    Ambiguous(Ambiguity),
    Unmatched {
        raw_value: String,
    },
}

/// The user's answer to a clarification prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserChoice {
    /// Zero-based index into the offered candidates.
    Select(usize),
    /// Keep the original string unvalidated.
    PassThrough,
    /// Replace the mention with a new string and validate it once more.
    Custom(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChoiceError {
    #[error("choice {index} is out of range (there are {available} options)")]
    InvalidChoice { index: usize, available: usize },
    #[error("custom value must not be blank")]
    BlankCustom,
}

/// The string that is actually compared against candidates.
fn query_form(kind: EntityKind, raw: &str) -> String {
    if kind == EntityKind::Season {
        if let Some(season) = season::canonical_season(raw) {
            return normalize(&season);
        }
    }
    normalize(raw)
}

/// Every candidate scored against `raw`, best first.
pub fn rank_candidates(kind: EntityKind, raw: &str, candidates: &[LookupEntry]) -> Vec<Candidate> {
    let query = query_form(kind, raw);
    let mut ranked: Vec<Candidate> = candidates
        .iter()
        .map(|c| Candidate {
            primary_key: c.primary_key.clone(),
            canonical_name: c.canonical_name.clone(),
            score: similarity(&query, &normalize(&c.canonical_name)),
        })
        .collect();
    ranked.sort_by(rank_order);
    ranked
}

/// Decides how a mention should be treated given its candidate table.
pub fn validate_property(
    prop: &ExtractedProperty,
    candidates: &[LookupEntry],
    few_shot: usize,
) -> ValidationOutcome {
    let ranked = rank_candidates(prop.kind, &prop.raw_value, candidates);
    let unmatched = || ValidationOutcome::Unmatched {
        raw_value: prop.raw_value.clone(),
    };
    let Some(top) = ranked.first() else {
        return unmatched();
    };
    let clear_lead = match ranked.get(1) {
        None => true,
        Some(runner_up) => top.score - runner_up.score >= SEPARATION_MARGIN - EPSILON,
    };
    if top.score >= AUTO_ACCEPT - EPSILON && clear_lead {
        return ValidationOutcome::Resolved {
            primary_key: top.primary_key.clone(),
            canonical_name: top.canonical_name.clone(),
            score: top.score,
        };
    }
    if top.score >= CANDIDATE_FLOOR - EPSILON {
        let offered: Vec<Candidate> = ranked
            .into_iter()
            .take_while(|c| c.score >= CANDIDATE_FLOOR - EPSILON)
            .take(few_shot.max(1))
            .collect();
        return ValidationOutcome::Ambiguous(Ambiguity {
            kind: prop.kind,
            raw_value: prop.raw_value.clone(),
            candidates: offered,
        });
    }
    unmatched()
}

impl ValidationOutcome {
    /// Folds the outcome back into the property; ambiguous and unmatched
    /// mentions keep their raw value only.
    pub fn apply_to(&self, prop: &ExtractedProperty) -> ExtractedProperty {
        match self {
            ValidationOutcome::Resolved {
                primary_key,
                canonical_name,
                ..
            } => ExtractedProperty::new(prop.kind, prop.raw_value.clone())
                .resolved_to(primary_key.clone(), canonical_name.clone()),
            _ => ExtractedProperty::new(prop.kind, prop.raw_value.clone()),
        }
    }
}

/// Applies a clarification answer. A custom string is validated once; if it
/// is still ambiguous it passes through as written.
pub fn apply_user_choice(
    ambiguity: &Ambiguity,
    choice: &UserChoice,
    candidates: &[LookupEntry],
    few_shot: usize,
) -> Result<ExtractedProperty, ChoiceError> {
    match choice {
        UserChoice::Select(index) => {
            let picked = ambiguity
                .candidates
                .get(*index)
                .ok_or(ChoiceError::InvalidChoice {
                    index: *index,
                    available: ambiguity.candidates.len(),
                })?;
            Ok(ExtractedProperty::new(ambiguity.kind, ambiguity.raw_value.clone())
                .resolved_to(picked.primary_key.clone(), picked.canonical_name.clone()))
        }
        UserChoice::PassThrough => Ok(ExtractedProperty::new(
            ambiguity.kind,
            ambiguity.raw_value.clone(),
        )),
        UserChoice::Custom(text) => {
            let text = text.trim();
            if text.is_empty() {
                return Err(ChoiceError::BlankCustom);
            }
            let prop = ExtractedProperty::new(ambiguity.kind, text);
            Ok(validate_property(&prop, candidates, few_shot).apply_to(&prop))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixture::{generate_fixture, FixtureSizes};

    fn players() -> Vec<LookupEntry> {
        let b = generate_fixture(7, &FixtureSizes::default());
        b.players
            .iter()
            .map(|p| LookupEntry::new(&p.player_key, &p.name))
            .collect()
    }

    fn teams() -> Vec<LookupEntry> {
        let b = generate_fixture(7, &FixtureSizes::default());
        b.teams
            .iter()
            .map(|t| LookupEntry::new(&t.team_key, &t.name))
            .collect()
    }

    fn seasons() -> Vec<LookupEntry> {
        ["2014-2015", "2015-2016", "2016-2017"]
            .iter()
            .map(|s| LookupEntry::new(*s, *s))
            .collect()
    }

    #[test]
    fn surname_resolves_messi() {
        let out = validate_property(&ExtractedProperty::new(EntityKind::Player, "messi"), &players(), 3);
        assert!(matches!(
            out,
            ValidationOutcome::Resolved { ref primary_key, ref canonical_name, .. }
                if primary_key == "p_messi" && canonical_name == "Lionel Messi"
        ), "{out:?}");
    }

    #[test]
    fn shared_first_name_is_ambiguous() {
        let out = validate_property(&ExtractedProperty::new(EntityKind::Player, "Lionel"), &players(), 3);
        let ValidationOutcome::Ambiguous(a) = out else {
            panic!("expected ambiguity, got {out:?}")
        };
        let names: Vec<&str> = a.candidates.iter().map(|c| c.canonical_name.as_str()).collect();
        assert_eq!(names, ["Lionel Carole", "Lionel Messi"]);
    }

    #[test]
    fn henry_is_ambiguous_too() {
        let out = validate_property(&ExtractedProperty::new(EntityKind::Player, "Henry"), &players(), 3);
        let ValidationOutcome::Ambiguous(a) = out else {
            panic!("expected ambiguity, got {out:?}")
        };
        assert_eq!(a.candidates.len(), 2);
    }

    #[test]
    fn team_abbreviation_and_typo() {
        let t = teams();
        for (raw, key) in [("ManU", "t_manutd"), ("Real Madrids", "t_realmadrid"), ("chelsea", "t_chelsea")] {
            let out = validate_property(&ExtractedProperty::new(EntityKind::Team, raw), &t, 3);
            assert!(
                matches!(out, ValidationOutcome::Resolved { ref primary_key, .. } if primary_key == key),
                "{raw}: {out:?}"
            );
        }
        let out = validate_property(&ExtractedProperty::new(EntityKind::Team, "Narnia FC"), &t, 3);
        assert_eq!(out, ValidationOutcome::Unmatched { raw_value: "Narnia FC".into() });
    }

    #[test]
    fn seasons_are_canonicalized_first() {
        for (raw, want) in [("16-17", "2016-2017"), ("2015/16", "2015-2016"), ("2014-15 season", "2014-2015")] {
            let out = validate_property(&ExtractedProperty::new(EntityKind::Season, raw), &seasons(), 3);
            assert!(
                matches!(out, ValidationOutcome::Resolved { ref primary_key, score, .. } if primary_key == want && score == 1.0),
                "{raw}: {out:?}"
            );
        }
    }

    #[test]
    fn few_shot_caps_the_offer() {
        let entries: Vec<LookupEntry> = ["Jon Ames", "Jon Bames", "Jon Cames", "Jon Dames"]
            .iter()
            .enumerate()
            .map(|(i, n)| LookupEntry::new(format!("k{i}"), *n))
            .collect();
        for few_shot in 1..=4 {
            let out = validate_property(&ExtractedProperty::new(EntityKind::Player, "jon"), &entries, few_shot);
            let ValidationOutcome::Ambiguous(a) = out else { panic!() };
            assert_eq!(a.candidates.len(), few_shot);
        }
    }

    #[test]
    fn single_weak_candidate_is_ambiguous() {
        let entries = vec![LookupEntry::new("t_burnley", "Burnley")];
        let out = validate_property(&ExtractedProperty::new(EntityKind::Team, "Burnly"), &entries, 3);
        let ValidationOutcome::Ambiguous(a) = out else { panic!("{out:?}") };
        assert_eq!(a.candidates.len(), 1);
        assert!(a.candidates[0].score < AUTO_ACCEPT);
    }

    #[test]
    fn empty_table_is_unmatched() {
        let out = validate_property(&ExtractedProperty::new(EntityKind::Venue, "Anfield"), &[], 3);
        assert!(matches!(out, ValidationOutcome::Unmatched { .. }));
    }

    fn lionel() -> (Ambiguity, Vec<LookupEntry>) {
        let p = players();
        let out = validate_property(&ExtractedProperty::new(EntityKind::Player, "Lionel"), &p, 3);
        match out {
            ValidationOutcome::Ambiguous(a) => (a, p),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn choosing_a_candidate() {
        let (a, p) = lionel();
        let idx = a.candidates.iter().position(|c| c.canonical_name == "Lionel Messi").unwrap();
        let prop = apply_user_choice(&a, &UserChoice::Select(idx), &p, 3).unwrap();
        assert_eq!(prop.resolved.unwrap().primary_key, "p_messi");
        assert_eq!(
            apply_user_choice(&a, &UserChoice::Select(2), &p, 3),
            Err(ChoiceError::InvalidChoice { index: 2, available: 2 })
        );
    }

    #[test]
    fn pass_through_keeps_raw() {
        let (a, p) = lionel();
        let prop = apply_user_choice(&a, &UserChoice::PassThrough, &p, 3).unwrap();
        assert_eq!(prop.raw_value, "Lionel");
        assert!(prop.resolved.is_none());
    }

    #[test]
    fn custom_string_is_revalidated_once() {
        let (a, p) = lionel();
        let prop = apply_user_choice(&a, &UserChoice::Custom("Messi".into()), &p, 3).unwrap();
        assert_eq!(prop.raw_value, "Messi");
        assert_eq!(prop.resolved.unwrap().primary_key, "p_messi");

        // Still ambiguous: degrade to pass-through of the custom text.
        let prop = apply_user_choice(&a, &UserChoice::Custom("Henry".into()), &p, 3).unwrap();
        assert_eq!(prop.raw_value, "Henry");
        assert!(prop.resolved.is_none());

        assert_eq!(
            apply_user_choice(&a, &UserChoice::Custom("  ".into()), &p, 3),
            Err(ChoiceError::BlankCustom)
        );
    }

    #[test]
    fn generated_names_stay_clear_of_anchor_probes() {
        use crate::dataset::fixture::{FIRST_NAMES, SURNAMES};
        for probe in ["lionel", "henry", "messi"] {
            for f in FIRST_NAMES {
                for s in SURNAMES {
                    let name = normalize(&format!("{f} {s}"));
                    let score = similarity(probe, &name);
                    assert!(score < CANDIDATE_FLOOR, "{probe} vs {name}: {score}");
                }
            }
        }
    }
}
