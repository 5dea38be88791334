mod support;

use std::collections::HashMap;

use proptest::prelude::*;
use soccerrag_core::config::{load_config, EngineConfig, GatewayMode, Secret};
use soccerrag_core::dataset::fixture::{generate_fixture, FixtureSizes};
use soccerrag_core::dataset::{parse_dataset, write_dataset};
use soccerrag_core::entity::{EntityKind, ExtractedProperty, LookupEntry};
use soccerrag_core::guard::guard_sql;
use soccerrag_core::validator::similarity::{levenshtein, normalize, similarity};
use soccerrag_core::validator::{rank_candidates, validate_property, ValidationOutcome, AUTO_ACCEPT, CANDIDATE_FLOOR};
use support::oracle;

fn word() -> impl Strategy<Value = String> {
    "[a-eé]{1,5}"
}

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 0..4).prop_map(|w| w.join(" "))
}

fn entries() -> impl Strategy<Value = Vec<LookupEntry>> {
    prop::collection::vec(phrase(), 0..50).prop_map(|names| {
        names
            .into_iter()
            .enumerate()
            .map(|(i, n)| LookupEntry::new(format!("k{i:02}"), n))
            .collect()
    })
}

proptest! {
    #[test]
    fn similarity_is_symmetric_bounded_and_exact_on_identity(a in phrase(), b in phrase()) {
        let (a, b) = (normalize(&a), normalize(&b));
        let s = similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, similarity(&b, &a));
        prop_assert_eq!(s == 1.0, a == b);
        prop_assert_eq!(similarity(&a, &a), 1.0);
    }

    #[test]
    fn similarity_matches_the_written_out_metric(a in phrase(), b in phrase()) {
        let (a, b) = (normalize(&a), normalize(&b));
        prop_assert_eq!(similarity(&a, &b), oracle::metric(&a, &b));
    }

    #[test]
    fn levenshtein_matches_full_table(a in "[a-d]{0,9}", b in "[a-d]{0,9}") {
        prop_assert_eq!(levenshtein(&a, &b), oracle::levenshtein_dp(&a, &b));
    }

    #[test]
    fn ranking_matches_brute_force(query in phrase(), table in entries()) {
        let q = normalize(&query);
        let ranked = rank_candidates(EntityKind::Team, &query, &table);
        let pairs: Vec<(String, String)> = table.iter().map(|e| (e.primary_key.clone(), e.canonical_name.clone())).collect();
        let expected = oracle::brute_force_rank(&q, &pairs, normalize);
        let got: Vec<(String, String, f64)> = ranked.into_iter().map(|c| (c.primary_key, c.canonical_name, c.score)).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn adding_a_candidate_never_lowers_the_top(query in phrase(), table in entries(), extra in phrase()) {
        let top = |t: &[LookupEntry]| rank_candidates(EntityKind::Player, &query, t).first().map_or(0.0, |c| c.score);
        let mut bigger = table.clone();
        bigger.push(LookupEntry::new("extra", extra));
        prop_assert!(top(&bigger) >= top(&table));
    }

    #[test]
    fn outcomes_respect_thresholds(query in phrase(), table in entries(), few_shot in 1usize..5) {
        let prop_ = ExtractedProperty::new(EntityKind::Player, query);
        let again = validate_property(&prop_, &table, few_shot);
        match validate_property(&prop_, &table, few_shot) {
            ValidationOutcome::Resolved { score, .. } => prop_assert!(score >= AUTO_ACCEPT - 1e-9),
            ValidationOutcome::Ambiguous(amb) => {
                prop_assert!(!amb.candidates.is_empty() && amb.candidates.len() <= few_shot);
                prop_assert!(amb.candidates.iter().all(|c| c.score >= CANDIDATE_FLOOR - 1e-9));
                prop_assert!(amb.candidates.len() >= 2 || amb.candidates[0].score < AUTO_ACCEPT || few_shot == 1);
                prop_assert_eq!(ValidationOutcome::Ambiguous(amb), again);
            }
            ValidationOutcome::Unmatched { .. } => {}
        }
    }

    #[test]
    fn config_round_trips(
        key in "[a-zA-Z0-9]{1,20}",
        model in "[a-z0-9.-]{1,20}",
        few_shot in 1usize..10,
        tracing in any::<bool>(),
        mode in prop::sample::select(vec![GatewayMode::Live, GatewayMode::Record, GatewayMode::Replay]),
    ) {
        let cfg = EngineConfig {
            openai_api_key: Some(Secret::new(key.clone())),
            model_name: model,
            database_url: "x/games.db".into(),
            tracing_enabled: tracing,
            tracing_api_key: tracing.then(|| Secret::new(key)),
            tracing_project: "P".into(),
            few_shot,
            gateway_mode: mode,
        };
        let env: HashMap<String, String> = cfg.to_env().into_iter().collect();
        prop_assert_eq!(load_config(&env).unwrap(), cfg);
    }

    #[test]
    fn guard_never_allows_non_select_heads(head in prop::sample::select(vec!["DROP", "DELETE", "UPDATE", "INSERT", "PRAGMA", "ATTACH", "VACUUM", "CREATE", "ALTER", "REPLACE", "BEGIN"]), tail in "[a-z ();,'*=]{0,30}") {
        let v = guard_sql(&format!("{head} {tail}"), 10);
        prop_assert!(!v.allowed);
        let v = guard_sql(&format!("SELECT 1; {head} {tail}"), 10);
        prop_assert!(!v.allowed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dataset_round_trips_through_files(seed in any::<u64>(), games in 8usize..30, events in 0usize..6) {
        let sizes = FixtureSizes { games, events_per_game: events, ..FixtureSizes::default() };
        let bundle = generate_fixture(seed, &sizes);
        prop_assert!(bundle.integrity_issues().is_empty());
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&bundle, dir.path()).unwrap();
        prop_assert_eq!(parse_dataset(dir.path()).unwrap(), bundle);
    }
}
