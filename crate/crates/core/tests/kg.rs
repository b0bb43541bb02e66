use std::fs;

use kgchat_core::fixture_dir;
use kgchat_core::kg::{
    AssertOutcome, CandidateSource, CheckResult, KgError, KnowledgeGraph, RangeValue, Store, Triple,
};

fn graph() -> KnowledgeGraph {
    KnowledgeGraph::load(&fixture_dir()).expect("fixture pack loads")
}

fn entity(id: &str) -> RangeValue {
    RangeValue::Entity(id.into())
}

#[test]
fn fixture_answers_birthplace_query() {
    let g = graph();
    let hits = g.query(None, "alfred_nobel", "born_in").unwrap();
    assert_eq!(hits.len(), 1);
    assert_eq!(hits[0].range_value, entity("sweden"));
}

#[test]
fn empty_directory_gives_empty_graph() {
    let dir = tempfile::tempdir().unwrap();
    let g = KnowledgeGraph::load(dir.path()).unwrap();
    assert_eq!(g.stats().entities, 0);
    assert_eq!(g.stats().builtin_triples, 0);
}

#[test]
fn dangling_reference_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("entities.jsonl"),
        r#"{"kind":"entity","id":"a","name":"A","class":"person"}"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("properties.jsonl"),
        r#"{"kind":"property","id":"born_in","domains":["person"],"range":"entity:thing"}"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("triples.jsonl"),
        r#"{"kind":"triple","dom":"a","prop":"born_in","ran":"atlantis"}"#,
    )
    .unwrap();
    match KnowledgeGraph::load(dir.path()) {
        Err(KgError::Dangling(ids)) => assert_eq!(ids, vec!["atlantis".to_string()]),
        other => panic!("expected dangling error, got {other:?}"),
    }
}

#[test]
fn parse_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("entities.jsonl"),
        "{\"kind\":\"entity\",\"id\":\"a\",\"name\":\"A\",\"class\":\"x\"}\n{broken\n",
    )
    .unwrap();
    let err = KnowledgeGraph::load(dir.path()).unwrap_err();
    match err {
        KgError::Parse { file, line, .. } => {
            assert!(file.ends_with("entities.jsonl"));
            assert_eq!(line, 2);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn resolve_exact_alias_and_fuzzy() {
    let g = graph();
    let hits = g.resolve_name("tom hanks");
    assert_eq!(hits[0].entity_id, "tom_hanks");
    assert_eq!(hits[0].score, 1.0);
    assert_eq!(hits[0].source, CandidateSource::Private);

    // fixture aliases of the_matrix_film: ["the matrix"]; canonical name "Matrix"
    let hits = g.resolve_name("the matrix");
    assert_eq!(hits[0].entity_id, "the_matrix_film");
    assert_eq!(hits[0].score, 0.9);

    let hits = g.resolve_name("tom");
    assert_eq!(hits[0].entity_id, "tom_hanks");
    assert_eq!(hits[0].score, 0.5);

    assert!(g.resolve_name("").is_empty());
    assert!(g.resolve_name("zzz qqq").is_empty());
    let general = g.resolve_name("beethoven");
    assert_eq!(general[0].source, CandidateSource::General);
}

#[test]
fn bot_has_explicit_zero_siblings() {
    let g = graph();
    let hits = g.query(None, "alquist", "sibling_count").unwrap();
    assert_eq!(hits[0].range_value, RangeValue::Int(0));
}

#[test]
fn unknown_ids_are_errors_not_empty_results() {
    let g = graph();
    assert!(matches!(g.query(None, "nobody", "born_in"), Err(KgError::UnknownEntity(_))));
    assert!(matches!(g.query(None, "alquist", "nope"), Err(KgError::UnknownProperty(_))));
    assert!(g.query(None, "jara_cimrman", "born_in").unwrap().is_empty());
}

#[test]
fn check_fact_statuses() {
    let g = graph();
    match g.check_fact(None, "alfred_nobel", "born_in", &entity("france")).unwrap() {
        CheckResult::Contradicted(actual) => assert_eq!(actual.range_value, entity("sweden")),
        other => panic!("{other:?}"),
    }
    assert_eq!(
        g.check_fact(None, "jara_cimrman", "born_in", &entity("france")).unwrap(),
        CheckResult::Unknown
    );
    // loves refines likes
    assert!(matches!(
        g.check_fact(None, "alquist", "likes", &entity("music")).unwrap(),
        CheckResult::Confirmed(t) if t.property_id == "loves"
    ));
}

#[test]
fn assert_then_supersede() {
    let g = graph();
    g.ensure_user("user42").unwrap();
    let t3 = Triple::learned("user42", "user42", "sibling_count", RangeValue::Int(3));
    assert_eq!(g.assert_fact(t3).unwrap(), AssertOutcome::StoredNew);
    let q = g.query(Some("user42"), "user42", "sibling_count").unwrap();
    assert_eq!(q[0].range_value, RangeValue::Int(3));
    assert!(matches!(
        g.check_fact(Some("user42"), "user42", "sibling_count", &RangeValue::Int(3)).unwrap(),
        CheckResult::Confirmed(_)
    ));

    let t2 = Triple::learned("user42", "user42", "sibling_count", RangeValue::Int(2));
    match g.assert_fact(t2).unwrap() {
        AssertOutcome::Superseded(old) => assert_eq!(old.range_value, RangeValue::Int(3)),
        other => panic!("{other:?}"),
    }
    let q = g.query(Some("user42"), "user42", "sibling_count").unwrap();
    assert_eq!(q.len(), 1);
    assert_eq!(q[0].range_value, RangeValue::Int(2));
    match g.check_fact(Some("user42"), "user42", "sibling_count", &RangeValue::Int(3)).unwrap() {
        CheckResult::Contradicted(now) => assert_eq!(now.range_value, RangeValue::Int(2)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn assert_rejects_range_kind_mismatch() {
    let g = graph();
    g.ensure_user("user42").unwrap();
    let bad = Triple::learned("user42", "user42", "born_in", RangeValue::Int(7));
    assert!(matches!(g.assert_fact(bad), Err(KgError::RangeKind { .. })));
    let dangling = Triple::learned("user42", "user42", "born_in", entity("atlantis_string"));
    assert!(matches!(g.assert_fact(dangling), Err(KgError::UnknownEntity(_))));
}

#[test]
fn builtin_facts_are_frozen() {
    let g = graph();
    g.ensure_user("u").unwrap();
    let t = Triple::learned("u", "alfred_nobel", "born_in", entity("france"));
    assert!(matches!(g.assert_fact(t), Err(KgError::BuiltinConflict(_))));
    let same = Triple::learned("u", "alfred_nobel", "born_in", entity("sweden"));
    assert_eq!(g.assert_fact(same).unwrap(), AssertOutcome::AlreadyKnown);
}

#[test]
fn popularity_bumps_per_mention() {
    let g = graph();
    assert_eq!(g.popularity("funk"), Some(1.0));
    g.bump_popularity(&["funk"]);
    assert_eq!(g.popularity("funk"), Some(2.0));
    g.bump_popularity::<&str>(&[]);
    assert_eq!(g.popularity("funk"), Some(2.0));
    // per-mention: the same id twice in one turn counts twice
    let mentions = ["jazz", "jazz", "no_such_id"];
    let expected = 2.0 + mentions.iter().filter(|m| **m == "jazz").count() as f64;
    g.bump_popularity(&mentions);
    assert_eq!(g.popularity("jazz"), Some(expected));
}

#[test]
fn persistence_round_trip_and_isolation() {
    let dir = tempfile::tempdir().unwrap();
    {
        let g = graph().with_store(Store::open(dir.path()).unwrap()).unwrap();
        for user in ["alice", "bob"] {
            g.ensure_user(user).unwrap();
        }
        g.assert_fact(Triple::learned("alice", "alice", "sibling_count", RangeValue::Int(3)))
            .unwrap();
        g.assert_fact(Triple::learned("alice", "alice", "sibling_count", RangeValue::Int(2)))
            .unwrap();
        g.assert_fact(Triple::learned("bob", "bob", "likes", entity("jazz"))).unwrap();
        g.bump_popularity(&["music"]);
        g.persist("alice").unwrap();
        g.persist("bob").unwrap();
    }
    // one journal file per user, keyed by user id
    let mut files: Vec<String> = fs::read_dir(dir.path().join("users"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
        .collect();
    files.sort();
    assert_eq!(files, vec!["alice.jsonl", "bob.jsonl"]);

    let g = graph().with_store(Store::open(dir.path()).unwrap()).unwrap();
    g.load_user("alice").unwrap();
    g.load_user("bob").unwrap();
    let alice = g.query(Some("alice"), "alice", "sibling_count").unwrap();
    assert_eq!(alice.len(), 1);
    assert_eq!(alice[0].range_value, RangeValue::Int(2));
    assert_eq!(g.popularity("music"), Some(4.0));
    // bob's view never sees alice's facts and vice versa
    assert!(g.query(Some("bob"), "alice", "sibling_count").unwrap().is_empty());
    assert!(g.query(Some("alice"), "bob", "likes").unwrap().is_empty());
    // compaction dropped the superseded record
    let journal = fs::read_to_string(dir.path().join("users/alice.jsonl")).unwrap();
    assert_eq!(journal.lines().count(), 1);
    // never-seen user loads as an empty profile
    g.load_user("carol").unwrap();
    assert!(g.learned_triples("carol").is_empty());
}
