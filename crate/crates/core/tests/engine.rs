use std::path::Path;
use std::time::{Duration, Instant};

use kgchat_core::engine::{Engine, EngineConfig, EngineError, TurnRequest};
use kgchat_core::fixture_dir;
use kgchat_core::kg::RangeValue;
use kgchat_core::nlu::Hypothesis;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

fn engine(store: Option<&Path>) -> Engine {
    Engine::open(&fixture_dir(), store, EngineConfig::default()).unwrap()
}

fn say(engine: &Engine, conv: &str, text: &str) -> String {
    engine.handle_turn(&TurnRequest::typed(conv, text).unwrap()).unwrap().text
}

fn replay(engine: &Engine, user: &str, exchange: &[(&str, &str)]) {
    let conv = engine.create_conversation(user).unwrap();
    for (user_line, bot_line) in exchange {
        assert_eq!(say(engine, &conv, user_line), *bot_line, "reply to {user_line:?}");
    }
}

#[test]
fn golden_music() {
    replay(
        &engine(None),
        "u1",
        &[
            ("Do you like music?", "Yes, I love music! What music genre is your favorite?"),
            ("I really like funk.", "I see!"),
        ],
    );
}

#[test]
fn golden_nobel() {
    replay(
        &engine(None),
        "u1",
        &[
            (
                "Alfred Nobel was born in France, right?",
                "No, Alfred Nobel was born in Sweden. Did you know that the synthetic element nobelium is named after him?",
            ),
            ("No, I didn't! Thanks for telling me.", "No problem."),
        ],
    );
}

#[test]
fn golden_movie() {
    replay(
        &engine(None),
        "u1",
        &[(
            "What movie is your favorite? And... do you like Tom Hanks?",
            "My favorite movie is Matrix. Yes, I like Tom Hanks.",
        )],
    );
}

#[test]
fn golden_unknown() {
    replay(
        &engine(None),
        "u1",
        &[
            ("Where was Jara Cimrman born?", "I'm sorry but I don't know that..."),
            ("Ah, don't worry about it.", "Thanks."),
        ],
    );
}

#[test]
fn golden_siblings_across_sessions() {
    let store = tempfile::tempdir().unwrap();
    {
        let e = engine(Some(store.path()));
        replay(&e, "u1", &[("I have three siblings.", "I see!")]);
    }
    let e = engine(Some(store.path()));
    replay(
        &e,
        "u1",
        &[
            ("Hey, how many siblings do you have?", "I don't have any siblings. You have three siblings, right?"),
            ("Yes, that's right.", "I see!"),
            ("I have two siblings.", "Oh, really? I remembered something else."),
        ],
    );
    drop(e);
    let e = engine(Some(store.path()));
    let profile = e.profile("u1").unwrap();
    let siblings: Vec<_> = profile.iter().filter(|t| t.property_id == "sibling_count").collect();
    assert_eq!(siblings.len(), 1);
    assert_eq!(siblings[0].range_value, RangeValue::Int(2));
}

#[test]
fn sessions_survive_reopen() {
    let store = tempfile::tempdir().unwrap();
    let conv = {
        let e = engine(Some(store.path()));
        let conv = e.create_conversation("u7").unwrap();
        say(&e, &conv, "do you like music");
        conv
    };
    let e = engine(Some(store.path()));
    let state = e.session(&conv).unwrap();
    assert_eq!(state.user_id, "u7");
    assert_eq!(state.turn_counter, 1);
    assert!(state.pending_question);
    // the open forward question is still answerable
    assert_eq!(say(&e, &conv, "i like funk"), "I see!");
}

#[test]
fn unknown_conversation_and_bad_user() {
    let e = engine(None);
    assert!(matches!(
        e.handle_turn(&TurnRequest::typed("nope", "hi").unwrap()),
        Err(EngineError::UnknownConversation(_))
    ));
    assert!(matches!(e.create_conversation(" "), Err(EngineError::InvalidUser(_))));
    assert!(matches!(e.create_conversation("alquist"), Err(EngineError::InvalidUser(_))));
}

#[test]
fn nonce_retry_returns_the_same_reply() {
    let e = engine(None);
    let conv = e.create_conversation("u1").unwrap();
    let mut req = TurnRequest::typed(&conv, "do you like music").unwrap();
    req.nonce = Some("n-1".into());
    let first = e.handle_turn(&req).unwrap();
    let again = e.handle_turn(&req).unwrap();
    assert_eq!(first, again);
    assert_eq!(e.session(&conv).unwrap().turn_counter, 1);
}

#[test]
fn debug_trace_is_reproducible() {
    let run = || {
        let e = engine(None);
        let conv = e.create_conversation("u1").unwrap();
        ["do you like music", "alfred nobel was born in france right", "i have two siblings"]
            .iter()
            .map(|t| e.handle_turn(&TurnRequest::typed(&conv, t).unwrap()).unwrap().debug.without_timings())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn best_recognition_hypothesis_wins() {
    let e = engine(None);
    let conv = e.create_conversation("u1").unwrap();
    let req = TurnRequest {
        conversation_id: conv,
        hypotheses: vec![
            Hypothesis::new("zxqv blorp", 0.9).unwrap(),
            Hypothesis::new("do you like music", 0.6).unwrap(),
        ],
        nonce: None,
    };
    let r = e.handle_turn(&req).unwrap();
    assert_eq!(r.text, "Yes, I love music! What music genre is your favorite?");
    assert_eq!(r.debug.hypothesis_index, 1);
    assert!(r.debug.selected.iter().all(|a| (a.confidence - 0.6).abs() < 1e-9));
}

const OPENERS: &[&str] = &[
    "do you like", "what is your", "where was", "who starred in", "i have", "i like", "tell me about", "how many",
    "is", "yes", "no", "thanks", "sorry", "i went to", "you were born in", "what", "and", "my favorite movie is",
];
const WORDS: &[&str] = &[
    "music", "funk", "rock", "tom hanks", "matrix", "alfred nobel", "france", "sweden", "prague", "siblings", "two",
    "three", "name", "movie", "genre", "university", "karel capek", "robots", "right", "born", "favorite", "you", "me",
    "blorp", "the", "a", "jara cimrman", "marie curie", "nobelium", "zxqv",
];

/// Placeholders, braces or raw identifiers in a reply.
fn leaks(text: &str) -> bool {
    text.contains('#') || text.contains('{') || text.contains('}') || text.contains('_') || text.contains('<')
}

fn question_sentences(text: &str) -> usize {
    text.matches('?').count()
}

pub fn random_utterance(rng: &mut StdRng) -> String {
    let segments = rng.gen_range(1..=3);
    let mut parts = Vec::new();
    for _ in 0..segments {
        let mut s = vec![*OPENERS.choose(rng).unwrap()];
        for _ in 0..rng.gen_range(0..4) {
            s.push(WORDS.choose(rng).unwrap());
        }
        let end = *["", "?", ".", "!", " right?"].choose(rng).unwrap();
        parts.push(format!("{}{end}", s.join(" ")));
    }
    parts.join(" ")
}

#[test]
fn fuzz_invariants() {
    let e = engine(None);
    let mut rng = StdRng::seed_from_u64(1000);
    let mut conv = e.create_conversation("fuzz").unwrap();
    let mut popularity = e.graph().popularity_snapshot();
    let mut elapsed = Duration::ZERO;
    for turn in 0..1000 {
        if turn % 50 == 0 {
            conv = e.create_conversation("fuzz").unwrap();
        }
        let hypotheses = (0..rng.gen_range(1..=3))
            .map(|_| Hypothesis::new(&random_utterance(&mut rng), rng.gen_range(0.1..=1.0)).unwrap())
            .collect();
        let req = TurnRequest {
            conversation_id: conv.clone(),
            hypotheses,
            nonce: None,
        };
        let started = Instant::now();
        let r = e.handle_turn(&req).unwrap();
        elapsed += started.elapsed();
        assert!(!r.text.is_empty(), "{req:?}\n{:#?}\n{:#?}", r.debug.selected, r.debug.steps);
        assert!(!leaks(&r.text), "{:?} -> {}", req.hypotheses, r.text);
        assert!(question_sentences(&r.text) <= 1, "{:?} -> {}", req.hypotheses, r.text);
        let mut ids: Vec<&str> = r.debug.selected.iter().map(|a| a.pair_id.as_str()).collect();
        let n = ids.len();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n, "{:?}", r.debug.selected);
        let now = e.graph().popularity_snapshot();
        for (id, before) in &popularity {
            assert!(now[id] >= *before, "{id} dropped");
        }
        popularity = now;
    }
    eprintln!("mean handle_turn latency: {:?}", elapsed / 1000);
}
