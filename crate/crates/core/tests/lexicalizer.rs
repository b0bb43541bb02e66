use kgchat_core::fixture_dir;
use kgchat_core::kg::{KnowledgeGraph, Tense};
use kgchat_core::lexicalizer::{Case, LexError, Lexicalizer, Person, RealizationContext};
use kgchat_core::{Bindings, Filler, Slot};
use proptest::prelude::*;

fn setup() -> (KnowledgeGraph, Lexicalizer, RealizationContext) {
    let g = KnowledgeGraph::load(&fixture_dir()).unwrap();
    g.ensure_user("u1").unwrap();
    let lex = Lexicalizer::load(&fixture_dir()).unwrap();
    (g, lex, RealizationContext::new("u1", "alquist"))
}

fn ent(id: &str) -> Option<Filler> {
    Some(Filler::Entity(id.into()))
}

#[test]
fn fills_names_and_punctuates() {
    let (g, lex, ctx) = setup();
    let b = Bindings::new(ent("karel_capek"), ent("robots"));
    assert_eq!(
        lex.realize("#DOM# loves to talk about #RAN#", &b, &ctx, &g).unwrap(),
        "Karel Čapek loves to talk about robots."
    );
}

#[test]
fn bot_subject_takes_first_person_agreement() {
    let (g, lex, ctx) = setup();
    let b = Bindings::new(ent("alquist"), ent("robots"));
    assert_eq!(
        lex.realize("#DOM# loves to talk about #RAN#", &b, &ctx, &g).unwrap(),
        "I love to talk about robots."
    );
}

#[test]
fn possessive_roles() {
    let (g, lex, ctx) = setup();
    let b = Bindings::new(ent("alquist"), Some(Filler::Str("Alquist".into())));
    assert_eq!(
        lex.realize("Is #DOM#'s name #RAN#?", &b, &ctx, &g).unwrap(),
        "Is my name Alquist?"
    );
    let b = Bindings::new(ent("u1"), None);
    assert_eq!(
        lex.realize("What music genre is #DOM#'s favorite?", &b, &ctx, &g).unwrap(),
        "What music genre is your favorite?"
    );
}

#[test]
fn inverted_auxiliary_agrees() {
    let (g, lex, ctx) = setup();
    let b = Bindings::new(ent("tom_hanks"), ent("music"));
    assert_eq!(lex.realize("Do #DOM# like #RAN#?", &b, &ctx, &g).unwrap(), "Does Tom Hanks like music?");
    let b = Bindings::new(ent("u1"), None);
    assert_eq!(lex.realize("Where was #DOM# born?", &b, &ctx, &g).unwrap(), "Where were you born?");
}

#[test]
fn quantities_are_spelled_and_pluralized() {
    let (g, lex, ctx) = setup();
    let b = Bindings::new(ent("u1"), Some(Filler::Int(3)));
    assert_eq!(
        lex.realize("#DOM# <V:have> #RAN# sibling, right?", &b, &ctx, &g).unwrap(),
        "You have three siblings, right?"
    );
    let b = Bindings::new(ent("tom_hanks"), Some(Filler::Int(1)));
    assert_eq!(
        lex.realize("#DOM# <V:have> #RAN# sibling.", &b, &ctx, &g).unwrap(),
        "Tom Hanks has one sibling."
    );
    let b = Bindings::new(ent("alquist"), Some(Filler::Int(0)));
    assert_eq!(
        lex.realize("#DOM# <NEG:have> any siblings.", &b, &ctx, &g).unwrap(),
        "I don't have any siblings."
    );
}

#[test]
fn question_frame_follows_tense() {
    let (g, lex, mut ctx) = setup();
    let b = Bindings::new(ent("u1"), None);
    assert_eq!(
        lex.realize("Which university <Q:study> #DOM# at?", &b, &ctx, &g).unwrap(),
        "Which university do you study at?"
    );
    ctx.tense = Tense::Past;
    assert_eq!(
        lex.realize("Which university <Q:study> #DOM# at?", &b, &ctx, &g).unwrap(),
        "Which university did you study at?"
    );
    assert_eq!(
        lex.realize("How many siblings <Q:have> #DOM#?", &Bindings::new(ent("alquist"), None), &ctx, &g)
            .unwrap(),
        "How many siblings did I have?"
    );
}

#[test]
fn repeat_mention_becomes_pronoun() {
    let (g, lex, ctx) = setup();
    let first = Bindings::new(ent("alfred_nobel"), ent("sweden"));
    let second = Bindings::new(ent("alfred_nobel"), Some(Filler::Str("the synthetic element nobelium".into())));
    let out = lex
        .realize_all(
            &[
                ("No, #DOM# was born in #RAN#.", &first),
                ("Did you know that #RAN# is named after #DOM#?", &second),
            ],
            &ctx,
            &g,
        )
        .unwrap();
    assert_eq!(
        out.join(" "),
        "No, Alfred Nobel was born in Sweden. Did you know that the synthetic element nobelium is named after him?"
    );
    assert_eq!(lex.pronominalize("robots", Case::Subject, &g), Some("they"));
    assert_eq!(lex.pronominalize("jara_cimrman", Case::Subject, &g), Some("he"));
}

#[test]
fn intervening_same_pronoun_keeps_name() {
    let (g, lex, ctx) = setup();
    let a = Bindings::new(ent("tom_hanks"), ent("forrest_gump"));
    let b = Bindings::new(ent("keanu_reeves"), ent("the_matrix_film"));
    let c = Bindings::new(ent("tom_hanks"), ent("united_states"));
    let out = lex
        .realize_all(
            &[
                ("#DOM# starred in #RAN#.", &a),
                ("#DOM# starred in #RAN#.", &b),
                ("#DOM# was born in #RAN#.", &c),
            ],
            &ctx,
            &g,
        )
        .unwrap();
    assert_eq!(out[2], "Tom Hanks was born in the United States.");
}

#[test]
fn unbound_placeholder_is_an_error() {
    let (g, lex, ctx) = setup();
    let b = Bindings::new(ent("alquist"), None);
    assert!(matches!(
        lex.realize("#DOM# <V:like> #RAN#.", &b, &ctx, &g),
        Err(LexError::Unbound(Slot::Ran))
    ));
    assert!(matches!(
        lex.realize("Do #DOM# {Verb} #RAN#?", &Bindings::new(ent("u1"), ent("music")), &ctx, &g),
        Err(LexError::Leak(_))
    ));
}

#[test]
fn retense_examples() {
    let (_, lex, _) = setup();
    let l = lex.lexicon();
    assert_eq!(l.interrogative("study", Tense::Past, Person::Second, "you"), "did you study");
    assert_eq!(l.interrogative("study", Tense::Present, Person::Second, "you"), "do you study");
    assert_eq!(l.retense("go", Tense::Past, Person::ThirdSingular), "went");
    assert_eq!(l.pluralize_phrase("child", 2), "two children");
}

fn role_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .filter(|t| matches!(t.as_str(), "i" | "me" | "my" | "you" | "your"))
        .map(|t| match t.as_str() {
            "i" | "me" | "my" => "bot".to_string(),
            _ => "user".to_string(),
        })
        .collect()
}

const PATTERNS: &[&str] = &[
    "#DOM# <V:like> #RAN#.",
    "Do #DOM# like #RAN#?",
    "#DOM#'s favorite movie is #RAN#.",
    "Did you know that #RAN# is named after #DOM#?",
    "#DOM# loves to talk about #RAN#!",
    "Was #DOM# born in #RAN#?",
];

proptest! {
    #[test]
    fn role_symmetry(idx in 0..PATTERNS.len(), past in any::<bool>()) {
        prop_assume!(role_tokens(PATTERNS[idx]).is_empty());
        let (g, lex, mut ctx) = setup();
        if past {
            ctx.tense = Tense::Past;
        }
        let a = lex.realize(PATTERNS[idx], &Bindings::new(ent("u1"), ent("alquist")), &ctx, &g).unwrap();
        let b = lex.realize(PATTERNS[idx], &Bindings::new(ent("alquist"), ent("u1")), &ctx, &g).unwrap();
        let swapped: Vec<String> = role_tokens(&a)
            .into_iter()
            .map(|r| if r == "bot" { "user".to_string() } else { "bot".to_string() })
            .collect();
        prop_assert_eq!(swapped, role_tokens(&b));
        let strip = |s: &str| s.split_whitespace().count();
        prop_assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn plural_iff_not_one(n in 0i64..200) {
        let (g, lex, ctx) = setup();
        let out = lex
            .realize("#DOM# <V:have> #RAN# sister.", &Bindings::new(ent("u1"), Some(Filler::Int(n))), &ctx, &g)
            .unwrap();
        prop_assert_eq!(out.contains("sisters"), n != 1);
        prop_assert!(!out.contains('#') && !out.contains("<V:"));
    }

    #[test]
    fn realize_is_deterministic(idx in 0..PATTERNS.len()) {
        let (g, lex, ctx) = setup();
        let b = Bindings::new(ent("tom_hanks"), ent("music"));
        let x = lex.realize(PATTERNS[idx], &b, &ctx, &g).unwrap();
        let y = lex.realize(PATTERNS[idx], &b, &ctx, &g).unwrap();
        prop_assert_eq!(x, y);
    }
}
