use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use kgchat_core::fixture_dir;
use kgchat_core::kg::{KnowledgeGraph, RangeKind, Tense};
use kgchat_core::lexicalizer::{Lexicalizer, RealizationContext};
use kgchat_core::nlu::{
    restore_punctuation, ActClassifier, Analysis, Analyzer, AnalyzerInput, EntityLinker, Hypothesis, Nlu, NluConfig,
    NluError, PatternIndex, PropertyDetector, Punct, RuleTables, Segment, Stage, TenseClassifier, Terminal,
};
use kgchat_core::templates::{generate_da_patterns, StructureRegistry};
use kgchat_core::{Bindings, DialogueAct, Filler};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

struct Fixture {
    graph: Arc<KnowledgeGraph>,
    structures: StructureRegistry,
    nlu: Nlu,
}

fn fixture() -> Fixture {
    let dir = fixture_dir();
    let graph = Arc::new(KnowledgeGraph::load(&dir).unwrap());
    let structures = StructureRegistry::load(&dir.join("structures.json")).unwrap();
    let nlu = Nlu::new(graph.clone(), &structures, RuleTables::load(&dir).unwrap(), NluConfig::default());
    Fixture { graph, structures, nlu }
}

fn rules() -> RuleTables {
    RuleTables::load(&fixture_dir()).unwrap()
}

fn hyp(text: &str) -> Hypothesis {
    Hypothesis::new(text, 1.0).unwrap()
}

fn segment_texts(nlu: &Nlu, text: &str) -> Vec<String> {
    nlu.segment(&hyp(text), 0).into_iter().map(|s| s.text).collect()
}

fn annotate(nlu: &Nlu, text: &str) -> kgchat_core::nlu::SegmentAnnotations {
    let mut out = nlu.annotate_batch(&[hyp(text)]).unwrap();
    assert_eq!(out.segments.len(), 1, "{text}");
    out.segments.remove(0).annotations
}

#[test]
fn hypothesis_validation() {
    assert!(matches!(Hypothesis::new("   ", 0.5), Err(NluError::EmptyHypothesis)));
    assert!(matches!(Hypothesis::new("hi", 0.0), Err(NluError::Confidence(_))));
    assert!(matches!(Hypothesis::new("hi", 1.5), Err(NluError::Confidence(_))));
    assert_eq!(Hypothesis::from_typed("Do you like music?").unwrap().text, "do you like music");
}

#[test]
fn punctuation_restoration_examples() {
    let r = rules();
    let marks = |s: &str| -> Vec<Punct> {
        let toks: Vec<&str> = s.split(' ').collect();
        restore_punctuation(&toks, &r).into_iter().map(|(_, p)| p).collect()
    };
    use Punct::*;
    assert_eq!(
        marks("hello how are you what's your name"),
        [Period, None, None, Question, None, None, Question]
    );
    assert_eq!(marks("yes"), [Period]);
    assert_eq!(marks("i like funk and i like jazz"), [None, None, Period, None, None, None, Period]);
    assert_eq!(marks("you were born in prague right"), [None, None, None, None, Comma, Question]);
}

#[test]
fn segmentation_examples() {
    let f = fixture();
    assert_eq!(segment_texts(&f.nlu, "hello how are you what's your name"), ["hello", "how are you", "what's your name"]);
    assert_eq!(segment_texts(&f.nlu, "thanks"), ["thanks"]);
    assert_eq!(
        segment_texts(&f.nlu, "it's going good what happened today in history"),
        ["it's going good", "what happened today in history"]
    );
    assert_eq!(segment_texts(&f.nlu, "tom and jerry like cheese"), ["tom and jerry like cheese"]);
    let segs = f.nlu.segment(&hyp("hey how many siblings do you have"), 2);
    assert_eq!(segs.len(), 2);
    assert_eq!((segs[1].hypothesis_index, segs[1].segment_index), (2, 1));
    assert_eq!(segs[1].terminal, Terminal::Question);
}

const VOCAB: &[&str] = &[
    "hello", "hi", "hey", "thanks", "what", "what's", "who", "how", "do", "did", "is", "was", "you", "i", "your",
    "name", "like", "music", "and", "but", "so", "have", "siblings", "right", "born", "in", "prague", "tom", "hanks",
    "many", "went", "it's", "that's", "funk", "because", "will", "visit",
];

fn utterance() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(VOCAB), 1..12).prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn segments_reconstruct_hypothesis(text in utterance()) {
        let r = rules();
        let segs = kgchat_core::nlu::segment(&hyp(&text), 0, &r);
        let joined: Vec<&str> = segs.iter().map(|s| s.text.as_str()).collect();
        prop_assert_eq!(joined.join(" "), text);
        for (i, s) in segs.iter().enumerate() {
            prop_assert_eq!(s.segment_index, i);
        }
    }

    #[test]
    fn segmentation_is_idempotent(text in utterance()) {
        let r = rules();
        for s in kgchat_core::nlu::segment(&hyp(&text), 0, &r) {
            let again = kgchat_core::nlu::segment(&hyp(&s.text), 0, &r);
            prop_assert_eq!(again.len(), 1);
            prop_assert_eq!(&again[0].text, &s.text);
            prop_assert_eq!(again[0].terminal, s.terminal);
        }
    }

    #[test]
    fn last_token_always_terminated(text in utterance()) {
        let toks: Vec<&str> = text.split(' ').collect();
        let marks = restore_punctuation(&toks, &rules());
        prop_assert!(matches!(marks.last().unwrap().1, Punct::Period | Punct::Question));
    }
}

#[test]
fn dialogue_act_examples() {
    let f = fixture();
    let top = |t: &str| annotate(&f.nlu, t).dialogue_acts[0].clone();
    assert_eq!(top("do you like music").act, DialogueAct::QueYesno);
    assert_eq!(top("who starred in matrix").act, DialogueAct::QueWhSub);
    assert_eq!(top("thanks a lot").act, DialogueAct::FormThx);
    assert_eq!(top("alfred nobel was born in france right").act, DialogueAct::QueYesno);
    assert_eq!(top("yes that's right").act, DialogueAct::AnsAffirm);
    let other = top("zxqv frobnicate");
    assert_eq!(other.act, DialogueAct::InvOther);
    assert_eq!(other.confidence, 0.1);
}

#[test]
fn hypothesis_lists_sorted_and_bounded() {
    let f = fixture();
    for t in ["do you like music", "i have three siblings", "do you like tom hanks", "what is your name"] {
        let a = annotate(&f.nlu, t);
        assert!(a.dialogue_acts.len() <= 3 && a.properties.len() <= 3);
        for w in a.dialogue_acts.windows(2) {
            assert!(w[0].confidence > w[1].confidence || (w[0].confidence == w[1].confidence && w[0].act.path() < w[1].act.path()));
        }
        for w in a.properties.windows(2) {
            assert!(w[0].confidence >= w[1].confidence);
        }
    }
}

#[test]
fn generated_patterns_classify_to_their_act() {
    let f = fixture();
    let report = generate_da_patterns(&f.graph, &f.structures);
    assert!(report.failures.is_empty());
    for p in &report.patterns {
        let seg = Segment {
            hypothesis_index: 0,
            segment_index: 0,
            text: p.pattern.clone(),
            terminal: Terminal::Period,
        };
        let patterns = Arc::new(PatternIndex::build(&f.graph, &f.structures));
        let acts = ActClassifier::new(patterns, Arc::new(rules()), 3).classify(&AnalyzerInput {
            segment: &seg,
            mentions: &[],
        });
        let hit = acts.iter().find(|a| a.act == p.act);
        assert!(hit.is_some_and(|a| a.confidence == 1.0), "{} -> {:?}", p.pattern, acts);
        assert_eq!(acts[0].act, p.act, "{}", p.pattern);
    }
}

/// Realizes every generated pattern with random fixture fillers and classifies
/// the recognizer-style text. Returns (correct, total).
fn filled_round_trip(seed: u64, rounds: usize) -> (usize, usize) {
    let f = fixture();
    f.graph.ensure_user("u1").unwrap();
    let lex = Lexicalizer::load(&fixture_dir()).unwrap();
    let ctx = RealizationContext::new("u1", "alquist");
    let report = generate_da_patterns(&f.graph, &f.structures);
    let entities = f.graph.entities();
    let mut rng = StdRng::seed_from_u64(seed);
    let (mut correct, mut total) = (0, 0);
    for _ in 0..rounds {
        for p in &report.patterns {
            let prop = f.graph.property(&p.property_id).unwrap();
            let dom = entities.choose(&mut rng).unwrap().id.clone();
            let ran = match &prop.range_kind {
                RangeKind::Integer => Filler::Int(rng.gen_range(0..6)),
                RangeKind::String => Filler::Str(entities.choose(&mut rng).unwrap().canonical_name.clone()),
                RangeKind::Entity(_) => Filler::Entity(entities.choose(&mut rng).unwrap().id.clone()),
            };
            let b = Bindings::new(Some(Filler::Entity(dom)), Some(ran));
            let Ok(text) = lex.realize(&p.pattern, &b, &ctx, &f.graph) else { continue };
            let out = f.nlu.annotate_batch(&[Hypothesis::from_typed(&text).unwrap()]).unwrap();
            total += 1;
            if out.segments.len() == 1 && out.segments[0].annotations.dialogue_acts[0].act == p.act {
                correct += 1;
            }
        }
    }
    (correct, total)
}

#[test]
fn filled_patterns_mostly_classify_to_their_act() {
    let (correct, total) = filled_round_trip(7, 3);
    assert!(total > 0);
    assert!(correct as f64 / total as f64 >= 0.9, "{correct}/{total}");
}

#[test]
fn linking_examples() {
    let f = fixture();
    let a = annotate(&f.nlu, "do you like tom hanks");
    assert_eq!(a.mentions.len(), 1);
    assert_eq!(a.mentions[0].surface, "tom hanks");
    assert_eq!(a.mentions[0].candidates[0].entity_id, "tom_hanks");
    assert!(annotate(&f.nlu, "hello").mentions.is_empty());
    let a = annotate(&f.nlu, "alfred nobel was born in france right");
    let surfaces: Vec<&str> = a.mentions.iter().map(|m| m.surface.as_str()).collect();
    assert_eq!(surfaces, ["alfred nobel", "france"]);
}

/// Longest-match oracle: every alias occurrence that is not contained in a
/// longer occurrence must be reported.
#[test]
fn linking_agrees_with_alias_scan() {
    let f = fixture();
    let linker = EntityLinker::new(f.graph.clone());
    for text in ["i like tom hanks and the matrix", "karel capek was born in malé svatoňovice", "funk and rock music"] {
        let words: Vec<&str> = text.split(' ').collect();
        let surfaces: Vec<String> = f.graph.surface_forms().into_iter().map(|(s, _)| s.to_lowercase()).collect();
        let mut expected = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let best = (1..=words.len() - i)
                .rev()
                .find(|&n| surfaces.contains(&words[i..i + n].join(" ")));
            match best {
                Some(n) => {
                    expected.push(words[i..i + n].join(" "));
                    i += n;
                }
                None => i += 1,
            }
        }
        let got: Vec<String> = linker.link(text).into_iter().map(|m| m.surface).collect();
        assert_eq!(got, expected, "{text}");
    }
}

#[test]
fn property_examples() {
    let f = fixture();
    let p = &annotate(&f.nlu, "what is your name").properties[0];
    assert_eq!(p.property_id, "name");
    assert_eq!(p.domain_span.as_ref().unwrap().text, "your");
    assert!(p.range_span.is_none());
    let p = &annotate(&f.nlu, "is your name alquist").properties[0];
    assert_eq!(p.property_id, "name");
    assert_eq!(p.domain_span.as_ref().unwrap().text, "your");
    assert_eq!(p.range_span.as_ref().unwrap().text, "alquist");
    assert!(annotate(&f.nlu, "zxqv frobnicate").properties.is_empty());
    let p = &annotate(&f.nlu, "i have three siblings").properties[0];
    assert_eq!((p.property_id.as_str(), p.range_span.as_ref().unwrap().text.as_str()), ("sibling_count", "three"));
}

#[test]
fn tense_examples() {
    let t = TenseClassifier::new(Arc::new(rules()));
    assert_eq!(t.classify("i went to a university"), Tense::Past);
    assert_eq!(t.classify("i like funk"), Tense::Present);
    assert_eq!(t.classify("i will visit prague"), Tense::Future);
    assert_eq!(t.classify("i am going to visit prague"), Tense::Future);
    assert_eq!(t.classify("i visited prague"), Tense::Past);
    assert_eq!(t.classify("i will"), Tense::Present);
}

struct Counting {
    inner: Box<dyn Analyzer>,
    calls: Arc<Mutex<Vec<usize>>>,
}

impl Analyzer for Counting {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn analyze(&self, batch: &[AnalyzerInput<'_>]) -> Result<Vec<Analysis>, NluError> {
        self.calls.lock().unwrap().push(batch.len());
        self.inner.analyze(batch)
    }
}

#[test]
fn each_analyzer_called_once_per_turn() {
    let mut f = fixture();
    let rules = Arc::new(rules());
    let patterns = Arc::new(PatternIndex::build(&f.graph, &f.structures));
    let stages: Vec<(Stage, Box<dyn Analyzer>)> = vec![
        (Stage::Linking, Box::new(EntityLinker::new(f.graph.clone()))),
        (Stage::Acts, Box::new(ActClassifier::new(patterns.clone(), rules.clone(), 3))),
        (Stage::Properties, Box::new(PropertyDetector::new(patterns, rules.clone(), 3))),
        (Stage::Tense, Box::new(TenseClassifier::new(rules))),
    ];
    let mut logs = Vec::new();
    for (stage, inner) in stages {
        let calls = Arc::new(Mutex::new(Vec::new()));
        f.nlu.replace(stage, Box::new(Counting { inner, calls: calls.clone() }));
        logs.push(calls);
    }
    let hyps = [
        hyp("hello how are you what's your name"),
        hyp("do you like music"),
        hyp("thanks a lot"),
    ];
    let out = f.nlu.annotate_batch(&hyps).unwrap();
    assert_eq!(out.segments.len(), 5);
    for log in &logs {
        assert_eq!(*log.lock().unwrap(), [5]);
    }
    let keys: Vec<(usize, usize)> = out.segments.iter().map(|s| (s.segment.hypothesis_index, s.segment.segment_index)).collect();
    assert_eq!(keys, [(0, 0), (0, 1), (0, 2), (1, 0), (2, 0)]);
    assert_eq!(out.calls.iter().filter(|c| c.name != "segmenter").count(), 4);
}

#[test]
fn batch_size_bounds() {
    let f = fixture();
    assert!(matches!(f.nlu.annotate_batch(&[]), Err(NluError::BatchSize { .. })));
    let six = vec![hyp("hi"); 6];
    assert!(matches!(f.nlu.annotate_batch(&six), Err(NluError::BatchSize { got: 6, max: 5 })));
}

#[test]
fn batched_equals_sequential() {
    let f = fixture();
    let words: Vec<String> = VOCAB
        .iter()
        .map(|w| w.to_string())
        .chain(f.graph.surface_forms().into_iter().map(|(s, _)| s.to_lowercase()))
        .collect();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.gen_range(1..=3);
        let hyps: Vec<Hypothesis> = (0..n)
            .map(|_| {
                let len = rng.gen_range(1..10);
                let text: Vec<&str> = (0..len).map(|_| words.choose(&mut rng).unwrap().as_str()).collect();
                hyp(&text.join(" "))
            })
            .collect();
        let batched = f.nlu.annotate_batch(&hyps).unwrap().segments;
        let sequential = f.nlu.annotate_sequential(&hyps).unwrap();
        assert_eq!(batched, sequential);
    }
}

struct Broken;

impl Analyzer for Broken {
    fn name(&self) -> &str {
        "broken"
    }

    fn analyze(&self, _: &[AnalyzerInput<'_>]) -> Result<Vec<Analysis>, NluError> {
        Err(NluError::Analyzer {
            name: "broken".into(),
            message: "down".into(),
        })
    }
}

#[test]
fn analyzer_failure_degrades_to_other() {
    let mut f = fixture();
    f.nlu.replace(Stage::Properties, Box::new(Broken));
    let out = f.nlu.annotate_batch(&[hyp("do you like music")]).unwrap();
    let a = &out.segments[0].annotations;
    assert_eq!(a.dialogue_acts[0].act, DialogueAct::InvOther);
    assert!(out.calls.iter().any(|c| c.name == "broken" && c.failed));
}

struct Nothing(AtomicUsize);

impl Analyzer for Nothing {
    fn name(&self) -> &str {
        "nothing"
    }

    fn analyze(&self, batch: &[AnalyzerInput<'_>]) -> Result<Vec<Analysis>, NluError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Ok(batch.iter().map(|_| Analysis::Acts(Vec::new())).collect())
    }
}

#[test]
fn empty_act_list_falls_back() {
    let mut f = fixture();
    f.nlu.replace(Stage::Acts, Box::new(Nothing(AtomicUsize::new(0))));
    let a = annotate(&f.nlu, "do you like music");
    assert_eq!(a.dialogue_acts, [kgchat_core::nlu::ActHypothesis::fallback()]);
    assert_eq!(a.properties[0].property_id, "likes");
}
