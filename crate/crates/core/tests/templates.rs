use std::fs;

use kgchat_core::fixture_dir;
use kgchat_core::kg::{KnowledgeGraph, PropertyDef, RangeKind};
use kgchat_core::templates::{
    generate_da_patterns, AdjacencyPair, PairRegistry, StructureRegistry, TemplateError, Templates,
};
use kgchat_core::{Bindings, DialogueAct, Filler};

fn structures() -> StructureRegistry {
    StructureRegistry::load(&fixture_dir().join("structures.json")).unwrap()
}

fn graph() -> KnowledgeGraph {
    KnowledgeGraph::load(&fixture_dir()).unwrap()
}

fn bare_property(id: &str, words: &[(&str, &str)]) -> PropertyDef {
    PropertyDef {
        id: id.into(),
        domain_classes: vec!["thing".into()],
        range_kind: RangeKind::Entity("thing".into()),
        functional: false,
        personalized: false,
        popularity: 1.0,
        word_slots: words.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        sentence_structures: Default::default(),
        subproperty_of: None,
        about: vec![],
    }
}

#[test]
fn structures_assemble_from_word_slots() {
    let reg = structures();
    let g = graph();
    let name = g.property("name").unwrap();
    assert_eq!(reg.realize_structure("OpenQuestion_Object_Positive", &name).unwrap(), "What is #DOM#'s name?");
    assert_eq!(reg.realize_structure("ProvideInformation_Negative", &name).unwrap(), "#DOM#'s name is not #RAN#.");
    assert_eq!(reg.realize_structure("YesNoQuestion_Positive", &name).unwrap(), "Is #DOM#'s name #RAN#?");
    let likes = g.property("likes").unwrap();
    assert_eq!(reg.realize_structure("DoYou", &likes).unwrap(), "Do #DOM# like #RAN#?");
}

#[test]
fn long_placeholder_spelling_is_normalized() {
    let mut p = bare_property("likes2", &[]);
    p.sentence_structures.insert("DoYou".into(), "Do #DOMAIN# like #RANGE#".into());
    assert_eq!(structures().realize_structure("DoYou", &p).unwrap(), "Do #DOM# like #RAN#");
}

#[test]
fn missing_word_slot_names_everything() {
    let p = bare_property("odd", &[("Verb", "see")]);
    match structures().realize_structure("OpenQuestion_Object_Positive", &p) {
        Err(TemplateError::MissingSlot { property, structure, category }) => {
            assert_eq!(property, "odd");
            assert_eq!(structure, "OpenQuestion_Object_Positive");
            assert_eq!(category, "ObjectNoun");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        structures().realize_structure("Forward_Question", &p),
        Err(TemplateError::NoPattern { .. })
    ));
}

#[test]
fn registry_rejects_inconsistent_question_flag() {
    let bad = r#"{"structures":[{"name":"X","encodes_da":"da.Inf.Obj","asks_question":true}]}"#;
    assert!(matches!(StructureRegistry::from_json(bad, "x"), Err(TemplateError::Registry(_))));
}

#[test]
fn da_patterns_from_fixture() {
    let g = graph();
    let report = generate_da_patterns(&g, &structures());
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    let name: Vec<_> = report.patterns.iter().filter(|p| p.property_id == "name").collect();
    // the fixture's name property declares exactly these structures
    let declared = g.property("name").unwrap().sentence_structures.len();
    assert_eq!(name.len(), declared);
    let ynq = name.iter().find(|p| p.pattern == "Is #DOM#'s name #RAN#?").unwrap();
    assert_eq!(ynq.act, DialogueAct::QueYesno);
    let total: usize = g.properties().iter().map(|p| p.sentence_structures.len()).sum();
    assert_eq!(report.patterns.len(), total);
    for p in &report.patterns {
        assert!(!p.pattern.contains('{'), "{}", p.pattern);
    }
}

#[test]
fn empty_graph_generates_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let g = KnowledgeGraph::load(dir.path()).unwrap();
    assert!(generate_da_patterns(&g, &structures()).patterns.is_empty());
}

#[test]
fn shipped_pairs_validate() {
    let (t, report) = Templates::load(&fixture_dir()).unwrap();
    assert!(report.is_clean(), "{:?}", report.violations);
    let text = fs::read_to_string(fixture_dir().join("pairs.json")).unwrap();
    let declared: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(t.pairs.len(), declared["pairs"].as_array().unwrap().len());
    let open = t.pairs.get("open_question").unwrap();
    assert_eq!(open.entry, "ask");
}

fn open_question() -> AdjacencyPair {
    let (t, _) = Templates::load(&fixture_dir()).unwrap();
    t.pairs.get("open_question").unwrap().clone()
}

#[test]
fn unreachable_node_is_reported_and_pair_excluded() {
    let mut pair = open_question();
    pair.nodes.insert("orphan".into(), pair.nodes["inform"].clone());
    pair.terminals.insert("orphan".into());
    let (reg, report) = PairRegistry::from_pairs(vec![pair], &structures());
    assert!(reg.is_empty());
    assert_eq!(report.violations.len(), 1);
    assert_eq!(report.violations[0].message, "unreachable node");
    assert_eq!(report.violations[0].node.as_deref(), Some("orphan"));
}

#[test]
fn overlapping_edge_acts_are_reported() {
    let mut pair = open_question();
    for to in ["inform", "apologize"] {
        pair.edges.push(kgchat_core::templates::Edge {
            from: "inform".into(),
            da: "da.Ans".into(),
            to: to.into(),
        });
    }
    let (_, report) = PairRegistry::from_pairs(vec![pair], &structures());
    assert!(report.violations.iter().any(|v| v.message.contains("overlap")), "{:?}", report.violations);
}

#[test]
fn dead_end_and_unknown_structure_are_reported() {
    let mut pair = open_question();
    pair.terminals.remove("apologize");
    if let Some(kgchat_core::templates::Step::Say { say, .. }) = pair.nodes.get_mut("inform").unwrap().steps.first_mut() {
        *say = "NoSuchStructure".into();
    }
    let (_, report) = PairRegistry::from_pairs(vec![pair], &structures());
    let messages: Vec<_> = report.violations.iter().map(|v| v.message.as_str()).collect();
    assert!(messages.contains(&"non-terminal node without outgoing edge"));
    assert!(messages.iter().any(|m| m.contains("NoSuchStructure")));
}

#[test]
fn parse_error_is_an_error() {
    assert!(matches!(
        PairRegistry::from_json("{\"pairs\": [", "x", &structures()),
        Err(TemplateError::Parse { .. })
    ));
}

#[test]
fn match_pair_prefers_specific_triggers() {
    let (t, _) = Templates::load(&fixture_dir()).unwrap();
    let dom = Bindings::new(Some(Filler::Entity("alfred_nobel".into())), None);
    let p = t.pairs.match_pair(DialogueAct::QueWhOb, Some("born_in"), &dom).unwrap();
    assert_eq!(p.id, "open_question");
    let p = t.pairs.match_pair(DialogueAct::QueWhOb, Some("sibling_count"), &dom).unwrap();
    assert_eq!(p.id, "sibling_question");
    let p = t.pairs.match_pair(DialogueAct::FormThx, None, &Bindings::default()).unwrap();
    assert_eq!(p.id, "thanks");
    assert!(t.pairs.match_pair(DialogueAct::FormHello, None, &Bindings::default()).is_none());
    // a missing required slot rules the pair out
    assert!(t.pairs.match_pair(DialogueAct::QueYesno, Some("born_in"), &dom).is_none());
    // bot-initiated pairs are never matched from user acts
    assert!(t.pairs.match_pair(DialogueAct::ContAckn, None, &Bindings::default()).is_none());
    for _ in 0..3 {
        let again = t.pairs.match_pair(DialogueAct::QueWhOb, Some("sibling_count"), &dom).unwrap();
        assert_eq!(again.id, "sibling_question");
    }
}

#[test]
fn shipped_pack_realizes_everywhere() {
    let report = kgchat_core::validate::validate_data(&fixture_dir()).unwrap();
    assert!(report.realization.is_empty(), "{:#?}", report.realization);
    assert_eq!(report.violations(), 0);
}
