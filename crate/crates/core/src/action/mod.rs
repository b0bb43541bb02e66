//! Candidate actions for each segment and the per-turn selection among them.

mod select;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::bindings::{Bindings, Filler};
use crate::dialogue_act::{ActGroup, DialogueAct};
use crate::kg::{KnowledgeGraph, PropertyDef, RangeKind, RangeValue, Triple};
use crate::lexicalizer::parse_number;
use crate::nlu::{Mention, Role, SegmentAnnotations, SlotSpan};
use crate::templates::{AdjacencyPair, PairRegistry, Step, StructureRegistry, FORWARD_QUESTION, FUN_FACT};

pub use select::{score_units, select_actions, Selection, EXHAUSTIVE_LIMIT};

/// Pair that handles a segment nothing else could.
pub const FALLBACK_PAIR: &str = "acknowledge";
pub const FUN_FACT_PAIR: &str = "fun_fact";
pub const FORWARD_PAIR: &str = "forward_question";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SegmentRef {
    pub hypothesis_index: usize,
    pub segment_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Handle,
    FunFact,
    Forward,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Action {
    pub segment: SegmentRef,
    pub kind: ActionKind,
    pub da: DialogueAct,
    pub property_id: Option<String>,
    pub bindings: Bindings,
    pub pair_id: String,
    pub confidence: f64,
    pub asks_question: bool,
    pub popularity: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ActionConfig {
    pub threshold: f64,
    /// Multiplier for `Ans` acts while the bot awaits an answer.
    pub answer_boost: f64,
}

impl Default for ActionConfig {
    fn default() -> Self {
        ActionConfig {
            threshold: 0.05,
            answer_boost: 1.2,
        }
    }
}

/// What action creation needs besides the annotations.
pub struct ActionContext<'a> {
    pub graph: &'a KnowledgeGraph,
    pub pairs: &'a PairRegistry,
    pub structures: &'a StructureRegistry,
    pub user_id: &'a str,
    pub bot_id: &'a str,
    pub pending_question: bool,
    pub config: ActionConfig,
}

/// True if any structure said within one bot turn after entering the pair asks a question.
pub fn pair_asks_question(pair: &AdjacencyPair, structures: &StructureRegistry) -> bool {
    pair.branch_closure(&pair.entry).iter().any(|n| {
        pair.node(n).is_some_and(|plan| {
            plan.steps.iter().any(|s| match s {
                Step::Say { say, .. } => structures.get(say).is_some_and(|st| st.asks_question),
                Step::Kg { .. } => false,
            })
        })
    })
}

pub fn geometric_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

/// Popularity of an enrichment candidate: mean over its entities and its property.
pub fn candidate_popularity(entity_popularities: &[f64], property_popularity: f64) -> f64 {
    let mut all = entity_popularities.to_vec();
    all.push(property_popularity);
    mean(&all)
}

/// A slot value with the linking score that produced it, if any.
type Fill = (Filler, Option<f64>);

fn overlapping<'m>(span: &SlotSpan, mentions: &'m [Mention]) -> impl Iterator<Item = &'m Mention> + 'm {
    let (s, e) = (span.start, span.end);
    mentions.iter().filter(move |m| m.start < e && s < m.end)
}

fn role_entity(role: Role, ctx: &ActionContext<'_>) -> String {
    match role {
        Role::User => ctx.user_id.to_string(),
        Role::Bot => ctx.bot_id.to_string(),
    }
}

fn entity_fills(span: &SlotSpan, mentions: &[Mention], class_ok: impl Fn(&str) -> bool, ctx: &ActionContext<'_>) -> Vec<Fill> {
    if let Some(role) = span.role {
        let id = role_entity(role, ctx);
        return match ctx.graph.entity(&id) {
            Some(e) if class_ok(&e.class_id) => vec![(Filler::Entity(id), None)],
            _ => Vec::new(),
        };
    }
    let mut out = Vec::new();
    for m in overlapping(span, mentions) {
        for c in &m.candidates {
            if let Some(e) = ctx.graph.entity(&c.entity_id) {
                if class_ok(&e.class_id) {
                    out.push((Filler::Entity(e.id), Some(c.score)));
                }
            }
        }
    }
    out
}

fn domain_fills(span: &SlotSpan, mentions: &[Mention], property: &PropertyDef, ctx: &ActionContext<'_>) -> Vec<Fill> {
    entity_fills(
        span,
        mentions,
        |class| property.domain_classes.iter().any(|d| ctx.graph.is_a(class, d)),
        ctx,
    )
}

fn range_fills(span: &SlotSpan, mentions: &[Mention], property: &PropertyDef, ctx: &ActionContext<'_>) -> Vec<Fill> {
    match &property.range_kind {
        RangeKind::Integer => span
            .text
            .split_whitespace()
            .find_map(parse_number)
            .map(|n| vec![(Filler::Int(n), None)])
            .unwrap_or_default(),
        RangeKind::String => vec![(Filler::Str(span.text.clone()), None)],
        RangeKind::Entity(class) => entity_fills(span, mentions, |c| ctx.graph.is_a(c, class), ctx),
    }
}

fn optional(fills: Option<Vec<Fill>>) -> Vec<Option<Fill>> {
    match fills {
        None => vec![None],
        Some(list) => list.into_iter().map(Some).collect(),
    }
}

/// Handle actions for one segment: dialogue acts × property readings × linked
/// candidates, kept when classes fit, a pair accepts them and the combined
/// confidence clears the threshold.
pub fn create_actions(segment: SegmentRef, annotations: &SegmentAnnotations, ctx: &ActionContext<'_>) -> Vec<Action> {
    let mut best: BTreeMap<(String, DialogueAct, Option<String>, String), Action> = BTreeMap::new();
    for da_hyp in &annotations.dialogue_acts {
        let mut da_conf = da_hyp.confidence;
        if ctx.pending_question && da_hyp.act.group() == ActGroup::Ans {
            da_conf = (da_conf * ctx.config.answer_boost).min(1.0);
        }
        let mut readings: Vec<Option<&crate::nlu::PropertyHypothesis>> = annotations.properties.iter().map(Some).collect();
        readings.push(None);
        for reading in readings {
            let mut combos: Vec<(Option<&PropertyDef>, Bindings, Vec<f64>)> = Vec::new();
            let property = match reading {
                Some(h) => match ctx.graph.property(&h.property_id) {
                    Some(p) => Some((h, p)),
                    None => continue,
                },
                None => None,
            };
            match &property {
                None => combos.push((None, Bindings::default(), vec![da_conf])),
                Some((h, p)) => {
                    let doms = optional(h.domain_span.as_ref().map(|s| domain_fills(s, &annotations.mentions, p, ctx)));
                    let rans = optional(h.range_span.as_ref().map(|s| range_fills(s, &annotations.mentions, p, ctx)));
                    for d in &doms {
                        for r in &rans {
                            let mut parts = vec![da_conf, h.confidence];
                            parts.extend(d.iter().chain(r.iter()).filter_map(|(_, s)| *s));
                            let b = Bindings::new(d.as_ref().map(|f| f.0.clone()), r.as_ref().map(|f| f.0.clone()));
                            combos.push((Some(p), b, parts));
                        }
                    }
                }
            }
            for (prop, bindings, parts) in combos {
                let confidence = geometric_mean(&parts);
                if confidence < ctx.config.threshold {
                    continue;
                }
                let prop_id = prop.map(|p| p.id.as_str());
                let Some(pair) = ctx.pairs.match_pair(da_hyp.act, prop_id, &bindings) else { continue };
                let action = Action {
                    segment,
                    kind: ActionKind::Handle,
                    da: da_hyp.act,
                    property_id: prop_id.map(str::to_string),
                    popularity: binding_popularity(&bindings, prop, ctx.graph),
                    bindings,
                    pair_id: pair.id.clone(),
                    confidence,
                    asks_question: pair_asks_question(pair, ctx.structures),
                };
                let key = (
                    action.pair_id.clone(),
                    action.da,
                    action.property_id.clone(),
                    serde_json::to_string(&action.bindings).unwrap_or_default(),
                );
                if best.get(&key).is_none_or(|a| a.confidence < action.confidence) {
                    best.insert(key, action);
                }
            }
        }
    }
    let mut actions: Vec<Action> = best.into_values().collect();
    actions.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then_with(|| a.pair_id.cmp(&b.pair_id)));
    actions
}

fn binding_popularity(bindings: &Bindings, property: Option<&PropertyDef>, graph: &KnowledgeGraph) -> f64 {
    let pops: Vec<f64> = bindings.entity_ids().filter_map(|id| graph.popularity(id)).collect();
    match property {
        Some(p) => candidate_popularity(&pops, graph.popularity(&p.id).unwrap_or(p.popularity)),
        None if pops.is_empty() => 0.0,
        None => mean(&pops),
    }
}

/// Identity of a fact for "already said" bookkeeping.
pub fn fact_key(dom: &str, property: &str, ran: &RangeValue) -> String {
    format!("{dom}|{property}|{ran}")
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Enrichment {
    pub funfact: Option<Action>,
    pub forward: Option<Action>,
}

/// Inputs to enrichment for one turn.
pub struct EnrichmentInput<'a> {
    /// Entities the user mentioned this turn, in order.
    pub mentioned: &'a [String],
    /// Facts already spoken in this conversation.
    pub spoken: &'a BTreeSet<String>,
    /// Whether a selected handle action asks a question.
    pub question_selected: bool,
    /// Segment the enrichment is attributed to.
    pub segment: SegmentRef,
}

fn better(candidate: &Action, current: &Option<(Action, String)>, key: &str) -> bool {
    match current {
        None => true,
        Some((a, k)) => candidate.popularity > a.popularity || (candidate.popularity == a.popularity && key < k.as_str()),
    }
}

/// Most popular unspoken fun fact and most popular unanswered follow-up
/// question about the entities mentioned this turn.
pub fn generate_enrichment(input: &EnrichmentInput<'_>, ctx: &ActionContext<'_>) -> Enrichment {
    let graph = ctx.graph;
    let mut funfact: Option<(Action, String)> = None;
    let mut forward: Option<(Action, String)> = None;
    let entities: BTreeSet<&String> = input.mentioned.iter().collect();
    let properties = graph.properties();
    for id in entities {
        let Some(entity) = graph.entity(id) else { continue };
        if id == ctx.user_id || id == ctx.bot_id {
            continue;
        }
        let entity_pop = graph.popularity(id).unwrap_or(entity.popularity);
        for t in graph.triples_about(Some(ctx.user_id), id) {
            let Some(p) = graph.property(&t.property_id) else { continue };
            if !p.sentence_structures.contains_key(FUN_FACT) {
                continue;
            }
            let key = fact_key(&t.domain_id, &t.property_id, &t.range_value);
            if input.spoken.contains(&key) {
                continue;
            }
            let mut pops = vec![entity_pop];
            if let RangeValue::Entity(r) = &t.range_value {
                pops.extend(graph.popularity(r));
            }
            let action = enrichment_action(
                ActionKind::FunFact,
                FUN_FACT_PAIR,
                DialogueAct::InfObj,
                &p,
                Bindings::new(Some(Filler::Entity(t.domain_id.clone())), Some(t.range_value.clone().into())),
                candidate_popularity(&pops, graph.popularity(&p.id).unwrap_or(p.popularity)),
                input,
                ctx,
            );
            if better(&action, &funfact, &key) {
                funfact = Some((action, key));
            }
        }
        if input.question_selected {
            continue;
        }
        for p in &properties {
            if !p.sentence_structures.contains_key(FORWARD_QUESTION) {
                continue;
            }
            let relevant = p.about.iter().any(|a| a == id || graph.is_a(&entity.class_id, a));
            if !relevant || !graph.query(Some(ctx.user_id), ctx.user_id, &p.id).is_ok_and(|v| v.is_empty()) {
                continue;
            }
            let action = enrichment_action(
                ActionKind::Forward,
                FORWARD_PAIR,
                DialogueAct::QueWhOb,
                p,
                Bindings::new(Some(Filler::Entity(ctx.user_id.to_string())), None),
                candidate_popularity(&[entity_pop], graph.popularity(&p.id).unwrap_or(p.popularity)),
                input,
                ctx,
            );
            let key = format!("{}|{id}", p.id);
            if better(&action, &forward, &key) {
                forward = Some((action, key));
            }
        }
    }
    Enrichment {
        funfact: funfact.map(|(a, _)| a),
        forward: forward.map(|(a, _)| a),
    }
}

#[allow(clippy::too_many_arguments)]
fn enrichment_action(
    kind: ActionKind,
    pair_id: &str,
    da: DialogueAct,
    property: &PropertyDef,
    bindings: Bindings,
    popularity: f64,
    input: &EnrichmentInput<'_>,
    ctx: &ActionContext<'_>,
) -> Action {
    Action {
        segment: input.segment,
        kind,
        da,
        property_id: Some(property.id.clone()),
        bindings,
        pair_id: pair_id.to_string(),
        confidence: 1.0,
        asks_question: ctx
            .pairs
            .get(pair_id)
            .is_some_and(|p| pair_asks_question(p, ctx.structures)),
        popularity,
    }
}

/// Facts this triple set would say, as keys for [`fact_key`] bookkeeping.
pub fn spoken_keys(triples: &[Triple]) -> Vec<String> {
    triples
        .iter()
        .map(|t| fact_key(&t.domain_id, &t.property_id, &t.range_value))
        .collect()
}
