//! Per-conversation state and the adjacency-pair stack.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::action::{fact_key, Action};
use crate::bindings::{Bindings, Filler, Slot};
use crate::kg::{AssertOutcome, CheckResult, KgError, KnowledgeGraph, RangeValue, Tense, Triple};
use crate::templates::{AdjacencyPair, KgOp, PairRegistry, Participant, Step};

/// Structure said when a plan cannot continue.
pub const APOLOGY_STRUCTURE: &str = "Apology_Unknown";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInstance {
    pub pair_id: String,
    pub current_node: String,
    pub bindings: Bindings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property_id: Option<String>,
    pub opened_at_turn: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecentEntity {
    pub entity_id: String,
    pub turn: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub conversation_id: String,
    pub user_id: String,
    /// Last element is the active pair.
    pub pair_stack: Vec<PairInstance>,
    /// Most recent first.
    pub recent_entities: Vec<RecentEntity>,
    pub pending_question: bool,
    pub turn_counter: u64,
    /// Facts already said in this conversation.
    #[serde(default)]
    pub spoken: BTreeSet<String>,
}

impl SessionState {
    pub fn new(conversation_id: &str, user_id: &str) -> Self {
        SessionState {
            conversation_id: conversation_id.to_string(),
            user_id: user_id.to_string(),
            pair_stack: Vec::new(),
            recent_entities: Vec::new(),
            pending_question: false,
            turn_counter: 0,
            spoken: BTreeSet::new(),
        }
    }

    pub fn active(&self) -> Option<&PairInstance> {
        self.pair_stack.last()
    }

    /// Records entities in mention order; the last one ends up most recent.
    pub fn remember(&mut self, entities: &[String], max: usize) {
        for id in entities {
            self.recent_entities.retain(|r| &r.entity_id != id);
            self.recent_entities.insert(
                0,
                RecentEntity {
                    entity_id: id.clone(),
                    turn: self.turn_counter,
                },
            );
        }
        self.recent_entities.truncate(max);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DialogueConfig {
    pub max_stack: usize,
    pub max_recent: usize,
}

impl Default for DialogueConfig {
    fn default() -> Self {
        DialogueConfig {
            max_stack: 4,
            max_recent: 10,
        }
    }
}

/// One structure to realize, with everything the lexicalizer needs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedSay {
    pub pair_id: String,
    pub node: String,
    pub structure: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lead: Option<String>,
    pub property_id: Option<String>,
    pub bindings: Bindings,
    pub tense: Tense,
    /// Fact this sentence states, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KgTrace {
    pub op: KgOp,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTrace {
    pub pair_id: String,
    /// Node the pair was waiting at, for continuations.
    pub continued_from: Option<String>,
    pub nodes: Vec<String>,
    pub kg: Vec<KgTrace>,
    pub popped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOutput {
    pub says: Vec<PlannedSay>,
    pub trace: StepTrace,
}

/// Steps pair instances against the graph.
pub struct DialogueManager<'a> {
    pub graph: &'a KnowledgeGraph,
    pub pairs: &'a PairRegistry,
    pub bot_id: &'a str,
    pub config: DialogueConfig,
}

/// What a plan has learned from the graph so far.
struct Scratch {
    bindings: Bindings,
    say_property: Option<String>,
    tense: Tense,
    fact: Option<String>,
}

impl DialogueManager<'_> {
    /// True if the active pair has an edge for the act.
    pub fn continues(&self, state: &SessionState, da: crate::DialogueAct) -> bool {
        state
            .active()
            .and_then(|inst| self.pairs.get(&inst.pair_id).map(|p| (p, inst)))
            .is_some_and(|(p, inst)| p.follow(&inst.current_node, da).is_some())
    }

    /// Follows the active pair's edge when the act continues it, otherwise opens
    /// the action's pair on top of the stack, abandoning a wait from an earlier turn.
    pub fn apply(&self, state: &mut SessionState, action: &Action, tense: Tense) -> StepOutput {
        let continuation = state.active().and_then(|inst| {
            let pair = self.pairs.get(&inst.pair_id)?;
            let edge = pair.follow(&inst.current_node, action.da)?;
            Some((inst.current_node.clone(), edge.to.clone()))
        });
        let (continued_from, start) = match continuation {
            Some((from, to)) => {
                let inst = state.pair_stack.last_mut().expect("active pair");
                if let Some(ran) = action.bindings.get(Slot::Ran) {
                    inst.bindings.set(Slot::Ran, Some(ran.clone()));
                }
                if inst.bindings.get(Slot::Dom).is_none() {
                    inst.bindings.set(Slot::Dom, action.bindings.get(Slot::Dom).cloned());
                }
                inst.current_node = to.clone();
                (Some(from), to)
            }
            None => {
                // a wait left over from an earlier turn went unanswered; pairs
                // opened this turn chain on top of each other
                if state.active().is_some_and(|top| top.opened_at_turn < state.turn_counter) {
                    let old = state.pair_stack.pop().expect("active pair");
                    log::debug!("abandoning pair `{}` at `{}`", old.pair_id, old.current_node);
                }
                let entry = self.pairs.get(&action.pair_id).map(|p| p.entry.clone()).unwrap_or_default();
                state.pair_stack.push(PairInstance {
                    pair_id: action.pair_id.clone(),
                    current_node: entry.clone(),
                    bindings: action.bindings.clone(),
                    property_id: action.property_id.clone(),
                    opened_at_turn: state.turn_counter,
                });
                (None, entry)
            }
        };
        let user_id = state.user_id.clone();
        let inst = state.pair_stack.last_mut().expect("active pair");
        let mut trace = StepTrace {
            pair_id: inst.pair_id.clone(),
            continued_from,
            nodes: Vec::new(),
            kg: Vec::new(),
            popped: false,
        };
        let says = match self.pairs.get(&inst.pair_id) {
            Some(pair) => self.run(pair, inst, &start, &user_id, tense, &mut trace),
            None => vec![apology(&inst.pair_id, &start, tense)],
        };
        let done = self
            .pairs
            .get(&inst.pair_id)
            .is_none_or(|p| p.terminals.contains(&inst.current_node) || p.edges_from(&inst.current_node).next().is_none());
        if done {
            state.pair_stack.pop();
            trace.popped = true;
        }
        while state.pair_stack.len() > self.config.max_stack {
            let evicted = state.pair_stack.remove(0);
            log::info!("pair stack full; evicting `{}`", evicted.pair_id);
        }
        StepOutput { says, trace }
    }

    fn run(
        &self,
        pair: &AdjacencyPair,
        inst: &mut PairInstance,
        start: &str,
        user_id: &str,
        tense: Tense,
        trace: &mut StepTrace,
    ) -> Vec<PlannedSay> {
        let mut says = Vec::new();
        let mut scratch = Scratch {
            bindings: inst.bindings.clone(),
            say_property: inst.property_id.clone(),
            tense,
            fact: None,
        };
        let mut node = start.to_string();
        loop {
            trace.nodes.push(node.clone());
            inst.current_node = node.clone();
            let Some(plan) = pair.node(&node) else {
                says.push(apology(&pair.id, &node, tense));
                break;
            };
            let mut status: Option<String> = None;
            for step in &plan.steps {
                match step {
                    Step::Say { say, lead, dom } => {
                        let mut bindings = scratch.bindings.clone();
                        if let Some(p) = dom {
                            bindings.set(Slot::Dom, Some(Filler::Entity(self.participant(*p, user_id))));
                        }
                        says.push(PlannedSay {
                            pair_id: pair.id.clone(),
                            node: node.clone(),
                            structure: say.clone(),
                            lead: lead.clone(),
                            property_id: scratch.say_property.clone(),
                            bindings,
                            tense: scratch.tense,
                            fact: scratch.fact.clone(),
                        });
                    }
                    Step::Kg { kg, dom } => {
                        if let Some(p) = dom {
                            scratch.bindings.set(Slot::Dom, Some(Filler::Entity(self.participant(*p, user_id))));
                            scratch.say_property = inst.property_id.clone();
                            scratch.fact = None;
                            scratch.tense = tense;
                        }
                        let s = self.kg_op(*kg, inst.property_id.as_deref(), user_id, &mut scratch);
                        trace.kg.push(KgTrace {
                            op: *kg,
                            status: s.clone(),
                        });
                        status = Some(s);
                    }
                }
            }
            let Some(branch) = &plan.branch else { break };
            let status = status.unwrap_or_else(|| "unknown".to_string());
            match branch.get(&status).or_else(|| branch.get("unknown")) {
                Some(next) => node = next.clone(),
                None => {
                    says.push(apology(&pair.id, &node, tense));
                    break;
                }
            }
        }
        inst.bindings = scratch.bindings;
        says
    }

    fn participant(&self, p: Participant, user_id: &str) -> String {
        match p {
            Participant::User => user_id.to_string(),
            Participant::Bot => self.bot_id.to_string(),
        }
    }

    fn kg_op(&self, op: KgOp, property: Option<&str>, user_id: &str, s: &mut Scratch) -> String {
        let Some(property) = property else { return "unknown".into() };
        let dom = s.bindings.get(Slot::Dom).and_then(Filler::entity_id).map(str::to_string);
        let ran = s.bindings.get(Slot::Ran).map(Filler::to_range);
        let result: Result<String, KgError> = (|| match op {
            KgOp::Query => {
                let Some(dom) = &dom else { return Ok("unknown".into()) };
                let found = self.graph.query(Some(user_id), dom, property)?;
                let Some(t) = pick(found) else { return Ok("unknown".into()) };
                let status = if t.range_value == RangeValue::Int(0) { "none" } else { "known" };
                self.adopt(s, &t);
                Ok(status.into())
            }
            KgOp::QuerySubject => {
                let Some(ran) = &ran else { return Ok("unknown".into()) };
                let found = self.graph.query_by_range(Some(user_id), property, ran)?;
                let Some(t) = pick(found) else { return Ok("unknown".into()) };
                s.bindings.set(Slot::Dom, Some(Filler::Entity(t.domain_id.clone())));
                self.adopt(s, &t);
                Ok("known".into())
            }
            KgOp::Check => {
                let (Some(dom), Some(ran)) = (&dom, &ran) else { return Ok("unknown".into()) };
                let result = self.graph.check_fact(Some(user_id), dom, property, ran)?;
                if let CheckResult::Confirmed(t) | CheckResult::Contradicted(t) = &result {
                    self.adopt(s, t);
                }
                Ok(result.status().into())
            }
            KgOp::Assert => {
                let (Some(dom), Some(ran)) = (&dom, ran) else { return Ok("unknown".into()) };
                let triple = Triple::learned(user_id, dom, property, ran);
                match self.graph.assert_fact(triple) {
                    Ok(AssertOutcome::StoredNew) => Ok("stored_new".into()),
                    Ok(AssertOutcome::AlreadyKnown) => Ok("already_known".into()),
                    Ok(AssertOutcome::Superseded(_)) => Ok("superseded".into()),
                    Err(KgError::BuiltinConflict(actual)) => {
                        self.adopt(s, &actual);
                        Ok("contradicted".into())
                    }
                    Err(e) => Err(e),
                }
            }
        })();
        result.unwrap_or_else(|e| {
            log::info!("{op} failed: {e}");
            "unknown".into()
        })
    }

    /// Binds the fact's value so later sentences state it in its own property and tense.
    fn adopt(&self, s: &mut Scratch, t: &Triple) {
        s.bindings.set(Slot::Ran, Some(t.range_value.clone().into()));
        s.say_property = Some(t.property_id.clone());
        s.tense = t.tense;
        s.fact = Some(fact_key(&t.domain_id, &t.property_id, &t.range_value));
    }
}

/// Builtin facts first, then the most recently learned.
fn pick(mut triples: Vec<Triple>) -> Option<Triple> {
    triples.sort_by_key(|t| (!matches!(t.source, crate::kg::Source::Builtin), std::cmp::Reverse(t.asserted_at)));
    triples.into_iter().next()
}

fn apology(pair_id: &str, node: &str, tense: Tense) -> PlannedSay {
    PlannedSay {
        pair_id: pair_id.to_string(),
        node: node.to_string(),
        structure: APOLOGY_STRUCTURE.to_string(),
        lead: None,
        property_id: None,
        bindings: Bindings::default(),
        tense,
        fact: None,
    }
}
