//! Turn orchestration: NLU, action creation and selection, dialogue
//! management, lexicalization, enrichment and memory.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{
    create_actions, generate_enrichment, select_actions, Action, ActionConfig, ActionContext, ActionKind, Enrichment,
    EnrichmentInput, SegmentRef, FALLBACK_PAIR,
};
use crate::bindings::{Bindings, Filler, Slot};
use crate::dialogue::{DialogueConfig, DialogueManager, PairInstance, PlannedSay, SessionState, StepTrace, APOLOGY_STRUCTURE};
use crate::dialogue_act::DialogueAct;
use crate::kg::{KgError, KnowledgeGraph, RangeKind, Store, Tense, Triple};
use crate::lexicalizer::{LexError, Lexicalizer, RealizationContext};
use crate::nlu::{AnalyzerCall, AnnotatedSegment, Hypothesis, Nlu, NluConfig, NluError, RuleTables};
use crate::templates::{TemplateError, Templates, ValidationReport};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Templates(#[from] TemplateError),
    #[error(transparent)]
    Nlu(#[from] NluError),
    #[error(transparent)]
    Lexicalizer(#[from] LexError),
    #[error("adjacency pairs failed validation: {0}")]
    InvalidPairs(String),
    #[error("unknown conversation `{0}`")]
    UnknownConversation(String),
    #[error("invalid user id `{0}`")]
    InvalidUser(String),
    #[error("session file {path}: {message}")]
    Session { path: String, message: String },
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub bot_id: String,
    pub nlu: NluConfig,
    pub action: ActionConfig,
    pub dialogue: DialogueConfig,
    /// Replies remembered per conversation for retried requests.
    pub nonce_cache: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            bot_id: "alquist".into(),
            nlu: NluConfig::default(),
            action: ActionConfig::default(),
            dialogue: DialogueConfig::default(),
            nonce_cache: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRequest {
    pub conversation_id: String,
    pub hypotheses: Vec<Hypothesis>,
    /// Client token; a retried request with the same nonce gets the stored reply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<String>,
}

impl TurnRequest {
    pub fn typed(conversation_id: &str, text: &str) -> Result<Self, NluError> {
        Ok(TurnRequest {
            conversation_id: conversation_id.to_string(),
            hypotheses: vec![Hypothesis::from_typed(text)?],
            nonce: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub micros: u128,
}

/// Everything the turn decided, for the debug panel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnDebug {
    pub turn: u64,
    pub hypothesis_index: usize,
    pub segments: Vec<AnnotatedSegment>,
    pub actions: Vec<Action>,
    pub selected: Vec<Action>,
    pub enrichment: Enrichment,
    /// Enrichment kinds that made it into the response.
    pub appended: Vec<ActionKind>,
    pub plans: Vec<PlannedSay>,
    pub steps: Vec<StepTrace>,
    pub pair_stack: Vec<PairInstance>,
    pub analyzer_calls: Vec<AnalyzerCall>,
    pub timings: Vec<StageTiming>,
}

impl TurnDebug {
    /// The trace without wall-clock measurements.
    pub fn without_timings(&self) -> TurnDebug {
        let mut d = self.clone();
        d.timings.clear();
        for c in &mut d.analyzer_calls {
            c.micros = 0;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnResponse {
    pub text: String,
    pub debug: TurnDebug,
}

/// Selected actions with the index of the segment each serves.
type Picked = Vec<(usize, Action)>;

struct Conversation {
    state: SessionState,
    replies: VecDeque<(String, TurnResponse)>,
}

pub struct Engine {
    graph: Arc<KnowledgeGraph>,
    nlu: Nlu,
    templates: Templates,
    lexicalizer: Lexicalizer,
    config: EngineConfig,
    conversations: Mutex<HashMap<String, Arc<Mutex<Conversation>>>>,
    loaded_users: Mutex<HashSet<String>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("config", &self.config).finish_non_exhaustive()
    }
}

struct Timer {
    started: Instant,
    timings: Vec<StageTiming>,
}

impl Timer {
    fn lap(&mut self, stage: &'static str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage,
            micros: (now - self.started).as_micros(),
        });
        self.started = now;
    }
}

impl Engine {
    /// Loads a data pack; learned facts and sessions live under `store_dir` when given.
    pub fn open(data_dir: &Path, store_dir: Option<&Path>, config: EngineConfig) -> Result<Self, EngineError> {
        let mut graph = KnowledgeGraph::load(data_dir)?;
        if let Some(dir) = store_dir {
            graph = graph.with_store(Store::open(dir)?)?;
        }
        let (templates, report) = Templates::load(data_dir)?;
        if !report.is_clean() {
            return Err(EngineError::InvalidPairs(describe(&report)));
        }
        let graph = Arc::new(graph);
        let nlu = Nlu::new(graph.clone(), &templates.structures, RuleTables::load(data_dir)?, config.nlu);
        let lexicalizer = Lexicalizer::load(data_dir)?;
        Ok(Engine {
            graph,
            nlu,
            templates,
            lexicalizer,
            config,
            conversations: Mutex::new(HashMap::new()),
            loaded_users: Mutex::new(HashSet::new()),
        })
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        &self.graph
    }

    pub fn nlu(&self) -> &Nlu {
        &self.nlu
    }

    pub fn nlu_mut(&mut self) -> &mut Nlu {
        &mut self.nlu
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    pub fn lexicalizer(&self) -> &Lexicalizer {
        &self.lexicalizer
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn prepare_user(&self, user_id: &str) -> Result<(), EngineError> {
        if user_id.trim().is_empty() || user_id == self.config.bot_id {
            return Err(EngineError::InvalidUser(user_id.to_string()));
        }
        let mut loaded = self.loaded_users.lock().expect("user set poisoned");
        if loaded.contains(user_id) {
            return Ok(());
        }
        match self.graph.store() {
            Some(_) => self.graph.load_user(user_id)?,
            None => self.graph.ensure_user(user_id)?,
        }
        loaded.insert(user_id.to_string());
        Ok(())
    }

    /// Starts a conversation with a fresh opaque id.
    pub fn create_conversation(&self, user_id: &str) -> Result<String, EngineError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.open_conversation(&id, user_id)?;
        Ok(id)
    }

    /// Starts (or resets) a conversation under a caller-chosen id.
    pub fn open_conversation(&self, conversation_id: &str, user_id: &str) -> Result<(), EngineError> {
        self.prepare_user(user_id)?;
        let conv = Conversation {
            state: SessionState::new(conversation_id, user_id),
            replies: VecDeque::new(),
        };
        self.conversations
            .lock()
            .expect("conversation map poisoned")
            .insert(conversation_id.to_string(), Arc::new(Mutex::new(conv)));
        self.save_session(&SessionState::new(conversation_id, user_id))?;
        Ok(())
    }

    fn conversation(&self, id: &str) -> Result<Arc<Mutex<Conversation>>, EngineError> {
        let mut map = self.conversations.lock().expect("conversation map poisoned");
        if let Some(c) = map.get(id) {
            return Ok(c.clone());
        }
        let state = self
            .load_session(id)?
            .ok_or_else(|| EngineError::UnknownConversation(id.to_string()))?;
        self.prepare_user(&state.user_id)?;
        let conv = Arc::new(Mutex::new(Conversation {
            state,
            replies: VecDeque::new(),
        }));
        map.insert(id.to_string(), conv.clone());
        Ok(conv)
    }

    fn load_session(&self, id: &str) -> Result<Option<SessionState>, EngineError> {
        let Some(store) = self.graph.store() else { return Ok(None) };
        let path = store.session_path(id);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(session_error(&path, e)),
        };
        serde_json::from_str(&text).map(Some).map_err(|e| session_error(&path, e))
    }

    fn save_session(&self, state: &SessionState) -> Result<(), EngineError> {
        let Some(store) = self.graph.store() else { return Ok(()) };
        let path = store.session_path(&state.conversation_id);
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(state).map_err(|e| session_error(&path, e))?;
        std::fs::write(&tmp, text)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| session_error(&path, e))
    }

    pub fn session(&self, conversation_id: &str) -> Result<SessionState, EngineError> {
        let conv = self.conversation(conversation_id)?;
        let guard = conv.lock().expect("conversation poisoned");
        Ok(guard.state.clone())
    }

    /// Learned facts of a user, loading them from the store if needed.
    pub fn profile(&self, user_id: &str) -> Result<Vec<Triple>, EngineError> {
        self.prepare_user(user_id)?;
        Ok(self.graph.learned_triples(user_id))
    }

    /// Runs one turn. Only unknown conversations and malformed requests are errors;
    /// everything else degrades inside the response.
    pub fn handle_turn(&self, request: &TurnRequest) -> Result<TurnResponse, EngineError> {
        let conv = self.conversation(&request.conversation_id)?;
        let mut guard = conv.lock().expect("conversation poisoned");
        if let Some(nonce) = &request.nonce {
            if let Some((_, reply)) = guard.replies.iter().find(|(n, _)| n == nonce) {
                return Ok(reply.clone());
            }
        }
        let mut hypotheses = request.hypotheses.clone();
        hypotheses.sort_by(|a, b| b.asr_confidence.total_cmp(&a.asr_confidence));
        let nlu = self.nlu.annotate_batch(&hypotheses)?;

        let mut state = guard.state.clone();
        let response = self.run_turn(&mut state, nlu.segments, nlu.calls);
        if let Err(e) = self.persist(&state) {
            log::warn!("persisting conversation `{}` failed: {e}", state.conversation_id);
        }
        guard.state = state;
        if let Some(nonce) = &request.nonce {
            guard.replies.push_back((nonce.clone(), response.clone()));
            while guard.replies.len() > self.config.nonce_cache {
                guard.replies.pop_front();
            }
        }
        Ok(response)
    }

    fn persist(&self, state: &SessionState) -> Result<(), EngineError> {
        if self.graph.store().is_some() {
            self.graph.persist(&state.user_id)?;
        }
        self.save_session(state)
    }

    fn action_context<'a>(&'a self, state: &'a SessionState) -> ActionContext<'a> {
        ActionContext {
            graph: &self.graph,
            pairs: &self.templates.pairs,
            structures: &self.templates.structures,
            user_id: &state.user_id,
            bot_id: &self.config.bot_id,
            pending_question: state.pending_question,
            config: self.config.action,
        }
    }

    fn run_turn(&self, state: &mut SessionState, segments: Vec<AnnotatedSegment>, calls: Vec<AnalyzerCall>) -> TurnResponse {
        let mut timer = Timer {
            started: Instant::now(),
            timings: Vec::new(),
        };
        let ctx = self.action_context(state);

        // action creation per segment, weighted by recognition confidence
        let mut groups: Vec<(usize, Vec<Action>)> = Vec::new();
        let mut all_actions = Vec::new();
        for (i, seg) in segments.iter().enumerate() {
            let sref = SegmentRef {
                hypothesis_index: seg.segment.hypothesis_index,
                segment_index: seg.segment.segment_index,
            };
            let mut actions = create_actions(sref, &seg.annotations, &ctx);
            if actions.is_empty() {
                actions.extend(self.answer_to_active(state, sref, seg));
            }
            for a in &mut actions {
                a.confidence *= seg.asr_confidence;
            }
            all_actions.extend(actions.iter().cloned());
            if !actions.is_empty() {
                groups.push((i, actions));
            }
        }
        timer.lap("actions");

        // one selection per hypothesis; the best-served hypothesis wins
        // (hypothesis, selection key, picked (segment, action) pairs)
        let mut best: Option<(usize, (usize, i64), Picked)> = None;
        let hyp_count = segments.iter().map(|s| s.segment.hypothesis_index + 1).max().unwrap_or(0);
        for h in 0..hyp_count {
            let mine: Vec<&(usize, Vec<Action>)> = groups.iter().filter(|(i, _)| segments[*i].segment.hypothesis_index == h).collect();
            if mine.is_empty() {
                continue;
            }
            let lists: Vec<Vec<Action>> = mine.iter().map(|(_, a)| a.clone()).collect();
            let selection = select_actions(&lists);
            let key = (
                selection.chosen.iter().filter(|c| c.is_some()).count(),
                selection.total_units,
            );
            if best.as_ref().is_none_or(|(_, k, _)| key > *k) {
                // segments left unserved stay silent rather than each acknowledging
                let picked = mine
                    .iter()
                    .map(|(i, _)| *i)
                    .zip(selection.actions)
                    .zip(&selection.chosen)
                    .filter(|(_, c)| c.is_some())
                    .map(|(p, _)| p)
                    .collect();
                best = Some((h, key, picked));
            }
        }
        let (hypothesis_index, selected) = match best {
            Some((h, _, picked)) => (h, picked),
            None => (0, vec![(0, self.fallback_action())]),
        };
        timer.lap("selection");

        // dialogue management and realization of the handle answers
        let dm = DialogueManager {
            graph: &self.graph,
            pairs: &self.templates.pairs,
            bot_id: &self.config.bot_id,
            config: self.config.dialogue,
        };
        let mut plans = Vec::new();
        let mut steps = Vec::new();
        for (seg_idx, action) in &selected {
            let tense = segments.get(*seg_idx).map_or(Tense::Present, |s| s.annotations.tense);
            let out = dm.apply(state, action, tense);
            plans.extend(out.says);
            steps.push(out.trace);
        }
        timer.lap("dialogue");
        let mut rctx = RealizationContext::new(&state.user_id, &self.config.bot_id);
        let mut sentences = Vec::new();
        for plan in &plans {
            sentences.push(self.realize(plan, &mut rctx));
        }
        timer.lap("lexicalization");

        // enrichment from what the user mentioned
        let chosen_segments: Vec<&AnnotatedSegment> = segments.iter().filter(|s| s.segment.hypothesis_index == hypothesis_index).collect();
        let mentioned = self.user_mentions(&chosen_segments, &selected, state);
        let question_selected = selected.iter().any(|(_, a)| a.asks_question) || sentences.iter().any(|s| s.ends_with('?'));
        let enrichment = generate_enrichment(
            &EnrichmentInput {
                mentioned: &mentioned,
                spoken: &state.spoken,
                question_selected,
                segment: selected.last().map(|(_, a)| a.segment).unwrap_or(SegmentRef {
                    hypothesis_index,
                    segment_index: 0,
                }),
            },
            &self.action_context(state),
        );
        let mut appended = Vec::new();
        let tense = chosen_segments.last().map_or(Tense::Present, |s| s.annotations.tense);
        for extra in [&enrichment.funfact, &enrichment.forward].into_iter().flatten() {
            if sentences.iter().any(|s| s.ends_with('?')) {
                break;
            }
            if let (Some(prop), Some(dom), Some(ran)) = (&extra.property_id, extra.bindings.get(Slot::Dom), extra.bindings.get(Slot::Ran)) {
                if let Some(dom) = dom.entity_id() {
                    state.spoken.insert(crate::action::fact_key(dom, prop, &ran.to_range()));
                }
            }
            let out = dm.apply(state, extra, tense);
            for plan in &out.says {
                sentences.push(self.realize(plan, &mut rctx));
            }
            plans.extend(out.says);
            steps.push(out.trace);
            appended.push(extra.kind);
        }
        // silent continuations alone still get a reply
        if sentences.iter().all(|s| s.is_empty()) {
            let out = dm.apply(state, &self.fallback_action(), tense);
            for plan in &out.says {
                sentences.push(self.realize(plan, &mut rctx));
            }
            plans.extend(out.says);
            steps.push(out.trace);
        }
        timer.lap("enrichment");

        let text = sentences.iter().filter(|s| !s.is_empty()).cloned().collect::<Vec<_>>().join(" ");
        self.update_memory(state, &selected, &mentioned, &plans, &text);
        timer.lap("memory");

        TurnResponse {
            text,
            debug: TurnDebug {
                turn: state.turn_counter,
                hypothesis_index,
                segments,
                actions: all_actions,
                selected: selected.into_iter().map(|(_, a)| a).collect(),
                enrichment,
                appended,
                plans,
                steps,
                pair_stack: state.pair_stack.clone(),
                analyzer_calls: calls,
                timings: timer.timings,
            },
        }
    }

    fn fallback_action(&self) -> Action {
        Action {
            segment: SegmentRef {
                hypothesis_index: 0,
                segment_index: 0,
            },
            kind: ActionKind::Handle,
            da: DialogueAct::ContAckn,
            property_id: None,
            bindings: Bindings::default(),
            pair_id: FALLBACK_PAIR.to_string(),
            confidence: crate::nlu::ActHypothesis::FALLBACK_CONFIDENCE,
            asks_question: false,
            popularity: 0.0,
        }
    }

    /// A bare value ("rock") answering the active pair's pending question.
    fn answer_to_active(&self, state: &SessionState, sref: SegmentRef, seg: &AnnotatedSegment) -> Option<Action> {
        let inst = state.active()?;
        let pair = self.templates.pairs.get(&inst.pair_id)?;
        pair.follow(&inst.current_node, DialogueAct::InfObj)?;
        let property = self.graph.property(inst.property_id.as_deref()?)?;
        let RangeKind::Entity(class) = &property.range_kind else { return None };
        seg.annotations.mentions.iter().find_map(|m| {
            let c = m.candidates.first()?;
            let e = self.graph.entity(&c.entity_id)?;
            self.graph.is_a(&e.class_id, class).then(|| Action {
                segment: sref,
                kind: ActionKind::Handle,
                da: DialogueAct::InfObj,
                property_id: Some(property.id.clone()),
                bindings: Bindings::new(None, Some(Filler::Entity(e.id.clone()))),
                pair_id: pair.id.clone(),
                confidence: c.score,
                asks_question: false,
                popularity: e.popularity,
            })
        })
    }

    /// Graph entities the user named this turn: bound action slots first, then
    /// remaining top-ranked mentions.
    fn user_mentions(&self, segments: &[&AnnotatedSegment], selected: &[(usize, Action)], state: &SessionState) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let roles = [state.user_id.as_str(), self.config.bot_id.as_str()];
        let mut push = |id: &str| {
            if !roles.contains(&id) && !out.iter().any(|x| x == id) && self.graph.entity(id).is_some() {
                out.push(id.to_string());
            }
        };
        for (_, a) in selected {
            a.bindings.entity_ids().for_each(&mut push);
        }
        for seg in segments {
            for m in &seg.annotations.mentions {
                if let Some(c) = m.candidates.first() {
                    push(&c.entity_id);
                }
            }
        }
        out
    }

    fn realize(&self, plan: &PlannedSay, rctx: &mut RealizationContext) -> String {
        let property = plan.property_id.as_deref().and_then(|p| self.graph.property(p));
        let attempt = self
            .templates
            .structures
            .pattern(&plan.structure, property.as_ref())
            .map_err(|e| e.to_string())
            .and_then(|pattern| {
                let pattern = match &plan.lead {
                    Some(lead) => format!("{lead} {pattern}"),
                    None => pattern,
                };
                rctx.tense = plan.tense;
                self.lexicalizer
                    .realize_tracked(&pattern, &plan.bindings, rctx, &self.graph)
                    .map_err(|e| e.to_string())
            });
        match attempt {
            Ok((text, mentioned)) => {
                rctx.recent_entities = mentioned;
                text
            }
            Err(e) => {
                log::warn!("cannot realize `{}` of pair `{}`: {e}", plan.structure, plan.pair_id);
                self.templates
                    .structures
                    .pattern(APOLOGY_STRUCTURE, None)
                    .ok()
                    .and_then(|p| self.lexicalizer.realize(&p, &Bindings::default(), rctx, &self.graph).ok())
                    .unwrap_or_default()
            }
        }
    }

    fn update_memory(
        &self,
        state: &mut SessionState,
        selected: &[(usize, Action)],
        mentioned: &[String],
        plans: &[PlannedSay],
        text: &str,
    ) {
        let roles = [state.user_id.clone(), self.config.bot_id.clone()];
        let mut bumps: Vec<String> = mentioned.to_vec();
        bumps.extend(selected.iter().filter_map(|(_, a)| a.property_id.clone()));
        let mut bot_entities = Vec::new();
        for p in plans {
            for slot in [Slot::Dom, Slot::Ran] {
                if let Some(id) = p.bindings.get(slot).and_then(Filler::entity_id) {
                    if !roles.iter().any(|r| r == id) {
                        bot_entities.push(id.to_string());
                    }
                }
            }
            if p.bindings.has(Slot::Dom) || p.bindings.has(Slot::Ran) {
                bumps.extend(p.property_id.clone());
            }
            if let Some(fact) = &p.fact {
                state.spoken.insert(fact.clone());
            }
        }
        bumps.extend(bot_entities.iter().cloned());
        self.graph.bump_popularity(&bumps);

        let mut seen = BTreeSet::new();
        let ordered: Vec<String> = mentioned
            .iter()
            .chain(&bot_entities)
            .filter(|id| seen.insert((*id).clone()))
            .cloned()
            .collect();
        state.remember(&ordered, self.config.dialogue.max_recent);
        state.pending_question = text.ends_with('?');
        state.turn_counter += 1;
    }
}

fn describe(report: &ValidationReport) -> String {
    report.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

fn session_error(path: &Path, e: impl std::fmt::Display) -> EngineError {
    EngineError::Session {
        path: PathBuf::from(path).display().to_string(),
        message: e.to_string(),
    }
}
