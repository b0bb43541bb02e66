use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bindings::{Bindings, Slot};
use crate::dialogue_act::DialogueAct;

use super::structures::StructureRegistry;
use super::{read_file, TemplateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Initiator {
    /// Opened by a user act matching the trigger.
    #[default]
    User,
    /// Opened by the bot itself (follow-up questions, fun facts, fallbacks).
    Bot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub da: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slots: Vec<Slot>,
}

impl Trigger {
    fn matches(&self, da: DialogueAct, property: Option<&str>, bindings: &Bindings) -> bool {
        da.matches_prefix(&self.da)
            && self.property.as_deref().is_none_or(|p| Some(p) == property)
            && self.slots.iter().all(|s| bindings.has(*s))
    }

    /// Larger is more specific.
    fn specificity(&self) -> (bool, usize, bool) {
        (self.property.is_some(), self.da.len(), !self.slots.is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KgOp {
    /// Values of (dom, property); binds ran to the first.
    Query,
    /// Subjects holding (property, ran); binds dom to the first.
    QuerySubject,
    /// Compares the bound ran with the graph.
    Check,
    /// Stores (dom, property, ran) as a learned fact.
    Assert,
}

impl KgOp {
    pub fn outcomes(self) -> &'static [&'static str] {
        match self {
            KgOp::Query => &["known", "none", "unknown"],
            KgOp::QuerySubject => &["known", "unknown"],
            KgOp::Check => &["confirmed", "contradicted", "unknown"],
            KgOp::Assert => &["stored_new", "already_known", "superseded", "contradicted", "unknown"],
        }
    }
}

impl fmt::Display for KgOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KgOp::Query => "query",
            KgOp::QuerySubject => "query_subject",
            KgOp::Check => "check",
            KgOp::Assert => "assert",
        })
    }
}

/// Who a step's domain refers to when it overrides the pair bindings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Participant {
    #[serde(rename = "$user")]
    User,
    #[serde(rename = "$bot")]
    Bot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Step {
    Say {
        say: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lead: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dom: Option<Participant>,
    },
    Kg {
        kg: KgOp,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dom: Option<Participant>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponsePlan {
    #[serde(default)]
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<BTreeMap<String, String>>,
}

impl ResponsePlan {
    pub fn kg_ops(&self) -> impl Iterator<Item = KgOp> + '_ {
        self.steps.iter().filter_map(|s| match s {
            Step::Kg { kg, .. } => Some(*kg),
            Step::Say { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub da: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyPair {
    pub id: String,
    #[serde(default)]
    pub initiator: Initiator,
    pub trigger: Trigger,
    pub entry: String,
    #[serde(default)]
    pub terminals: BTreeSet<String>,
    pub nodes: BTreeMap<String, ResponsePlan>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

impl AdjacencyPair {
    pub fn node(&self, id: &str) -> Option<&ResponsePlan> {
        self.nodes.get(id)
    }

    pub fn edges_from<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.from == node)
    }

    /// Edge out of `node` whose act prefix covers `da`. Prefixes out of one node are disjoint.
    pub fn follow(&self, node: &str, da: DialogueAct) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == node && da.matches_prefix(&e.da))
    }

    /// Nodes reachable from `start` through branches only, i.e. within one bot turn.
    pub fn branch_closure(&self, start: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start.to_string()]);
        while let Some(n) = queue.pop_front() {
            if !seen.insert(n.clone()) {
                continue;
            }
            if let Some(branch) = self.nodes.get(&n).and_then(|p| p.branch.as_ref()) {
                queue.extend(branch.values().cloned());
            }
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub pair_id: String,
    pub node: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(n) => write!(f, "pair `{}` node `{}`: {}", self.pair_id, n, self.message),
            None => write!(f, "pair `{}`: {}", self.pair_id, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct PairRegistry {
    pairs: BTreeMap<String, AdjacencyPair>,
}

#[derive(Deserialize)]
struct PairFile {
    pairs: Vec<AdjacencyPair>,
}

/// Parses a pair file and keeps only the pairs that validate.
pub fn load_pairs(path: &Path, structures: &StructureRegistry) -> Result<(PairRegistry, ValidationReport), TemplateError> {
    PairRegistry::from_json(&read_file(path)?, &path.display().to_string(), structures)
}

/// Checks every pair invariant, one violation per problem found.
pub fn validate_pairs(pairs: &[AdjacencyPair], structures: &StructureRegistry) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen_ids = BTreeSet::new();
    for pair in pairs {
        if !seen_ids.insert(pair.id.as_str()) {
            report.violations.push(Violation {
                pair_id: pair.id.clone(),
                node: None,
                message: "duplicate pair id".into(),
            });
        }
        report.violations.extend(validate_pair(pair, structures));
    }
    report
}

fn validate_pair(pair: &AdjacencyPair, structures: &StructureRegistry) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |node: Option<&str>, message: String| {
        out.push(Violation {
            pair_id: pair.id.clone(),
            node: node.map(str::to_string),
            message,
        })
    };

    if !crate::dialogue_act::is_valid_prefix(&pair.trigger.da) {
        bad(None, format!("trigger act `{}` is not a dialogue act class", pair.trigger.da));
    }
    if !pair.nodes.contains_key(&pair.entry) {
        bad(None, format!("entry node `{}` does not exist", pair.entry));
    }
    for t in &pair.terminals {
        if !pair.nodes.contains_key(t) {
            bad(Some(t), "terminal node does not exist".into());
        }
    }

    let mut successors: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, plan) in &pair.nodes {
        let ops: Vec<KgOp> = plan.kg_ops().collect();
        if ops.len() > 1 {
            bad(Some(id), "more than one knowledge-graph operation".into());
        }
        match (ops.first(), &plan.branch) {
            (None, Some(_)) => bad(Some(id), "branch without a knowledge-graph operation".into()),
            (Some(op), None) => bad(Some(id), format!("`{op}` outcome is not branched on")),
            (Some(op), Some(branch)) => {
                for status in branch.keys() {
                    if !op.outcomes().contains(&status.as_str()) {
                        bad(Some(id), format!("`{op}` has no outcome `{status}`"));
                    }
                }
            }
            (None, None) => {}
        }
        for step in &plan.steps {
            if let Step::Say { say, .. } = step {
                if structures.get(say).is_none() {
                    bad(Some(id), format!("unknown structure `{say}`"));
                }
            }
        }
        for target in plan.branch.iter().flat_map(|b| b.values()) {
            if pair.nodes.contains_key(target) {
                successors.entry(id).or_default().push(target);
            } else {
                bad(Some(id), format!("branch target `{target}` does not exist"));
            }
        }
    }

    let mut by_source: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for edge in &pair.edges {
        if !crate::dialogue_act::is_valid_prefix(&edge.da) {
            bad(Some(&edge.from), format!("edge act `{}` is not a dialogue act class", edge.da));
            continue;
        }
        if !pair.nodes.contains_key(&edge.from) || !pair.nodes.contains_key(&edge.to) {
            bad(Some(&edge.from), format!("edge `{}` -> `{}` names a missing node", edge.from, edge.to));
            continue;
        }
        successors.entry(&edge.from).or_default().push(&edge.to);
        let labels = by_source.entry(&edge.from).or_default();
        for other in labels.iter() {
            if prefixes_overlap(other, &edge.da) {
                bad(Some(&edge.from), format!("edge acts `{other}` and `{}` overlap", edge.da));
            }
        }
        labels.push(&edge.da);
    }

    for id in pair.nodes.keys() {
        if !pair.terminals.contains(id) && successors.get(id.as_str()).is_none_or(|s| s.is_empty()) {
            bad(Some(id), "non-terminal node without outgoing edge".into());
        }
    }

    if pair.nodes.contains_key(&pair.entry) {
        let mut reached = BTreeSet::new();
        let mut queue = VecDeque::from([pair.entry.as_str()]);
        while let Some(n) = queue.pop_front() {
            if reached.insert(n) {
                queue.extend(successors.get(n).into_iter().flatten().copied());
            }
        }
        for id in pair.nodes.keys() {
            if !reached.contains(id.as_str()) {
                bad(Some(id), "unreachable node".into());
            }
        }
    }
    out
}

/// Two act prefixes overlap when some act class falls under both.
pub fn prefixes_overlap(a: &str, b: &str) -> bool {
    DialogueAct::ALL
        .iter()
        .any(|d| d.matches_prefix(a) && d.matches_prefix(b))
}

impl PairRegistry {
    pub fn from_json(text: &str, origin: &str, structures: &StructureRegistry) -> Result<(Self, ValidationReport), TemplateError> {
        let file: PairFile = serde_json::from_str(text).map_err(|e| TemplateError::Parse {
            file: origin.to_string(),
            message: e.to_string(),
        })?;
        Ok(Self::from_pairs(file.pairs, structures))
    }

    pub fn from_pairs(pairs: Vec<AdjacencyPair>, structures: &StructureRegistry) -> (Self, ValidationReport) {
        let report = validate_pairs(&pairs, structures);
        let broken: BTreeSet<&str> = report.violations.iter().map(|v| v.pair_id.as_str()).collect();
        let mut registry = PairRegistry::default();
        for pair in pairs {
            if broken.contains(pair.id.as_str()) {
                log::warn!("pair `{}` excluded: failed validation", pair.id);
                continue;
            }
            registry.pairs.insert(pair.id.clone(), pair);
        }
        (registry, report)
    }

    pub fn get(&self, id: &str) -> Option<&AdjacencyPair> {
        self.pairs.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &AdjacencyPair> {
        self.pairs.values()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Most specific user-initiated pair whose trigger covers the act.
    /// Equally specific matches resolve to the lexicographically smallest id.
    pub fn match_pair(&self, da: DialogueAct, property: Option<&str>, bindings: &Bindings) -> Option<&AdjacencyPair> {
        let mut best: Option<&AdjacencyPair> = None;
        for pair in self.pairs.values() {
            if pair.initiator != Initiator::User || !pair.trigger.matches(da, property, bindings) {
                continue;
            }
            match best {
                None => best = Some(pair),
                Some(b) => {
                    let (ns, bs) = (pair.trigger.specificity(), b.trigger.specificity());
                    if ns > bs {
                        best = Some(pair);
                    } else if ns == bs {
                        log::debug!("pairs `{}` and `{}` tie for {da}; keeping `{}`", b.id, pair.id, b.id);
                    }
                }
            }
        }
        best
    }
}
