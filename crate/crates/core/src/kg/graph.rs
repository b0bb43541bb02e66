use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use log::warn;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::model::{
    AssertOutcome, Candidate, CandidateSource, CheckResult, Entity, PropertyDef, RangeKind,
    RangeValue, Source, Triple,
};
use super::resolve::{fuzzy_score, GeneralResolver, LexiconResolver, NoGeneralResolver};
use super::store::Store;
use super::{KgError, USER_CLASS};

#[derive(Debug, Clone)]
pub struct GraphConfig {
    /// Added to an id's popularity for every mention.
    pub popularity_increment: f64,
    /// Fuzzy name matches scoring below this are dropped.
    pub fuzzy_floor: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            popularity_increment: 1.0,
            fuzzy_floor: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphStats {
    pub entities: usize,
    pub properties: usize,
    pub builtin_triples: usize,
    pub learned_triples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NameKind {
    Canonical,
    Alias,
}

/// Ontology class with its parent; every chain ends at the implicit root `thing`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, serde::Serialize)]
pub struct ClassDef {
    pub id: String,
    pub parent: String,
}

#[derive(Debug, Default)]
struct State {
    classes: BTreeMap<String, String>,
    entities: BTreeMap<String, Entity>,
    properties: BTreeMap<String, PropertyDef>,
    builtin: Vec<Triple>,
    /// Current learned triples per user.
    learned: BTreeMap<String, Vec<Triple>>,
    /// Learned triples not yet written to the journal.
    pending: BTreeMap<String, Vec<Triple>>,
    names: BTreeMap<String, Vec<(String, NameKind)>>,
    seq: u64,
}

/// The knowledge graph. Reads run concurrently; every mutation goes through a
/// single write lock.
pub struct KnowledgeGraph {
    state: RwLock<State>,
    general: Box<dyn GeneralResolver>,
    store: Option<Store>,
    config: GraphConfig,
}

impl std::fmt::Debug for KnowledgeGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KnowledgeGraph")
            .field("stats", &self.stats())
            .field("store", &self.store)
            .finish()
    }
}

#[derive(Deserialize)]
struct Tagged {
    kind: String,
}

fn read_records<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Vec<T>, KgError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(KgError::io(path, e)),
    };
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("//") {
            continue;
        }
        let parse_err = |message: String| KgError::Parse {
            file: path.display().to_string(),
            line: idx + 1,
            message,
        };
        let tag: Tagged = serde_json::from_str(trimmed).map_err(|e| parse_err(e.to_string()))?;
        if tag.kind != kind {
            return Err(parse_err(format!("expected kind `{kind}`, found `{}`", tag.kind)));
        }
        out.push(serde_json::from_str(trimmed).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(out)
}

impl KnowledgeGraph {
    /// Loads `entities.jsonl`, `properties.jsonl` and `triples.jsonl` (each optional)
    /// plus the general lexicon `general.jsonl` from `data_dir`.
    pub fn load(data_dir: &Path) -> Result<Self, KgError> {
        let classes = read_records(&data_dir.join("classes.jsonl"), "class")?;
        let entities = read_records(&data_dir.join("entities.jsonl"), "entity")?;
        let properties = read_records(&data_dir.join("properties.jsonl"), "property")?;
        let triples = read_records(&data_dir.join("triples.jsonl"), "triple")?;
        let mut graph = Self::from_parts(classes, entities, properties, triples)?;
        graph.general = Box::new(LexiconResolver::load(&data_dir.join("general.jsonl"))?);
        Ok(graph)
    }

    pub fn from_parts(
        classes: Vec<ClassDef>,
        entities: Vec<Entity>,
        properties: Vec<PropertyDef>,
        triples: Vec<Triple>,
    ) -> Result<Self, KgError> {
        let mut state = State::default();
        for class in classes {
            state.classes.insert(class.id, class.parent);
        }
        for mut entity in entities {
            if entity.canonical_name.trim().is_empty() {
                return Err(KgError::Parse {
                    file: "entities".into(),
                    line: 0,
                    message: format!("entity `{}` has an empty name", entity.id),
                });
            }
            entity.popularity = entity.popularity.max(1.0);
            entity.source = Source::Builtin;
            if state.entities.contains_key(&entity.id) {
                return Err(KgError::Duplicate(entity.id));
            }
            state.entities.insert(entity.id.clone(), entity);
        }
        for mut property in properties {
            property.popularity = property.popularity.max(1.0);
            if state.properties.contains_key(&property.id) {
                return Err(KgError::Duplicate(property.id));
            }
            state.properties.insert(property.id.clone(), property);
        }

        let mut dangling = BTreeSet::new();
        for property in state.properties.values() {
            if let Some(parent) = &property.subproperty_of {
                if !state.properties.contains_key(parent) {
                    dangling.insert(parent.clone());
                }
            }
        }
        for mut triple in triples {
            triple.source = Source::Builtin;
            if !state.entities.contains_key(&triple.domain_id) {
                dangling.insert(triple.domain_id.clone());
            }
            match state.properties.get(&triple.property_id) {
                None => {
                    dangling.insert(triple.property_id.clone());
                }
                Some(property) => {
                    triple.range_value = normalize_range(&property.range_kind, triple.range_value);
                    if let RangeValue::Entity(id) = &triple.range_value {
                        if !state.entities.contains_key(id) {
                            dangling.insert(id.clone());
                        }
                    }
                    if !property.range_kind.accepts(&triple.range_value) {
                        return Err(KgError::RangeKind {
                            property: property.id.clone(),
                            expected: property.range_kind.clone(),
                            got: triple.range_value,
                        });
                    }
                    state.check_classes(property, &triple)?;
                }
            }
            state.seq += 1;
            triple.asserted_at = state.seq;
            state.builtin.push(triple);
        }
        if !dangling.is_empty() {
            return Err(KgError::Dangling(dangling.into_iter().collect()));
        }
        state.rebuild_names();
        Ok(KnowledgeGraph {
            state: RwLock::new(state),
            general: Box::new(NoGeneralResolver),
            store: None,
            config: GraphConfig::default(),
        })
    }

    pub fn with_config(mut self, config: GraphConfig) -> Self {
        self.config = config;
        self
    }

    pub fn general_surfaces(&self) -> Vec<String> {
        self.general.surfaces()
    }

    pub fn with_general_resolver(mut self, resolver: Box<dyn GeneralResolver>) -> Self {
        self.general = resolver;
        self
    }

    /// Attaches a store and restores the popularity snapshot from it.
    pub fn with_store(mut self, store: Store) -> Result<Self, KgError> {
        let snapshot = store.read_popularity()?;
        {
            let mut state = self.state.write().expect("graph lock poisoned");
            for (id, value) in snapshot {
                if let Some(pop) = state.popularity_mut(&id) {
                    *pop = pop.max(value);
                }
            }
        }
        self.store = Some(store);
        Ok(self)
    }

    pub fn store(&self) -> Option<&Store> {
        self.store.as_ref()
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    fn read(&self) -> RwLockReadGuard<'_, State> {
        self.state.read().expect("graph lock poisoned")
    }

    fn write(&self) -> RwLockWriteGuard<'_, State> {
        self.state.write().expect("graph lock poisoned")
    }

    pub fn stats(&self) -> GraphStats {
        let state = self.read();
        GraphStats {
            entities: state.entities.len(),
            properties: state.properties.len(),
            builtin_triples: state.builtin.len(),
            learned_triples: state.learned.values().map(Vec::len).sum(),
        }
    }

    pub fn entity(&self, id: &str) -> Option<Entity> {
        self.read().entities.get(id).cloned()
    }

    pub fn property(&self, id: &str) -> Option<PropertyDef> {
        self.read().properties.get(id).cloned()
    }

    pub fn entities(&self) -> Vec<Entity> {
        self.read().entities.values().cloned().collect()
    }

    pub fn properties(&self) -> Vec<PropertyDef> {
        self.read().properties.values().cloned().collect()
    }

    /// Whether `class` is `target` or one of its descendants.
    pub fn is_a(&self, class: &str, target: &str) -> bool {
        self.read().is_a(class, target)
    }

    pub fn builtin_triples(&self) -> Vec<Triple> {
        self.read().builtin.clone()
    }

    pub fn popularity(&self, id: &str) -> Option<f64> {
        let state = self.read();
        state
            .entities
            .get(id)
            .map(|e| e.popularity)
            .or_else(|| state.properties.get(id).map(|p| p.popularity))
    }

    /// Every id that carries a popularity, with its current value.
    pub fn popularity_snapshot(&self) -> BTreeMap<String, f64> {
        self.read().popularity_map()
    }

    /// Every (surface form, entity id) pair for builtin entities, lowercased.
    pub fn surface_forms(&self) -> Vec<(String, String)> {
        let state = self.read();
        let mut out = Vec::new();
        for (surface, hits) in &state.names {
            for (id, _) in hits {
                out.push((surface.clone(), id.clone()));
            }
        }
        out
    }

    /// Creates the profile entity for a user if it does not exist yet.
    pub fn ensure_user(&self, user_id: &str) -> Result<(), KgError> {
        if let Some(existing) = self.read().entities.get(user_id) {
            return if existing.class_id == USER_CLASS {
                Ok(())
            } else {
                Err(KgError::Duplicate(user_id.to_string()))
            };
        }
        let mut state = self.write();
        state.entities.entry(user_id.to_string()).or_insert_with(|| Entity {
            id: user_id.to_string(),
            canonical_name: user_id.to_string(),
            aliases: Vec::new(),
            class_id: USER_CLASS.to_string(),
            gender: Default::default(),
            grammatical_number: Default::default(),
            popularity: 1.0,
            source: Source::Learned(user_id.to_string()),
            wikidata_id: None,
        });
        Ok(())
    }

    /// Candidate entities for a lowercased surface form, best first.
    pub fn resolve_name(&self, surface: &str) -> Vec<Candidate> {
        let surface = surface.trim();
        if surface.is_empty() {
            return Vec::new();
        }
        let state = self.read();
        let mut best: BTreeMap<String, f64> = BTreeMap::new();
        if let Some(hits) = state.names.get(surface) {
            for (id, kind) in hits {
                let score = match kind {
                    NameKind::Canonical => 1.0,
                    NameKind::Alias => 0.9,
                };
                let slot = best.entry(id.clone()).or_insert(0.0);
                *slot = slot.max(score);
            }
        }
        for (name, hits) in &state.names {
            let score = fuzzy_score(surface, name);
            if score < self.config.fuzzy_floor || name == surface {
                continue;
            }
            for (id, _) in hits {
                let slot = best.entry(id.clone()).or_insert(0.0);
                *slot = slot.max(score);
            }
        }
        drop(state);
        let mut out: Vec<Candidate> = best
            .into_iter()
            .map(|(entity_id, score)| Candidate {
                entity_id,
                score,
                source: CandidateSource::Private,
            })
            .collect();
        if out.is_empty() {
            out = self.general.resolve(surface);
        }
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.entity_id.cmp(&b.entity_id))
        });
        out
    }

    /// Current triples for `(domain, property)` visible to `user`, including
    /// triples of refining sub-properties.
    pub fn query(&self, user: Option<&str>, domain_id: &str, property_id: &str) -> Result<Vec<Triple>, KgError> {
        let state = self.read();
        state.require_entity(domain_id)?;
        state.require_property(property_id)?;
        let props = state.property_family(property_id);
        Ok(state
            .visible(user)
            .filter(|t| t.domain_id == domain_id && props.contains(t.property_id.as_str()))
            .cloned()
            .collect())
    }

    /// Current triples for `(?, property, range)`: who/what holds the value.
    pub fn query_by_range(&self, user: Option<&str>, property_id: &str, range: &RangeValue) -> Result<Vec<Triple>, KgError> {
        let state = self.read();
        state.require_property(property_id)?;
        if let RangeValue::Entity(id) = range {
            state.require_entity(id)?;
        }
        let props = state.property_family(property_id);
        Ok(state
            .visible(user)
            .filter(|t| t.range_value.same_as(range) && props.contains(t.property_id.as_str()))
            .cloned()
            .collect())
    }

    /// Every current triple with `domain_id` as its subject.
    pub fn triples_about(&self, user: Option<&str>, domain_id: &str) -> Vec<Triple> {
        let state = self.read();
        state.visible(user).filter(|t| t.domain_id == domain_id).cloned().collect()
    }

    pub fn check_fact(
        &self,
        user: Option<&str>,
        domain_id: &str,
        property_id: &str,
        claimed: &RangeValue,
    ) -> Result<CheckResult, KgError> {
        let functional = {
            let state = self.read();
            state.require_property(property_id)?.functional
        };
        let claimed = self.normalize(property_id, claimed.clone());
        let current = self.query(user, domain_id, property_id)?;
        if let Some(hit) = current.iter().find(|t| t.range_value.same_as(&claimed)) {
            return Ok(CheckResult::Confirmed(hit.clone()));
        }
        match current.into_iter().next() {
            Some(actual) if functional => Ok(CheckResult::Contradicted(actual)),
            _ => Ok(CheckResult::Unknown),
        }
    }

    /// Stores a learned triple for its owning user.
    pub fn assert_fact(&self, triple: Triple) -> Result<AssertOutcome, KgError> {
        let Source::Learned(user) = triple.source.clone() else {
            return Err(KgError::BuiltinConflict(Box::new(triple)));
        };
        let mut state = self.write();
        let property = state.require_property(&triple.property_id)?.clone();
        state.require_entity(&triple.domain_id)?;
        let mut triple = triple;
        triple.range_value = normalize_range(&property.range_kind, triple.range_value);
        if !property.range_kind.accepts(&triple.range_value) {
            return Err(KgError::RangeKind {
                property: property.id,
                expected: property.range_kind,
                got: triple.range_value,
            });
        }
        if let RangeValue::Entity(id) = &triple.range_value {
            state.require_entity(id)?;
        }
        state.check_classes(&property, &triple)?;

        let same_slot = |t: &Triple| t.domain_id == triple.domain_id && t.property_id == triple.property_id;
        let mut builtin = state.builtin.iter().filter(|t| same_slot(t)).peekable();
        if let Some(first) = builtin.peek().cloned().cloned() {
            if builtin.any(|t| t.range_value.same_as(&triple.range_value)) {
                return Ok(AssertOutcome::AlreadyKnown);
            }
            if property.functional {
                return Err(KgError::BuiltinConflict(Box::new(first)));
            }
        }

        state.seq += 1;
        triple.asserted_at = state.seq;
        let learned = state.learned.entry(user.clone()).or_default();
        let outcome = if property.functional {
            match learned.iter().position(same_slot) {
                Some(i) if learned[i].range_value.same_as(&triple.range_value) => AssertOutcome::AlreadyKnown,
                Some(i) => AssertOutcome::Superseded(std::mem::replace(&mut learned[i], triple.clone())),
                None => {
                    learned.push(triple.clone());
                    AssertOutcome::StoredNew
                }
            }
        } else if learned.iter().any(|t| same_slot(t) && t.range_value.same_as(&triple.range_value)) {
            AssertOutcome::AlreadyKnown
        } else {
            learned.push(triple.clone());
            AssertOutcome::StoredNew
        };
        if outcome != AssertOutcome::AlreadyKnown {
            state.pending.entry(user).or_default().push(triple);
        }
        Ok(outcome)
    }

    /// Raises the popularity of each listed id once per occurrence. Unknown ids are skipped.
    pub fn bump_popularity<S: AsRef<str>>(&self, ids: &[S]) {
        if ids.is_empty() {
            return;
        }
        let mut state = self.write();
        for id in ids {
            let id = id.as_ref();
            match state.popularity_mut(id) {
                Some(pop) => *pop += self.config.popularity_increment,
                None => warn!("popularity bump for unknown id `{id}` skipped"),
            }
        }
    }

    /// Learned triples currently held for `user_id`.
    pub fn learned_triples(&self, user_id: &str) -> Vec<Triple> {
        self.read().learned.get(user_id).cloned().unwrap_or_default()
    }

    /// Writes a user's unsaved facts to the journal and snapshots popularity.
    pub fn persist(&self, user_id: &str) -> Result<(), KgError> {
        let store = self.store.as_ref().ok_or(KgError::NoStore)?;
        let (pending, popularity) = {
            let state = self.read();
            (
                state.pending.get(user_id).cloned().unwrap_or_default(),
                state.popularity_map(),
            )
        };
        store.append_triples(user_id, &pending)?;
        {
            let mut state = self.write();
            if let Some(queue) = state.pending.get_mut(user_id) {
                let written = pending.len().min(queue.len());
                queue.drain(..written);
            }
        }
        store.write_popularity(&popularity)
    }

    /// Restores a user's learned facts from the journal and compacts it.
    pub fn load_user(&self, user_id: &str) -> Result<(), KgError> {
        let store = self.store.as_ref().ok_or(KgError::NoStore)?;
        self.ensure_user(user_id)?;
        let records = store.read_triples(user_id)?;
        let mut state = self.write();
        let mut current: Vec<Triple> = Vec::new();
        for mut record in records {
            record.source = Source::Learned(user_id.to_string());
            let Some(property) = state.properties.get(&record.property_id) else {
                warn!("journal of `{user_id}` references unknown property `{}`", record.property_id);
                continue;
            };
            record.range_value = normalize_range(&property.range_kind, record.range_value);
            let functional = property.functional;
            let resolves = state.entities.contains_key(&record.domain_id)
                && record
                    .range_value
                    .entity_id()
                    .is_none_or(|id| state.entities.contains_key(id));
            if !resolves {
                warn!("journal of `{user_id}` has a dangling record {record:?}");
                continue;
            }
            state.seq = state.seq.max(record.asserted_at);
            let same = |t: &Triple| t.domain_id == record.domain_id && t.property_id == record.property_id;
            if functional {
                current.retain(|t| !same(t));
            } else {
                current.retain(|t| !(same(t) && t.range_value.same_as(&record.range_value)));
            }
            current.push(record);
        }
        state.learned.insert(user_id.to_string(), current.clone());
        state.pending.remove(user_id);
        drop(state);
        store.rewrite_triples(user_id, &current)
    }

    fn normalize(&self, property_id: &str, value: RangeValue) -> RangeValue {
        match self.read().properties.get(property_id) {
            Some(p) => normalize_range(&p.range_kind, value),
            None => value,
        }
    }
}

fn normalize_range(kind: &RangeKind, value: RangeValue) -> RangeValue {
    match (kind, value) {
        (RangeKind::Entity(_), RangeValue::Str(id)) => RangeValue::Entity(id),
        (RangeKind::String, RangeValue::Entity(s)) => RangeValue::Str(s),
        (_, v) => v,
    }
}

impl State {
    /// Whether `class` equals `target` or descends from it.
    fn is_a(&self, class: &str, target: &str) -> bool {
        if target == "thing" {
            return true;
        }
        let mut current = class;
        for _ in 0..=self.classes.len() {
            if current == target {
                return true;
            }
            match self.classes.get(current) {
                Some(parent) => current = parent,
                None => return false,
            }
        }
        false
    }

    /// Domain and range class constraints; unknown ids are left to the integrity check.
    fn check_classes(&self, property: &PropertyDef, triple: &Triple) -> Result<(), KgError> {
        if let Some(domain) = self.entities.get(&triple.domain_id) {
            if !property.domain_classes.iter().any(|c| self.is_a(&domain.class_id, c)) {
                return Err(KgError::DomainClass {
                    entity: domain.id.clone(),
                    class: domain.class_id.clone(),
                    property: property.id.clone(),
                });
            }
        }
        if let (RangeKind::Entity(class), RangeValue::Entity(id)) = (&property.range_kind, &triple.range_value) {
            if let Some(range) = self.entities.get(id) {
                if !self.is_a(&range.class_id, class) {
                    return Err(KgError::DomainClass {
                        entity: range.id.clone(),
                        class: range.class_id.clone(),
                        property: property.id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    fn rebuild_names(&mut self) {
        self.names.clear();
        for entity in self.entities.values() {
            if entity.source != Source::Builtin {
                continue;
            }
            self.names
                .entry(entity.canonical_name.to_lowercase())
                .or_default()
                .push((entity.id.clone(), NameKind::Canonical));
            for alias in &entity.aliases {
                self.names
                    .entry(alias.to_lowercase())
                    .or_default()
                    .push((entity.id.clone(), NameKind::Alias));
            }
        }
    }

    fn require_entity(&self, id: &str) -> Result<&Entity, KgError> {
        self.entities.get(id).ok_or_else(|| KgError::UnknownEntity(id.to_string()))
    }

    fn require_property(&self, id: &str) -> Result<&PropertyDef, KgError> {
        self.properties.get(id).ok_or_else(|| KgError::UnknownProperty(id.to_string()))
    }

    /// The property and every property refining it, transitively.
    fn property_family(&self, id: &str) -> BTreeSet<&str> {
        let mut family: BTreeSet<&str> = BTreeSet::new();
        family.insert(self.properties.get_key_value(id).map(|(k, _)| k.as_str()).unwrap_or(""));
        loop {
            let before = family.len();
            for p in self.properties.values() {
                if let Some(parent) = &p.subproperty_of {
                    if family.contains(parent.as_str()) {
                        family.insert(p.id.as_str());
                    }
                }
            }
            if family.len() == before {
                return family;
            }
        }
    }

    fn visible<'a>(&'a self, user: Option<&'a str>) -> impl Iterator<Item = &'a Triple> + 'a {
        let learned = user
            .and_then(|u| self.learned.get(u))
            .into_iter()
            .flatten();
        self.builtin.iter().chain(learned)
    }

    fn popularity_mut(&mut self, id: &str) -> Option<&mut f64> {
        if let Some(e) = self.entities.get_mut(id) {
            return Some(&mut e.popularity);
        }
        self.properties.get_mut(id).map(|p| &mut p.popularity)
    }

    fn popularity_map(&self) -> BTreeMap<String, f64> {
        self.entities
            .values()
            .map(|e| (e.id.clone(), e.popularity))
            .chain(self.properties.values().map(|p| (p.id.clone(), p.popularity)))
            .collect()
    }
}
