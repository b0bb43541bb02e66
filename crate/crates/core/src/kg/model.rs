use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Masculine,
    Feminine,
    Neuter,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GrammaticalNumber {
    #[default]
    Singular,
    Plural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Tense {
    Past,
    #[default]
    Present,
    Future,
}

/// Where a record came from. Learned records are scoped to the user who taught them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Builtin,
    Learned(String),
}

impl Source {
    pub fn visible_to(&self, user: Option<&str>) -> bool {
        match self {
            Source::Builtin => true,
            Source::Learned(owner) => user == Some(owner.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    #[serde(rename = "name")]
    pub canonical_name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(rename = "class")]
    pub class_id: String,
    #[serde(default)]
    pub gender: Gender,
    #[serde(rename = "number", default)]
    pub grammatical_number: GrammaticalNumber,
    #[serde(default = "one")]
    pub popularity: f64,
    #[serde(default)]
    pub source: Source,
    /// Carried through untouched; no ontology mapping is applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wikidata_id: Option<String>,
}

fn one() -> f64 {
    1.0
}

/// Declared range of a property.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RangeKind {
    Entity(String),
    String,
    Integer,
}

impl RangeKind {
    pub fn accepts(&self, value: &RangeValue) -> bool {
        matches!(
            (self, value),
            (RangeKind::Entity(_), RangeValue::Entity(_))
                | (RangeKind::String, RangeValue::Str(_))
                | (RangeKind::Integer, RangeValue::Int(_))
        )
    }
}

impl fmt::Display for RangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RangeKind::Entity(class) => write!(f, "entity:{class}"),
            RangeKind::String => f.write_str("string"),
            RangeKind::Integer => f.write_str("integer"),
        }
    }
}

impl Serialize for RangeKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RangeKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        match raw.as_str() {
            "string" => Ok(RangeKind::String),
            "integer" => Ok(RangeKind::Integer),
            other => match other.strip_prefix("entity:") {
                Some(class) if !class.is_empty() => Ok(RangeKind::Entity(class.to_string())),
                _ => Err(serde::de::Error::custom(format!("bad range kind `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyDef {
    pub id: String,
    #[serde(rename = "domains")]
    pub domain_classes: Vec<String>,
    #[serde(rename = "range")]
    pub range_kind: RangeKind,
    #[serde(default = "yes")]
    pub functional: bool,
    #[serde(default)]
    pub personalized: bool,
    #[serde(default = "one")]
    pub popularity: f64,
    /// Word level: category (Verb, Subject, Pronoun, ObjectNoun, ...) to word.
    #[serde(rename = "words", default)]
    pub word_slots: BTreeMap<String, String>,
    /// Declared sentence structures. An empty pattern means "assemble from word slots".
    #[serde(rename = "structures", default)]
    pub sentence_structures: BTreeMap<String, String>,
    /// Broader property this one refines; queries on the parent also see these triples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subproperty_of: Option<String>,
    /// Entity or class ids that a follow-up question on this property elaborates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub about: Vec<String>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RangeValue {
    Entity(String),
    Str(String),
    Int(i64),
}

impl RangeValue {
    pub fn entity_id(&self) -> Option<&str> {
        match self {
            RangeValue::Entity(id) => Some(id),
            _ => None,
        }
    }

    /// Equality with strings compared case-insensitively.
    pub fn same_as(&self, other: &RangeValue) -> bool {
        match (self, other) {
            (RangeValue::Str(a), RangeValue::Str(b)) => a.to_lowercase() == b.to_lowercase(),
            (a, b) => a == b,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            RangeValue::Entity(id) | RangeValue::Str(id) => serde_json::Value::String(id.clone()),
            RangeValue::Int(n) => serde_json::Value::from(*n),
        }
    }
}

impl fmt::Display for RangeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RangeValue::Entity(id) => f.write_str(id),
            RangeValue::Str(s) => write!(f, "{s:?}"),
            RangeValue::Int(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for RangeValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// On the wire a range value is a bare string or integer; strings are
/// disambiguated against the property's range kind after parsing.
impl<'de> Deserialize<'de> for RangeValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => Ok(RangeValue::Str(s)),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(RangeValue::Int)
                .ok_or_else(|| serde::de::Error::custom("range integer out of bounds")),
            other => Err(serde::de::Error::custom(format!("bad range value {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    #[serde(rename = "dom")]
    pub domain_id: String,
    #[serde(rename = "prop")]
    pub property_id: String,
    #[serde(rename = "ran")]
    pub range_value: RangeValue,
    #[serde(default)]
    pub tense: Tense,
    #[serde(default)]
    pub source: Source,
    #[serde(rename = "seq", default)]
    pub asserted_at: u64,
}

impl Triple {
    pub fn learned(user: &str, dom: &str, prop: &str, ran: RangeValue) -> Self {
        Triple {
            domain_id: dom.to_string(),
            property_id: prop.to_string(),
            range_value: ran,
            tense: Tense::Present,
            source: Source::Learned(user.to_string()),
            asserted_at: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckResult {
    /// A current triple holds the claimed value.
    Confirmed(Triple),
    /// A functional property currently holds a different value.
    Contradicted(Triple),
    Unknown,
}

impl CheckResult {
    pub fn status(&self) -> &'static str {
        match self {
            CheckResult::Confirmed(_) => "confirmed",
            CheckResult::Contradicted(_) => "contradicted",
            CheckResult::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssertOutcome {
    StoredNew,
    Superseded(Triple),
    /// The value was already current; nothing changed.
    AlreadyKnown,
}

/// A name-resolution candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub entity_id: String,
    pub score: f64,
    pub source: CandidateSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateSource {
    Private,
    General,
}
