use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::dialogue_act::{ActGroup, DialogueAct};
use crate::kg::{KnowledgeGraph, PropertyDef};

use super::{read_file, TemplateError};

/// A sentence structure: a reusable sentence shape with the act it performs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StructureType {
    pub name: String,
    pub encodes_da: DialogueAct,
    pub asks_question: bool,
    /// Default pattern with `{Category}` word slots. Structures without one
    /// exist only as property-specific patterns.
    #[serde(default)]
    pub skeleton: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct StructureRegistry {
    by_name: BTreeMap<String, StructureType>,
}

#[derive(Deserialize)]
struct RegistryFile {
    structures: Vec<StructureType>,
}

/// Structure name whose question-ness is not implied by its act.
pub const FORWARD_QUESTION: &str = "Forward_Question";
pub const FUN_FACT: &str = "FunFact_Statement";

impl StructureRegistry {
    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        Self::from_json(&read_file(path)?, &path.display().to_string())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, TemplateError> {
        let file: RegistryFile = serde_json::from_str(text).map_err(|e| TemplateError::Parse {
            file: origin.to_string(),
            message: e.to_string(),
        })?;
        Self::from_structures(file.structures)
    }

    pub fn from_structures(list: Vec<StructureType>) -> Result<Self, TemplateError> {
        let mut by_name = BTreeMap::new();
        for s in list {
            let implied = s.encodes_da.group() == ActGroup::Que || s.name == FORWARD_QUESTION;
            if s.asks_question != implied {
                return Err(TemplateError::Registry(format!(
                    "structure `{}` has asks_question={} but encodes {}",
                    s.name, s.asks_question, s.encodes_da
                )));
            }
            if by_name.contains_key(&s.name) {
                return Err(TemplateError::Registry(format!("duplicate structure `{}`", s.name)));
            }
            by_name.insert(s.name.clone(), s);
        }
        Ok(StructureRegistry { by_name })
    }

    pub fn get(&self, name: &str) -> Option<&StructureType> {
        self.by_name.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &StructureType> {
        self.by_name.values()
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }

    /// Pattern for a structure, specialized to a property when one is given.
    /// An authored property pattern wins over assembling the skeleton.
    pub fn pattern(&self, structure: &str, property: Option<&PropertyDef>) -> Result<String, TemplateError> {
        let st = self
            .get(structure)
            .ok_or_else(|| TemplateError::UnknownStructure(structure.to_string()))?;
        if let Some(p) = property {
            if let Some(authored) = p.sentence_structures.get(structure).filter(|s| !s.trim().is_empty()) {
                return Ok(normalize_placeholders(authored));
            }
        }
        let no_pattern = || TemplateError::NoPattern {
            property: property.map(|p| p.id.clone()).unwrap_or_default(),
            structure: structure.to_string(),
        };
        let skeleton = st.skeleton.as_deref().ok_or_else(no_pattern)?;
        fill_word_slots(skeleton, structure, property)
    }

    /// Realizes `structure` over `property`'s word slots.
    pub fn realize_structure(&self, structure: &str, property: &PropertyDef) -> Result<String, TemplateError> {
        self.pattern(structure, Some(property))
    }
}

fn fill_word_slots(skeleton: &str, structure: &str, property: Option<&PropertyDef>) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(skeleton.len());
    let mut rest = skeleton;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let end = rest[start..].find('}').ok_or_else(|| TemplateError::Registry(format!(
            "unclosed word slot in skeleton of `{structure}`"
        )))? + start;
        let category = &rest[start + 1..end];
        let word = property
            .and_then(|p| p.word_slots.get(category))
            .ok_or_else(|| TemplateError::MissingSlot {
                property: property.map(|p| p.id.clone()).unwrap_or_default(),
                structure: structure.to_string(),
                category: category.to_string(),
            })?;
        out.push_str(word);
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    Ok(normalize_placeholders(&out))
}

/// Accepts both placeholder spellings and emits the short one.
pub fn normalize_placeholders(pattern: &str) -> String {
    pattern.replace("#DOMAIN#", "#DOM#").replace("#RANGE#", "#RAN#")
}

/// A knowledge-base derived training example for act detection.
#[derive(Debug, Clone, PartialEq)]
pub struct DaPattern {
    pub pattern: String,
    pub act: DialogueAct,
    pub property_id: String,
    pub structure: String,
}

#[derive(Debug, Default)]
pub struct GenerationReport {
    pub patterns: Vec<DaPattern>,
    pub failures: Vec<TemplateError>,
}

/// One pattern per declared (property, structure) pair that realizes.
pub fn generate_da_patterns(graph: &KnowledgeGraph, registry: &StructureRegistry) -> GenerationReport {
    let mut report = GenerationReport::default();
    for property in graph.properties() {
        for structure in property.sentence_structures.keys() {
            let Some(st) = registry.get(structure) else {
                report.failures.push(TemplateError::UnknownStructure(format!(
                    "{structure} (declared by {})",
                    property.id
                )));
                continue;
            };
            match registry.realize_structure(structure, &property) {
                Ok(pattern) => report.patterns.push(DaPattern {
                    pattern,
                    act: st.encodes_da,
                    property_id: property.id.clone(),
                    structure: structure.clone(),
                }),
                Err(e) => report.failures.push(e),
            }
        }
    }
    report
}
