//! Word level, sentence-structure level and adjacency-pair level templates.

mod pairs;
mod structures;

use std::fs;
use std::path::Path;

use thiserror::Error;

pub use pairs::{
    load_pairs, prefixes_overlap, validate_pairs, AdjacencyPair, Edge, Initiator, KgOp, PairRegistry,
    Participant, ResponsePlan, Step, Trigger, ValidationReport, Violation,
};
pub use structures::{
    generate_da_patterns, normalize_placeholders, DaPattern, GenerationReport, StructureRegistry,
    StructureType, FORWARD_QUESTION, FUN_FACT,
};

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("{file}: {message}")]
    Parse { file: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown structure `{0}`")]
    UnknownStructure(String),
    #[error("property `{property}` cannot realize `{structure}`: no `{category}` word slot")]
    MissingSlot {
        property: String,
        structure: String,
        category: String,
    },
    #[error("property `{property}` has no pattern for `{structure}`")]
    NoPattern { property: String, structure: String },
    #[error("invalid structure registry: {0}")]
    Registry(String),
}

pub(crate) fn read_file(path: &Path) -> Result<String, TemplateError> {
    fs::read_to_string(path).map_err(|e| TemplateError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// The structure registry and the validated pair registry of a data pack.
#[derive(Debug, Clone)]
pub struct Templates {
    pub structures: StructureRegistry,
    pub pairs: PairRegistry,
}

impl Templates {
    /// Loads `structures.json` and `pairs.json`; pairs failing validation are
    /// left out and reported.
    pub fn load(dir: &Path) -> Result<(Self, ValidationReport), TemplateError> {
        let structures = StructureRegistry::load(&dir.join("structures.json"))?;
        let (pairs, report) = load_pairs(&dir.join("pairs.json"), &structures)?;
        Ok((Templates { structures, pairs }, report))
    }
}
