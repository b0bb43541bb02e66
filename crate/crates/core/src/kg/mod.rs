//! Conversational knowledge graph: world knowledge, the bot's own profile and
//! facts learned from each user, with popularity tracking and persistence.

mod graph;
mod model;
mod resolve;
mod store;

use std::path::Path;

use thiserror::Error;

pub use graph::{ClassDef, GraphConfig, GraphStats, KnowledgeGraph};
pub use model::{
    AssertOutcome, Candidate, CandidateSource, CheckResult, Entity, Gender, GrammaticalNumber,
    PropertyDef, RangeKind, RangeValue, Source, Tense, Triple,
};
pub use resolve::{fuzzy_score, GeneralResolver, LexiconResolver, NoGeneralResolver};
pub use store::Store;

/// Class id of the per-user profile entities created at runtime.
pub const USER_CLASS: &str = "user";

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("dangling references: {}", .0.join(", "))]
    Dangling(Vec<String>),
    #[error("duplicate id `{0}`")]
    Duplicate(String),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
    #[error("property `{property}` expects {expected}, got {got}")]
    RangeKind {
        property: String,
        expected: RangeKind,
        got: RangeValue,
    },
    #[error("entity `{entity}` of class `{class}` does not fit property `{property}`")]
    DomainClass {
        entity: String,
        class: String,
        property: String,
    },
    /// Builtin facts are frozen; a learned assertion may not contradict one.
    #[error("builtin fact conflicts with assertion: {0:?}")]
    BuiltinConflict(Box<Triple>),
    #[error("no store directory configured")]
    NoStore,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl KgError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        KgError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
