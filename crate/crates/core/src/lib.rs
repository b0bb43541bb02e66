//! A knowledge-graph grounded open-domain dialogue engine.
//!
//! User input flows through [`nlu`] (segmentation and per-segment annotation),
//! [`actions`] (candidate creation and constrained selection), [`dialogue`]
//! (adjacency-pair management over the [`kg`] graph) and [`lexicalizer`]
//! (surface realization). [`engine::Engine`] wires the stages into turns.

pub mod action;
pub mod bindings;
pub mod dialogue;
pub mod dialogue_act;
pub mod engine;
pub mod kg;
pub mod lexicalizer;
pub mod nlu;
pub mod templates;
pub mod validate;

pub use bindings::{Bindings, Filler, Slot};
pub use dialogue_act::DialogueAct;

/// Directory of the fixture pack shipped with this crate.
pub fn fixture_dir() -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}
