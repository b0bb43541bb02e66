//! Whole-pack checks: graph integrity, pair graphs and realization totality.

use std::path::Path;

use crate::bindings::{Bindings, Filler};
use crate::engine::EngineError;
use crate::kg::{GraphStats, KnowledgeGraph, PropertyDef, RangeKind, RangeValue, Tense};
use crate::lexicalizer::{Lexicalizer, RealizationContext};
use crate::templates::{Step, Templates, Violation};

/// Participants used for sample realizations.
const SAMPLE_USER: &str = "validation_user";

#[derive(Debug, Clone)]
pub struct DataReport {
    pub stats: GraphStats,
    pub pairs: usize,
    pub structures: usize,
    pub pair_violations: Vec<Violation>,
    /// Structure/property combinations that fail to realize cleanly.
    pub realization: Vec<String>,
}

impl DataReport {
    pub fn violations(&self) -> usize {
        self.pair_violations.len() + self.realization.len()
    }
}

/// Loads every file of a data pack and checks it. Parse and integrity errors
/// of the graph are returned as errors; everything else is counted.
pub fn validate_data(dir: &Path) -> Result<DataReport, EngineError> {
    let graph = KnowledgeGraph::load(dir)?;
    let (templates, report) = Templates::load(dir)?;
    let lexicalizer = Lexicalizer::load(dir)?;
    Ok(DataReport {
        stats: graph.stats(),
        pairs: templates.pairs.len(),
        structures: templates.structures.len(),
        pair_violations: report.violations,
        realization: check_realization(&graph, &templates, &lexicalizer),
    })
}

/// Realizes each structure a property declares over a sample fact, in present
/// and past tense, plus every property-free structure a pair says.
pub fn check_realization(graph: &KnowledgeGraph, templates: &Templates, lexicalizer: &Lexicalizer) -> Vec<String> {
    let mut problems = Vec::new();
    let check = |problems: &mut Vec<String>, label: String, pattern: &str, bindings: &Bindings| {
        for tense in [Tense::Present, Tense::Past] {
            let mut ctx = RealizationContext::new(SAMPLE_USER, "alquist");
            ctx.tense = tense;
            match lexicalizer.realize(pattern, bindings, &ctx, graph) {
                Ok(text) if text.contains(['#', '<', '>', '{', '}']) => problems.push(format!("{label}: leftover markup in {text:?}")),
                Ok(text) if text.trim().is_empty() => problems.push(format!("{label}: empty realization")),
                Ok(_) => {}
                Err(e) => problems.push(format!("{label}: {e}")),
            }
        }
    };

    for property in graph.properties() {
        let bindings = sample_bindings(graph, &property);
        for structure in property.sentence_structures.keys() {
            let label = format!("{structure} of `{}`", property.id);
            match templates.structures.pattern(structure, Some(&property)) {
                Ok(pattern) => check(&mut problems, label, &pattern, &bindings),
                Err(e) => problems.push(format!("{label}: {e}")),
            }
        }
    }

    let mut said: Vec<&str> = templates
        .pairs
        .iter()
        .flat_map(|p| p.nodes.values())
        .flat_map(|n| &n.steps)
        .filter_map(|s| match s {
            Step::Say { say, .. } => Some(say.as_str()),
            Step::Kg { .. } => None,
        })
        .collect();
    said.sort_unstable();
    said.dedup();
    for structure in said {
        // structures that need a property are covered above
        if let Ok(pattern) = templates.structures.pattern(structure, None) {
            if !pattern.contains('#') {
                check(&mut problems, structure.to_string(), &pattern, &Bindings::default());
            }
        }
    }
    problems
}

fn sample_bindings(graph: &KnowledgeGraph, property: &PropertyDef) -> Bindings {
    if let Some(t) = graph.builtin_triples().into_iter().find(|t| t.property_id == property.id) {
        return Bindings::new(Some(Filler::Entity(t.domain_id)), Some(t.range_value.into()));
    }
    let entities = graph.entities();
    let of_class = |class: &str| entities.iter().find(|e| graph.is_a(&e.class_id, class)).map(|e| e.id.clone());
    let dom = property.domain_classes.iter().find_map(|c| of_class(c));
    let ran = match &property.range_kind {
        RangeKind::Entity(class) => of_class(class).map(Filler::Entity),
        RangeKind::String => Some(RangeValue::Str("something".into()).into()),
        RangeKind::Integer => Some(RangeValue::Int(2).into()),
    };
    Bindings::new(dom.map(Filler::Entity), ran)
}
