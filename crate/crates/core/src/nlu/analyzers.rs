//! Rule-based analyzers behind the [`Analyzer`] plug-in contract.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::dialogue_act::{ActGroup, DialogueAct};
use crate::kg::{KnowledgeGraph, Tense};
use crate::templates::{generate_da_patterns, StructureRegistry, TemplateError};

use super::matcher::{AnalyzedText, CompiledPattern};
use super::rules::RuleTables;
use super::text::expand;
use super::{ActHypothesis, Analysis, Analyzer, AnalyzerInput, Mention, NluError, PropertyHypothesis};

/// Compiled act/property patterns generated from the knowledge graph.
#[derive(Debug, Default)]
pub struct PatternIndex {
    pub patterns: Vec<CompiledPattern>,
    pub failures: Vec<TemplateError>,
}

impl PatternIndex {
    /// Generated patterns plus tag-question variants of positive statements
    /// ("... was born in #RAN# right").
    pub fn build(graph: &KnowledgeGraph, structures: &StructureRegistry) -> Self {
        let report = generate_da_patterns(graph, structures);
        let mut patterns = Vec::new();
        for p in report.patterns {
            let compiled = CompiledPattern::compile(&p.pattern, p.act, Some(p.property_id.clone()));
            if p.structure == "ProvideInformation_Positive" && p.act.group() == ActGroup::Inf {
                patterns.push(compiled.clone().with_tag("right", DialogueAct::QueYesno));
            }
            patterns.push(compiled);
        }
        PatternIndex {
            patterns,
            failures: report.failures,
        }
    }
}

fn prepare(input: &AnalyzerInput<'_>, rules: &RuleTables) -> AnalyzedText {
    let spans: Vec<(usize, usize)> = input.mentions.iter().map(|m| (m.start, m.end)).collect();
    AnalyzedText::new(&input.segment.text, &spans, rules)
}

fn sort_top_k<T>(items: &mut Vec<T>, k: usize, key: impl Fn(&T) -> (f64, String)) {
    items.sort_by(|a, b| {
        let (ca, la) = key(a);
        let (cb, lb) = key(b);
        cb.total_cmp(&ca).then(la.cmp(&lb))
    });
    items.truncate(k);
}

/// Longest-match scan over canonical names and aliases.
pub struct EntityLinker {
    graph: Arc<KnowledgeGraph>,
    /// First token → surfaces (as token lists) starting with it, longest first.
    index: HashMap<String, Vec<Vec<String>>>,
}

impl EntityLinker {
    pub fn new(graph: Arc<KnowledgeGraph>) -> Self {
        let mut index: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        let surfaces = graph
            .surface_forms()
            .into_iter()
            .map(|(s, _)| s)
            .chain(graph.general_surfaces());
        for surface in surfaces {
            let toks: Vec<String> = expand(&surface).into_iter().map(|t| t.text).collect();
            if let Some(first) = toks.first() {
                let list = index.entry(first.clone()).or_default();
                if !list.contains(&toks) {
                    list.push(toks);
                }
            }
        }
        for list in index.values_mut() {
            list.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        }
        EntityLinker { graph, index }
    }

    pub fn link(&self, text: &str) -> Vec<Mention> {
        let tokens = expand(text);
        let mut out = Vec::new();
        let mut t = 0;
        while t < tokens.len() {
            let found = self.index.get(&tokens[t].text).and_then(|cands| {
                cands.iter().find(|c| {
                    c.len() <= tokens.len() - t && c.iter().zip(&tokens[t..]).all(|(a, b)| *a == b.text)
                })
            });
            if let Some(surface) = found {
                let len = surface.len();
                let joined = surface.join(" ");
                let candidates = self.graph.resolve_name(&joined);
                if !candidates.is_empty() {
                    let (start, last) = (tokens[t].start, &tokens[t + len - 1]);
                    let shared = tokens.get(t + len).is_some_and(|n| n.start == last.start);
                    let end = if shared {
                        last.start + last.text.chars().count()
                    } else {
                        last.end
                    };
                    out.push(Mention {
                        start,
                        end,
                        surface: text.chars().skip(start).take(end - start).collect(),
                        candidates,
                    });
                    t += len;
                    continue;
                }
            }
            t += 1;
        }
        out
    }
}

impl Analyzer for EntityLinker {
    fn name(&self) -> &str {
        "entity_linker"
    }

    fn analyze(&self, batch: &[AnalyzerInput<'_>]) -> Result<Vec<Analysis>, NluError> {
        Ok(batch
            .iter()
            .map(|i| Analysis::Mentions(self.link(&i.segment.text)))
            .collect())
    }
}

/// Act classification by pattern coverage and closed-class phrases.
pub struct ActClassifier {
    patterns: Arc<PatternIndex>,
    rules: Arc<RuleTables>,
    k: usize,
}

impl ActClassifier {
    pub fn new(patterns: Arc<PatternIndex>, rules: Arc<RuleTables>, k: usize) -> Self {
        ActClassifier { patterns, rules, k }
    }

    pub fn classify(&self, input: &AnalyzerInput<'_>) -> Vec<ActHypothesis> {
        let text = prepare(input, &self.rules);
        let mut best: BTreeMap<DialogueAct, f64> = BTreeMap::new();
        let mut note = |act: DialogueAct, c: f64| {
            let e = best.entry(act).or_insert(0.0);
            *e = e.max(c);
        };
        for p in &self.patterns.patterns {
            if let Some(m) = p.match_segment(&text, &self.rules) {
                note(p.act, m.coverage);
            }
        }
        let words: Vec<&str> = text.tokens.iter().map(|t| t.text.as_str()).collect();
        let denom = (words.len() - text.skip_leading).max(1);
        for (act, phrase) in &self.rules.act_phrases {
            if phrase.len() <= words.len() && words.windows(phrase.len()).any(|w| w == phrase.as_slice()) {
                note(*act, (phrase.len() as f64 / denom as f64).min(1.0));
            }
        }
        let mut acts: Vec<ActHypothesis> = best
            .into_iter()
            .filter(|(_, c)| *c > 0.0)
            .map(|(act, confidence)| ActHypothesis { act, confidence })
            .collect();
        if acts.is_empty() {
            return vec![ActHypothesis::fallback()];
        }
        sort_top_k(&mut acts, self.k, |a| (a.confidence, a.act.path().to_string()));
        acts
    }
}

impl Analyzer for ActClassifier {
    fn name(&self) -> &str {
        "act_classifier"
    }

    fn analyze(&self, batch: &[AnalyzerInput<'_>]) -> Result<Vec<Analysis>, NluError> {
        Ok(batch.iter().map(|i| Analysis::Acts(self.classify(i))).collect())
    }
}

/// Property detection with domain/range spans from the same patterns.
pub struct PropertyDetector {
    patterns: Arc<PatternIndex>,
    rules: Arc<RuleTables>,
    k: usize,
}

impl PropertyDetector {
    pub fn new(patterns: Arc<PatternIndex>, rules: Arc<RuleTables>, k: usize) -> Self {
        PropertyDetector { patterns, rules, k }
    }

    pub fn detect(&self, input: &AnalyzerInput<'_>) -> Vec<PropertyHypothesis> {
        let text = prepare(input, &self.rules);
        let mut best: BTreeMap<String, PropertyHypothesis> = BTreeMap::new();
        for p in &self.patterns.patterns {
            let Some(property) = &p.property_id else { continue };
            let Some(m) = p.match_segment(&text, &self.rules) else { continue };
            let better = best.get(property).is_none_or(|b| m.coverage > b.confidence);
            if better {
                best.insert(
                    property.clone(),
                    PropertyHypothesis {
                        property_id: property.clone(),
                        confidence: m.coverage,
                        domain_span: m.dom,
                        range_span: m.ran,
                        act: p.act,
                    },
                );
            }
        }
        let mut props: Vec<PropertyHypothesis> = best.into_values().collect();
        sort_top_k(&mut props, self.k, |p| (p.confidence, p.property_id.clone()));
        props
    }
}

impl Analyzer for PropertyDetector {
    fn name(&self) -> &str {
        "property_detector"
    }

    fn analyze(&self, batch: &[AnalyzerInput<'_>]) -> Result<Vec<Analysis>, NluError> {
        Ok(batch.iter().map(|i| Analysis::Properties(self.detect(i))).collect())
    }
}

pub struct TenseClassifier {
    rules: Arc<RuleTables>,
}

impl TenseClassifier {
    pub fn new(rules: Arc<RuleTables>) -> Self {
        TenseClassifier { rules }
    }

    pub fn classify(&self, text: &str) -> Tense {
        let words: Vec<String> = expand(text).into_iter().map(|t| t.text).collect();
        let followed = |i: usize| i + 1 < words.len();
        let future = words.iter().enumerate().any(|(i, w)| {
            (matches!(w.as_str(), "will" | "gonna") && followed(i))
                || (w == "going" && words.get(i + 1).is_some_and(|n| n == "to") && followed(i + 1))
        });
        if future {
            Tense::Future
        } else if words.iter().any(|w| self.rules.is_past(w)) {
            Tense::Past
        } else {
            Tense::Present
        }
    }
}

impl Analyzer for TenseClassifier {
    fn name(&self) -> &str {
        "tense_classifier"
    }

    fn analyze(&self, batch: &[AnalyzerInput<'_>]) -> Result<Vec<Analysis>, NluError> {
        Ok(batch
            .iter()
            .map(|i| Analysis::Tense(self.classify(&i.segment.text)))
            .collect())
    }
}
