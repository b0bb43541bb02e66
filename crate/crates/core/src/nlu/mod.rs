//! Natural language understanding: segmentation and per-segment annotation.
//!
//! Analyzers are interchangeable components behind [`Analyzer`]; the shipped
//! ones are rule baselines. [`Nlu::annotate_batch`] segments all hypotheses
//! once and calls every analyzer exactly once with the whole segment batch.

mod analyzers;
mod matcher;
mod rules;
mod segment;
mod text;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue_act::DialogueAct;
use crate::kg::{Candidate, KnowledgeGraph, Tense};
use crate::templates::StructureRegistry;

pub use analyzers::{ActClassifier, EntityLinker, PatternIndex, PropertyDetector, TenseClassifier};
pub use matcher::{AnalyzedText, CompiledPattern, PatternMatch, Role, SlotSpan};
pub use rules::RuleTables;
pub use segment::{restore_punctuation, segment, Punct, Segment, Terminal};
pub use text::{expand, Token};

#[derive(Debug, Error)]
pub enum NluError {
    #[error("{file}:{line}: {message}")]
    Rules { file: String, line: usize, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("hypothesis text is empty")]
    EmptyHypothesis,
    #[error("asr confidence {0} outside (0, 1]")]
    Confidence(f64),
    #[error("batch of {got} hypotheses outside 1..={max}")]
    BatchSize { got: usize, max: usize },
    #[error("analyzer `{name}` failed: {message}")]
    Analyzer { name: String, message: String },
}

/// One speech recognition hypothesis: lowercase words without punctuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub text: String,
    pub asr_confidence: f64,
}

impl Hypothesis {
    pub fn new(text: &str, asr_confidence: f64) -> Result<Self, NluError> {
        if text.trim().is_empty() {
            return Err(NluError::EmptyHypothesis);
        }
        if !(asr_confidence > 0.0 && asr_confidence <= 1.0) {
            return Err(NluError::Confidence(asr_confidence));
        }
        Ok(Hypothesis {
            text: text.split_whitespace().collect::<Vec<_>>().join(" "),
            asr_confidence,
        })
    }

    pub fn from_typed(text: &str) -> Result<Self, NluError> {
        Self::typed(text, 1.0)
    }

    /// Typed input normalized to recognizer output: lowercase, no punctuation
    /// apart from apostrophes and hyphens inside words.
    pub fn typed(text: &str, asr_confidence: f64) -> Result<Self, NluError> {
        let cleaned: String = text
            .to_lowercase()
            .chars()
            .map(|c| if c.is_alphanumeric() || c == '\'' || c == '-' || c.is_whitespace() { c } else { ' ' })
            .collect();
        let words: Vec<&str> = cleaned
            .split_whitespace()
            .map(|w| w.trim_matches(['\'', '-']))
            .filter(|w| !w.is_empty())
            .collect();
        Self::new(&words.join(" "), asr_confidence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActHypothesis {
    pub act: DialogueAct,
    pub confidence: f64,
}

impl ActHypothesis {
    pub const FALLBACK_CONFIDENCE: f64 = 0.1;

    pub fn fallback() -> Self {
        ActHypothesis {
            act: DialogueAct::InvOther,
            confidence: Self::FALLBACK_CONFIDENCE,
        }
    }
}

/// A linked mention; spans are character offsets into the segment text.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyHypothesis {
    pub property_id: String,
    pub confidence: f64,
    pub domain_span: Option<SlotSpan>,
    pub range_span: Option<SlotSpan>,
    /// Act of the pattern that produced the hypothesis.
    pub act: DialogueAct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentAnnotations {
    pub dialogue_acts: Vec<ActHypothesis>,
    pub mentions: Vec<Mention>,
    pub properties: Vec<PropertyHypothesis>,
    pub tense: Tense,
}

impl SegmentAnnotations {
    fn failed() -> Self {
        SegmentAnnotations {
            dialogue_acts: vec![ActHypothesis::fallback()],
            mentions: Vec::new(),
            properties: Vec::new(),
            tense: Tense::Present,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotatedSegment {
    pub segment: Segment,
    pub asr_confidence: f64,
    pub annotations: SegmentAnnotations,
}

/// What an analyzer sees for one segment.
pub struct AnalyzerInput<'a> {
    pub segment: &'a Segment,
    /// Mentions from the linking stage; empty while linking itself runs.
    pub mentions: &'a [Mention],
}

pub enum Analysis {
    Mentions(Vec<Mention>),
    Acts(Vec<ActHypothesis>),
    Properties(Vec<PropertyHypothesis>),
    Tense(Tense),
}

/// A batch analyzer. Implementations must return one result per input, in order.
pub trait Analyzer: Send + Sync {
    fn name(&self) -> &str;
    fn analyze(&self, batch: &[AnalyzerInput<'_>]) -> Result<Vec<Analysis>, NluError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Linking,
    Acts,
    Properties,
    Tense,
}

/// One analyzer invocation, for tracing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzerCall {
    pub name: String,
    pub batch_size: usize,
    pub micros: u128,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NluOutput {
    pub segments: Vec<AnnotatedSegment>,
    pub calls: Vec<AnalyzerCall>,
}

#[derive(Debug, Clone, Copy)]
pub struct NluConfig {
    pub k: usize,
    pub max_hypotheses: usize,
}

impl Default for NluConfig {
    fn default() -> Self {
        NluConfig { k: 3, max_hypotheses: 5 }
    }
}

pub struct Nlu {
    rules: Arc<RuleTables>,
    patterns: Arc<PatternIndex>,
    linker: Box<dyn Analyzer>,
    acts: Box<dyn Analyzer>,
    properties: Box<dyn Analyzer>,
    tense: Box<dyn Analyzer>,
    config: NluConfig,
}

impl std::fmt::Debug for Nlu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Nlu")
            .field("patterns", &self.patterns.patterns.len())
            .field("config", &self.config)
            .finish()
    }
}

impl Nlu {
    /// Builds the rule baselines over the graph's generated patterns.
    pub fn new(graph: Arc<KnowledgeGraph>, structures: &StructureRegistry, mut rules: RuleTables, config: NluConfig) -> Self {
        for p in graph.properties() {
            if let Some(verb) = p.word_slots.get("Verb") {
                rules.verbs.extend(verb.split_whitespace().next().map(str::to_lowercase));
            }
        }
        let rules = Arc::new(rules);
        let patterns = Arc::new(PatternIndex::build(&graph, structures));
        let k = config.k.max(1);
        Nlu {
            linker: Box::new(EntityLinker::new(graph)),
            acts: Box::new(ActClassifier::new(patterns.clone(), rules.clone(), k)),
            properties: Box::new(PropertyDetector::new(patterns.clone(), rules.clone(), k)),
            tense: Box::new(TenseClassifier::new(rules.clone())),
            rules,
            patterns,
            config,
        }
    }

    /// Swaps in another implementation for one stage.
    pub fn replace(&mut self, stage: Stage, analyzer: Box<dyn Analyzer>) {
        match stage {
            Stage::Linking => self.linker = analyzer,
            Stage::Acts => self.acts = analyzer,
            Stage::Properties => self.properties = analyzer,
            Stage::Tense => self.tense = analyzer,
        }
    }

    pub fn rules(&self) -> &RuleTables {
        &self.rules
    }

    pub fn patterns(&self) -> &PatternIndex {
        &self.patterns
    }

    pub fn config(&self) -> NluConfig {
        self.config
    }

    pub fn segment(&self, hypothesis: &Hypothesis, hypothesis_index: usize) -> Vec<Segment> {
        segment(hypothesis, hypothesis_index, &self.rules)
    }

    /// Segments every hypothesis, then runs each analyzer once over all segments.
    pub fn annotate_batch(&self, hypotheses: &[Hypothesis]) -> Result<NluOutput, NluError> {
        if hypotheses.is_empty() || hypotheses.len() > self.config.max_hypotheses {
            return Err(NluError::BatchSize {
                got: hypotheses.len(),
                max: self.config.max_hypotheses,
            });
        }
        let started = Instant::now();
        let mut segments = Vec::new();
        let mut confidences = Vec::new();
        for (i, h) in hypotheses.iter().enumerate() {
            for s in self.segment(h, i) {
                segments.push(s);
                confidences.push(h.asr_confidence);
            }
        }
        let mut calls = vec![AnalyzerCall {
            name: "segmenter".into(),
            batch_size: hypotheses.len(),
            micros: started.elapsed().as_micros(),
            failed: false,
        }];
        let annotations = self.run_stages(&segments, &mut calls);
        let segments = segments
            .into_iter()
            .zip(confidences)
            .zip(annotations)
            .map(|((segment, asr_confidence), annotations)| AnnotatedSegment {
                segment,
                asr_confidence,
                annotations,
            })
            .collect();
        Ok(NluOutput { segments, calls })
    }

    /// Annotates segments one analyzer call per segment; the reference for batching.
    pub fn annotate_sequential(&self, hypotheses: &[Hypothesis]) -> Result<Vec<AnnotatedSegment>, NluError> {
        let mut out = Vec::new();
        for (i, h) in hypotheses.iter().enumerate() {
            for s in self.segment(h, i) {
                let mut calls = Vec::new();
                let annotations = self.run_stages(std::slice::from_ref(&s), &mut calls).remove(0);
                out.push(AnnotatedSegment {
                    segment: s,
                    asr_confidence: h.asr_confidence,
                    annotations,
                });
            }
        }
        Ok(out)
    }

    fn run_stages(&self, segments: &[Segment], calls: &mut Vec<AnalyzerCall>) -> Vec<SegmentAnnotations> {
        let n = segments.len();
        let mut failed = vec![false; n];
        let bare: Vec<AnalyzerInput<'_>> = segments
            .iter()
            .map(|segment| AnalyzerInput { segment, mentions: &[] })
            .collect();
        let mentions: Vec<Vec<Mention>> = run(self.linker.as_ref(), &bare, calls, &mut failed, |a| match a {
            Analysis::Mentions(m) => Some(m),
            _ => None,
        });
        let inputs: Vec<AnalyzerInput<'_>> = segments
            .iter()
            .zip(&mentions)
            .map(|(segment, m)| AnalyzerInput { segment, mentions: m })
            .collect();
        let acts = run(self.acts.as_ref(), &inputs, calls, &mut failed, |a| match a {
            Analysis::Acts(x) => Some(x),
            _ => None,
        });
        let properties = run(self.properties.as_ref(), &inputs, calls, &mut failed, |a| match a {
            Analysis::Properties(x) => Some(x),
            _ => None,
        });
        let tenses = run(self.tense.as_ref(), &inputs, calls, &mut failed, |a| match a {
            Analysis::Tense(x) => Some(x),
            _ => None,
        });
        let k = self.config.k.max(1);
        (0..n)
            .map(|i| {
                if failed[i] {
                    return SegmentAnnotations::failed();
                }
                let mut dialogue_acts = acts[i].clone();
                dialogue_acts.truncate(k);
                if dialogue_acts.is_empty() {
                    dialogue_acts.push(ActHypothesis::fallback());
                }
                let mut properties = properties[i].clone();
                properties.truncate(k);
                SegmentAnnotations {
                    dialogue_acts,
                    mentions: mentions[i].clone(),
                    properties,
                    tense: tenses[i],
                }
            })
            .collect()
    }
}

/// Calls one analyzer on the batch. A failed call or a malformed result marks
/// the affected segments failed and yields defaults for them.
fn run<T: Default + Clone>(
    analyzer: &dyn Analyzer,
    batch: &[AnalyzerInput<'_>],
    calls: &mut Vec<AnalyzerCall>,
    failed: &mut [bool],
    pick: impl Fn(Analysis) -> Option<T>,
) -> Vec<T> {
    let started = Instant::now();
    let result = analyzer.analyze(batch);
    let mut call = AnalyzerCall {
        name: analyzer.name().to_string(),
        batch_size: batch.len(),
        micros: 0,
        failed: false,
    };
    let out = match result {
        Ok(items) if items.len() == batch.len() => items
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                pick(a).unwrap_or_else(|| {
                    failed[i] = true;
                    call.failed = true;
                    T::default()
                })
            })
            .collect(),
        Ok(items) => {
            log::warn!("analyzer `{}` returned {} results for {} segments", call.name, items.len(), batch.len());
            failed.iter_mut().for_each(|f| *f = true);
            call.failed = true;
            vec![T::default(); batch.len()]
        }
        Err(e) => {
            log::warn!("{e}");
            failed.iter_mut().for_each(|f| *f = true);
            call.failed = true;
            vec![T::default(); batch.len()]
        }
    };
    call.micros = started.elapsed().as_micros();
    calls.push(call);
    out
}
