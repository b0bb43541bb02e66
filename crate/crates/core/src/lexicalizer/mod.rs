//! Surface realization of sentence patterns.
//!
//! A pattern is plain text with `#DOM#`/`#RAN#` placeholders (optionally
//! followed by `'s`) and verb markers: `<V:verb>` is the finite main verb,
//! `<NEG:verb>` its negation and `<Q:verb> #X#` a question frame around the
//! subject `#X#`. Markers take the tense of the context and agree with the
//! nearest preceding subject.

mod morph;

use std::path::Path;

use thiserror::Error;

use crate::bindings::{Bindings, Filler, Slot};
use crate::kg::{Gender, GrammaticalNumber, KnowledgeGraph, Tense};

pub use morph::{number_word, parse_number, Lexicon, Person};

#[derive(Debug, Error)]
pub enum LexError {
    #[error("placeholder {0} is not bound")]
    Unbound(Slot),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("malformed pattern `{pattern}`: {reason}")]
    Malformed { pattern: String, reason: String },
    #[error("realized text still contains template syntax: `{0}`")]
    Leak(String),
    #[error("{file}:{line}: expected two tab-separated columns")]
    Table { file: String, line: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Who is who in the conversation, plus what this response has already named.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationContext {
    pub user_entity: String,
    pub bot_entity: String,
    /// Entities already named earlier in the response, oldest first.
    pub recent_entities: Vec<String>,
    pub tense: Tense,
}

impl RealizationContext {
    pub fn new(user_entity: &str, bot_entity: &str) -> Self {
        RealizationContext {
            user_entity: user_entity.to_string(),
            bot_entity: bot_entity.to_string(),
            recent_entities: Vec::new(),
            tense: Tense::Present,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    Subject,
    Object,
    Possessive,
}

/// Third-person pronoun by gender and number. Singular of unknown gender is "they".
pub fn pronoun(gender: Gender, number: GrammaticalNumber, case: Case) -> &'static str {
    let forms = match (number, gender) {
        (GrammaticalNumber::Plural, _) | (_, Gender::Unknown) => ["they", "them", "their"],
        (_, Gender::Masculine) => ["he", "him", "his"],
        (_, Gender::Feminine) => ["she", "her", "her"],
        (_, Gender::Neuter) => ["it", "it", "its"],
    };
    forms[case as usize]
}

fn pronoun_person(gender: Gender, number: GrammaticalNumber) -> Person {
    match (number, gender) {
        (GrammaticalNumber::Plural, _) | (_, Gender::Unknown) => Person::ThirdPlural,
        _ => Person::ThirdSingular,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Slot {
        slot: Slot,
        possessive: bool,
        trail: String,
    },
    Marker {
        kind: MarkerKind,
        verb: String,
        trail: String,
    },
    Word {
        text: String,
        trail: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MarkerKind {
    Verb,
    Neg,
    Question,
}

impl Piece {
    fn trail(&self) -> &str {
        match self {
            Piece::Slot { trail, .. } | Piece::Marker { trail, .. } | Piece::Word { trail, .. } => trail,
        }
    }
}

const TRAIL: &[char] = &['.', ',', '!', '?', ';', ':'];
const BE: &[&str] = &["is", "am", "are", "was", "were"];
const AUX: &[&str] = &[
    "is", "am", "are", "was", "were", "do", "does", "did", "has", "have", "will", "can",
];
const NOT_VERBS: &[&str] = &["always", "sometimes", "perhaps", "thus", "this", "his", "its"];

fn split_trail(raw: &str) -> (&str, &str) {
    let core = raw.trim_end_matches(TRAIL);
    (core, &raw[core.len()..])
}

fn parse_pattern(pattern: &str) -> Result<Vec<Piece>, LexError> {
    let malformed = |reason: &str| LexError::Malformed {
        pattern: pattern.to_string(),
        reason: reason.to_string(),
    };
    let mut pieces = Vec::new();
    for raw in pattern.split_whitespace() {
        if let Some(body) = raw.strip_prefix('<') {
            let (inner, rest) = body.split_once('>').ok_or_else(|| malformed("unclosed marker"))?;
            let (kind, verb) = inner.split_once(':').ok_or_else(|| malformed("marker without verb"))?;
            let kind = match kind {
                "V" => MarkerKind::Verb,
                "NEG" => MarkerKind::Neg,
                "Q" => MarkerKind::Question,
                _ => return Err(malformed("unknown marker kind")),
            };
            pieces.push(Piece::Marker {
                kind,
                verb: verb.replace('_', " "),
                trail: rest.to_string(),
            });
            continue;
        }
        let slot = [
            ("#DOMAIN#", Slot::Dom),
            ("#RANGE#", Slot::Ran),
            ("#DOM#", Slot::Dom),
            ("#RAN#", Slot::Ran),
        ]
        .into_iter()
        .find_map(|(tag, slot)| raw.strip_prefix(tag).map(|rest| (slot, rest)));
        if let Some((slot, rest)) = slot {
            let (possessive, rest) = match rest.strip_prefix("'s") {
                Some(r) => (true, r),
                None => (false, rest),
            };
            pieces.push(Piece::Slot {
                slot,
                possessive,
                trail: rest.to_string(),
            });
            continue;
        }
        let (core, trail) = split_trail(raw);
        pieces.push(Piece::Word {
            text: core.to_string(),
            trail: trail.to_string(),
        });
    }
    Ok(pieces)
}

/// Rendered forms of one placeholder filler.
struct Referent {
    forms: [String; 3],
    person: Person,
    entity: Option<String>,
    quantity: Option<i64>,
}

#[derive(Debug, Clone)]
pub struct Lexicalizer {
    lexicon: Lexicon,
}

impl Lexicalizer {
    pub fn new(lexicon: Lexicon) -> Self {
        Lexicalizer { lexicon }
    }

    pub fn load(dir: &Path) -> Result<Self, LexError> {
        Ok(Self::new(Lexicon::load(dir)?))
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    /// Pronoun for an entity in the given case; `None` if the entity is unknown.
    pub fn pronominalize(&self, entity_id: &str, case: Case, graph: &KnowledgeGraph) -> Option<&'static str> {
        graph
            .entity(entity_id)
            .map(|e| pronoun(e.gender, e.grammatical_number, case))
    }

    pub fn realize(
        &self,
        pattern: &str,
        bindings: &Bindings,
        ctx: &RealizationContext,
        graph: &KnowledgeGraph,
    ) -> Result<String, LexError> {
        self.realize_tracked(pattern, bindings, ctx, graph).map(|(text, _)| text)
    }

    /// Realizes consecutive sentences of one response, pronominalizing repeat mentions.
    pub fn realize_all(
        &self,
        items: &[(&str, &Bindings)],
        ctx: &RealizationContext,
        graph: &KnowledgeGraph,
    ) -> Result<Vec<String>, LexError> {
        let mut ctx = ctx.clone();
        let mut out = Vec::with_capacity(items.len());
        for (pattern, bindings) in items {
            let (text, mentioned) = self.realize_tracked(pattern, bindings, &ctx, graph)?;
            ctx.recent_entities = mentioned;
            out.push(text);
        }
        Ok(out)
    }

    /// Returns the sentence and the updated mention list.
    pub fn realize_tracked(
        &self,
        pattern: &str,
        bindings: &Bindings,
        ctx: &RealizationContext,
        graph: &KnowledgeGraph,
    ) -> Result<(String, Vec<String>), LexError> {
        let pieces = parse_pattern(pattern)?;
        let mut mentioned = ctx.recent_entities.clone();
        let mut out: Vec<String> = Vec::with_capacity(pieces.len());
        let mut subject: Option<Person> = None;
        let mut i = 0;
        while i < pieces.len() {
            let clause_start = i == 0 || !pieces[i - 1].trail().is_empty();
            match &pieces[i] {
                Piece::Word { text, trail } => {
                    if text.contains(['#', '{', '}', '<', '>']) {
                        return Err(LexError::Leak(pattern.to_string()));
                    }
                    out.push(format!("{text}{trail}"));
                }
                Piece::Marker { kind, verb, trail } => {
                    let person = subject.unwrap_or(Person::ThirdSingular);
                    let text = match kind {
                        MarkerKind::Verb => self.lexicon.retense(verb, ctx.tense, person),
                        MarkerKind::Neg => self.lexicon.negative(verb, ctx.tense, person),
                        MarkerKind::Question => {
                            let Some(Piece::Slot { slot, trail: slot_trail, .. }) = pieces.get(i + 1) else {
                                return Err(LexError::Malformed {
                                    pattern: pattern.to_string(),
                                    reason: "question marker must precede a placeholder".into(),
                                });
                            };
                            let r = self.referent(*slot, bindings, ctx, graph, &mentioned)?;
                            note_mention(&mut mentioned, &r);
                            subject = Some(r.person);
                            i += 1;
                            let frame = self.lexicon.interrogative(
                                verb,
                                ctx.tense,
                                r.person,
                                &r.forms[Case::Subject as usize],
                            );
                            out.push(format!("{frame}{trail}{slot_trail}"));
                            i += 1;
                            continue;
                        }
                    };
                    out.push(format!("{text}{trail}"));
                }
                Piece::Slot { slot, possessive, trail } => {
                    let r = self.referent(*slot, bindings, ctx, graph, &mentioned)?;
                    let next = pieces.get(i + 1);
                    let prev_aux = i > 0
                        && matches!(&pieces[i - 1], Piece::Word { text, trail } if trail.is_empty() && AUX.contains(&text.to_lowercase().as_str()));
                    let continues = trail.is_empty() && matches!(next, Some(Piece::Word { .. } | Piece::Marker { .. }));
                    let case = if *possessive {
                        Case::Possessive
                    } else if clause_start
                        || (i > 0 && matches!(&pieces[i - 1], Piece::Word { text, trail } if trail.is_empty() && text.eq_ignore_ascii_case("that")))
                        || (prev_aux && continues)
                    {
                        Case::Subject
                    } else {
                        Case::Object
                    };

                    if let (Some(n), Some(Piece::Word { text: noun, trail: noun_trail })) = (r.quantity, next) {
                        if !*possessive && trail.is_empty() && noun.chars().all(char::is_alphabetic) {
                            out.push(format!("{}{noun_trail}", self.lexicon.pluralize_phrase(noun, n)));
                            i += 2;
                            continue;
                        }
                    }

                    note_mention(&mut mentioned, &r);
                    out.push(format!("{}{trail}", r.forms[case as usize]));
                    if case == Case::Subject {
                        subject = Some(r.person);
                        if prev_aux {
                            let prev = out.len() - 2;
                            out[prev] = agree_aux(&out[prev], r.person);
                        } else if let Some(Piece::Word { text, trail: wt }) = next {
                            if trail.is_empty() {
                                let verb = self.agree_verb(text, r.person);
                                out.push(format!("{verb}{wt}"));
                                i += 2;
                                continue;
                            }
                        }
                    }
                }
            }
            i += 1;
        }

        let mut text = out.join(" ");
        if !text.ends_with(['.', '!', '?']) {
            text.push('.');
        }
        let text = capitalize(&text);
        if text.contains('#') || text.contains('{') || text.contains("<V:") || text.contains("<Q:") || text.contains("<NEG:") {
            return Err(LexError::Leak(text));
        }
        Ok((text, mentioned))
    }

    fn referent(
        &self,
        slot: Slot,
        bindings: &Bindings,
        ctx: &RealizationContext,
        graph: &KnowledgeGraph,
        mentioned: &[String],
    ) -> Result<Referent, LexError> {
        let filler = bindings.get(slot).ok_or(LexError::Unbound(slot))?;
        let plain = |s: String, person: Person| Referent {
            forms: [s.clone(), s.clone(), possessive_of(&s)],
            person,
            entity: None,
            quantity: None,
        };
        Ok(match filler {
            Filler::Str(s) => plain(s.clone(), Person::ThirdSingular),
            Filler::Int(n) => Referent {
                quantity: Some(*n),
                ..plain(if *n == 0 { "zero".into() } else { number_word(*n) }, Person::ThirdSingular)
            },
            Filler::Entity(id) if *id == ctx.bot_entity => Referent {
                forms: ["I".into(), "me".into(), "my".into()],
                person: Person::First,
                entity: Some(id.clone()),
                quantity: None,
            },
            Filler::Entity(id) if *id == ctx.user_entity => Referent {
                forms: ["you".into(), "you".into(), "your".into()],
                person: Person::Second,
                entity: Some(id.clone()),
                quantity: None,
            },
            Filler::Entity(id) => {
                let e = graph
                    .entity(id)
                    .ok_or_else(|| LexError::UnknownEntity(id.clone()))?;
                let forms = |case| pronoun(e.gender, e.grammatical_number, case);
                if repeat_mention(id, mentioned, graph) {
                    Referent {
                        forms: [Case::Subject, Case::Object, Case::Possessive].map(|c| forms(c).to_string()),
                        person: pronoun_person(e.gender, e.grammatical_number),
                        entity: Some(id.clone()),
                        quantity: None,
                    }
                } else {
                    let person = match e.grammatical_number {
                        GrammaticalNumber::Plural => Person::ThirdPlural,
                        GrammaticalNumber::Singular => Person::ThirdSingular,
                    };
                    Referent {
                        entity: Some(id.clone()),
                        ..plain(e.canonical_name.clone(), person)
                    }
                }
            }
        })
    }

    /// Verb directly after a subject, re-agreed with the subject's person.
    fn agree_verb(&self, word: &str, person: Person) -> String {
        let lower = word.to_lowercase();
        if BE.contains(&lower.as_str()) {
            let tense = if lower == "was" || lower == "were" { Tense::Past } else { Tense::Present };
            return morph::be_form(tense, person).to_string();
        }
        match lower.as_str() {
            "has" | "have" => return morph::present_form("have", person),
            "does" | "do" => return morph::present_form("do", person),
            _ => {}
        }
        let verb_like = lower.len() > 2
            && lower.ends_with('s')
            && !lower.ends_with("ss")
            && lower.chars().all(|c| c.is_ascii_lowercase())
            && !NOT_VERBS.contains(&lower.as_str());
        if verb_like && person != Person::ThirdSingular {
            self.lexicon.base_of(&lower)
        } else {
            word.to_string()
        }
    }
}

fn note_mention(mentioned: &mut Vec<String>, r: &Referent) {
    if let Some(id) = &r.entity {
        mentioned.retain(|m| m != id);
        mentioned.push(id.clone());
    }
}

/// A repeat mention is pronominalized only if no entity named since then shares its pronoun.
fn repeat_mention(id: &str, mentioned: &[String], graph: &KnowledgeGraph) -> bool {
    let Some(pos) = mentioned.iter().position(|m| m == id) else {
        return false;
    };
    let Some(e) = graph.entity(id) else {
        return false;
    };
    let mine = pronoun(e.gender, e.grammatical_number, Case::Subject);
    !mentioned[pos + 1..].iter().any(|other| {
        graph
            .entity(other)
            .is_some_and(|o| pronoun(o.gender, o.grammatical_number, Case::Subject) == mine)
    })
}

fn agree_aux(aux: &str, person: Person) -> String {
    let lower = aux.to_lowercase();
    let fixed = match lower.as_str() {
        "is" | "am" | "are" => morph::be_form(Tense::Present, person).to_string(),
        "was" | "were" => morph::be_form(Tense::Past, person).to_string(),
        "do" | "does" => morph::present_form("do", person),
        "has" | "have" => morph::present_form("have", person),
        _ => lower.clone(),
    };
    if aux.starts_with(|c: char| c.is_uppercase()) {
        capitalize(&fixed)
    } else {
        fixed
    }
}

fn possessive_of(name: &str) -> String {
    if name.ends_with('s') {
        format!("{name}'")
    } else {
        format!("{name}'s")
    }
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
