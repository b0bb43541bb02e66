//! Matching segments against delexicalized sentence patterns.
//!
//! Pattern elements must all match in order; segment tokens between them may
//! be skipped. A placeholder binds a participant pronoun, a linked mention, a
//! number, a literal placeholder token or a short free span. The score is the
//! share of segment tokens covered by the match.

use serde::{Deserialize, Serialize};

use crate::bindings::Slot;
use crate::dialogue_act::DialogueAct;
use crate::lexicalizer::{parse_number, Lexicon};

use super::rules::RuleTables;
use super::text::{expand, words, Token};

/// Conversation participant referred to by a pronoun.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Elem {
    Lit(String),
    Verb(String),
    AuxDo,
    Slot { slot: Slot, possessive: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledPattern {
    pub source: String,
    pub act: DialogueAct,
    pub property_id: Option<String>,
    elems: Vec<Elem>,
}

/// Where a placeholder landed in the segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpan {
    /// Character offsets into the segment text.
    pub start: usize,
    pub end: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternMatch {
    pub coverage: f64,
    pub dom: Option<SlotSpan>,
    pub ran: Option<SlotSpan>,
}

const SUBJECT_ROLES: &[(&str, Role)] = &[
    ("i", Role::User),
    ("me", Role::User),
    ("myself", Role::User),
    ("you", Role::Bot),
    ("yourself", Role::Bot),
];
const POSSESSIVE_ROLES: &[(&str, Role)] = &[("my", Role::User), ("your", Role::Bot)];
const CLOSED: &[&str] = &[
    "i", "me", "my", "you", "your", "he", "she", "it", "we", "they", "him", "her", "us", "them",
    "his", "its", "their", "our", "not", "'s", "a", "an", "the", "to", "of", "in", "at", "on",
    "right", "yes", "no", "really", "very", "also", "too",
];
const MAX_FREE: usize = 3;

fn role_of(word: &str, table: &[(&str, Role)]) -> Option<Role> {
    table.iter().find(|(w, _)| *w == word).map(|(_, r)| *r)
}

fn is_placeholder(word: &str) -> bool {
    word == "#dom#" || word == "#ran#"
}

impl CompiledPattern {
    pub fn compile(source: &str, act: DialogueAct, property_id: Option<String>) -> Self {
        let mut elems = Vec::new();
        let mut pending_verb: Option<String> = None;
        for (word, _, _) in words(source) {
            let carried = pending_verb.take();
            let core = word.trim_end_matches(['.', ',', '!', '?', ';', ':']);
            let marker = core
                .strip_prefix('<')
                .and_then(|inner| inner.split_once('>'))
                .and_then(|(m, _)| m.split_once(':'));
            let slot = [("#DOM#", Slot::Dom), ("#RAN#", Slot::Ran), ("#DOMAIN#", Slot::Dom), ("#RANGE#", Slot::Ran)]
                .into_iter()
                .find_map(|(tag, slot)| core.strip_prefix(tag).map(|rest| (slot, rest)));
            match (marker, slot) {
                (Some(("V", verb)), _) => elems.push(Elem::Verb(verb.to_lowercase())),
                (Some(("NEG", verb)), _) => {
                    elems.extend([Elem::AuxDo, Elem::Lit("not".into()), Elem::Verb(verb.to_lowercase())])
                }
                (Some(("Q", verb)), _) => {
                    elems.push(Elem::AuxDo);
                    pending_verb = Some(verb.to_lowercase());
                }
                (_, Some((slot, rest))) => elems.push(Elem::Slot {
                    slot,
                    possessive: rest.starts_with("'s"),
                }),
                _ => elems.extend(expand(core).into_iter().map(|t| match t.text.as_str() {
                    "do" | "does" | "did" => Elem::AuxDo,
                    _ => Elem::Lit(t.text),
                })),
            }
            if let Some(verb) = carried {
                elems.push(Elem::Verb(verb));
            }
        }
        if let Some(verb) = pending_verb {
            elems.push(Elem::Verb(verb));
        }
        CompiledPattern {
            source: source.to_string(),
            act,
            property_id,
            elems,
        }
    }

    /// Appends a tag word, used for tag-question variants of statements.
    pub fn with_tag(mut self, tag: &str, act: DialogueAct) -> Self {
        self.elems.push(Elem::Lit(tag.to_string()));
        self.source = format!("{} {tag}", self.source.trim_end_matches(['.', '!']));
        self.act = act;
        self
    }

    pub fn match_segment(&self, seg: &AnalyzedText, rules: &RuleTables) -> Option<PatternMatch> {
        let n = seg.tokens.len();
        let denom = n - seg.skip_leading;
        if denom == 0 {
            return None;
        }
        let m = self.elems.len();
        let mut memo: Vec<Option<Option<Best>>> = vec![None; (m + 1) * (n + 1)];
        let best = self.best(0, seg.skip_leading, seg, rules, &mut memo)?;
        let mut out = PatternMatch {
            coverage: best.covered as f64 / denom as f64,
            dom: None,
            ran: None,
        };
        for b in best.bindings {
            let span = seg.span(b.from, b.to, b.role);
            match b.slot {
                Slot::Dom => out.dom = Some(span),
                Slot::Ran => out.ran = Some(span),
            }
        }
        Some(out)
    }

    fn best(&self, e: usize, t: usize, seg: &AnalyzedText, rules: &RuleTables, memo: &mut Vec<Option<Option<Best>>>) -> Option<Best> {
        let n = seg.tokens.len();
        let key = e * (n + 1) + t;
        if let Some(hit) = &memo[key] {
            return hit.clone();
        }
        let result = if e == self.elems.len() {
            Some(Best::default())
        } else {
            let mut best: Option<Best> = None;
            if t < n {
                best = self.best(e, t + 1, seg, rules, memo);
            }
            for opt in self.options(e, t, seg, rules) {
                if let Some(mut rest) = self.best(e + 1, t + opt.len, seg, rules, memo) {
                    rest.covered += opt.len;
                    rest.anchored += opt.anchored;
                    if let Some(binding) = opt.binding {
                        rest.bindings.push(binding);
                    }
                    if best.as_ref().is_none_or(|b| rest.beats(b)) {
                        best = Some(rest);
                    }
                }
            }
            best
        };
        memo[key] = Some(result.clone());
        result
    }

    fn options(&self, e: usize, t: usize, seg: &AnalyzedText, rules: &RuleTables) -> Vec<Consume> {
        let n = seg.tokens.len();
        if t >= n {
            return Vec::new();
        }
        let word = seg.tokens[t].text.as_str();
        let lex = &rules.lexicon;
        match &self.elems[e] {
            Elem::Lit(lit) => {
                if lit_matches(lit, word, lex) {
                    vec![Consume::plain(1)]
                } else {
                    Vec::new()
                }
            }
            Elem::AuxDo => {
                if matches!(word, "do" | "does" | "did" | "will") {
                    vec![Consume::plain(1)]
                } else {
                    Vec::new()
                }
            }
            Elem::Verb(base) => {
                if verb_matches(base, word, lex) {
                    vec![Consume::plain(1)]
                } else {
                    Vec::new()
                }
            }
            Elem::Slot { slot, possessive } => {
                let mut out = Vec::new();
                if *possessive {
                    if let Some(role) = role_of(word, POSSESSIVE_ROLES) {
                        out.push(Consume::bound(*slot, t, 1, 2, Some(role)));
                    }
                    for base in self.slot_fillers(t, seg, rules) {
                        if seg.tokens.get(t + base.0).is_some_and(|x| x.text == "'s") {
                            out.push(Consume::bound(*slot, t, base.0 + 1, base.1, None).with_span(base.0));
                        }
                    }
                } else {
                    if let Some(role) = role_of(word, SUBJECT_ROLES) {
                        out.push(Consume::bound(*slot, t, 1, 2, Some(role)));
                    }
                    for (len, anchored) in self.slot_fillers(t, seg, rules) {
                        out.push(Consume::bound(*slot, t, len, anchored, None));
                    }
                }
                out
            }
        }
    }

    /// Non-pronoun fillers starting at `t`: (token count, anchoring weight).
    fn slot_fillers(&self, t: usize, seg: &AnalyzedText, rules: &RuleTables) -> Vec<(usize, usize)> {
        let word = seg.tokens[t].text.as_str();
        let mut out = Vec::new();
        if is_placeholder(word) || parse_number(word).is_some() {
            out.push((1, 2));
        }
        if let Some(end) = seg.mention_end[t] {
            out.push((end - t, 2 * (end - t)));
        }
        for len in 1..=MAX_FREE {
            let Some(last) = seg.tokens.get(t + len - 1) else { break };
            if !free_word(&last.text, rules) || seg.inside_mention(t, t + len) {
                break;
            }
            out.push((len, 0));
        }
        out
    }
}

fn free_word(word: &str, rules: &RuleTables) -> bool {
    !CLOSED.contains(&word)
        && !is_placeholder(word)
        && !rules.question_cues.contains(word)
        && !rules.conjunctions.contains(word)
        && !rules.is_verb_candidate(word)
}

fn lit_matches(lit: &str, word: &str, lex: &Lexicon) -> bool {
    if lit == word {
        return true;
    }
    let classes: [&[&str]; 4] = [&["is", "am", "are"], &["was", "were"], &["have", "has"], &["do", "does", "did"]];
    if classes.iter().any(|c| c.contains(&lit) && c.contains(&word)) {
        return true;
    }
    lex.singular(word).as_deref() == Some(lit) || lex.singular(lit).as_deref() == Some(word)
}

fn verb_matches(base: &str, word: &str, lex: &Lexicon) -> bool {
    word == base || lex.base_of(word) == base || lex.past_of(base) == word
}

#[derive(Debug, Clone, Default)]
struct Best {
    covered: usize,
    anchored: usize,
    bindings: Vec<Binding>,
}

impl Best {
    fn beats(&self, other: &Best) -> bool {
        (self.covered, self.anchored) > (other.covered, other.anchored)
    }
}

#[derive(Debug, Clone)]
struct Binding {
    slot: Slot,
    from: usize,
    to: usize,
    role: Option<Role>,
}

struct Consume {
    len: usize,
    anchored: usize,
    binding: Option<Binding>,
}

impl Consume {
    fn plain(len: usize) -> Self {
        Consume {
            len,
            anchored: 0,
            binding: None,
        }
    }

    fn bound(slot: Slot, t: usize, len: usize, anchored: usize, role: Option<Role>) -> Self {
        Consume {
            len,
            anchored,
            binding: Some(Binding {
                slot,
                from: t,
                to: t + len,
                role,
            }),
        }
    }

    /// Narrows the bound span to the first `len` tokens (drops a trailing `'s`).
    fn with_span(mut self, len: usize) -> Self {
        if let Some(b) = &mut self.binding {
            b.to = b.from + len;
        }
        self
    }
}

/// A segment prepared for matching: tokens plus mention boundaries.
#[derive(Debug, Clone)]
pub struct AnalyzedText {
    pub text: String,
    pub tokens: Vec<Token>,
    /// For each token, the end (exclusive) of a mention starting there.
    pub mention_end: Vec<Option<usize>>,
    /// Leading conjunction excluded from coverage.
    pub skip_leading: usize,
}

impl AnalyzedText {
    pub fn new(text: &str, mention_spans: &[(usize, usize)], rules: &RuleTables) -> Self {
        let tokens = expand(text);
        let mut mention_end = vec![None; tokens.len()];
        for &(start, end) in mention_spans {
            let first = tokens.iter().position(|t| t.start == start);
            let last = tokens.iter().rposition(|t| t.end == end && t.text != "'s");
            if let (Some(f), Some(l)) = (first, last) {
                if f <= l {
                    mention_end[f] = Some(l + 1);
                }
            }
        }
        let skip_leading = usize::from(tokens.len() > 1 && rules.conjunctions.contains(&tokens[0].text));
        AnalyzedText {
            text: text.to_string(),
            tokens,
            mention_end,
            skip_leading,
        }
    }

    fn inside_mention(&self, from: usize, to: usize) -> bool {
        (0..self.tokens.len()).any(|s| self.mention_end[s].is_some_and(|e| s < to && from < e))
    }

    fn span(&self, from: usize, to: usize, role: Option<Role>) -> SlotSpan {
        let first = &self.tokens[from];
        let last = &self.tokens[to - 1];
        // the last source word may expand into more tokens ("tom's", "i'm"); keep only the bound one
        let shared = self.tokens.get(to).is_some_and(|next| next.start == last.start);
        let mut text: String = if shared {
            let head: String = self.text.chars().skip(first.start).take(last.start - first.start).collect();
            format!("{head}{}", last.text)
        } else {
            self.text.chars().skip(first.start).take(last.end - first.start).collect()
        };
        if to - from == 1 && !shared {
            text = last.text.clone();
        }
        SlotSpan {
            start: first.start,
            end: first.start + text.chars().count(),
            text,
            role,
        }
    }
}
