use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::dialogue_act::DialogueAct;
use crate::lexicalizer::Lexicon;

use super::text::expand;
use super::NluError;

/// Word lists driving the rule-based analyzers.
#[derive(Debug, Clone, Default)]
pub struct RuleTables {
    pub question_cues: HashSet<String>,
    /// Coordinating words that may join two clauses.
    pub conjunctions: HashSet<String>,
    /// Words that open a clause of their own.
    pub clause_openers: HashSet<String>,
    /// Words that close a clause of their own.
    pub clause_closers: HashSet<String>,
    pub irregular_past: HashSet<String>,
    pub verbs: HashSet<String>,
    /// Closed-class act phrases, already tokenized.
    pub act_phrases: Vec<(DialogueAct, Vec<String>)>,
    pub lexicon: Lexicon,
}

pub(crate) const WH_WORDS: &[&str] = &["who", "what", "when", "where", "why", "how", "which"];
const AUXILIARIES: &[&str] = &[
    "is", "am", "are", "was", "were", "be", "been", "being", "do", "does", "did", "have", "has",
    "had", "will", "would", "can", "could", "should", "shall", "may", "might", "must",
];
/// Words ending in -ed that are rarely verbs.
const NOT_PAST: &[&str] = &["need", "feed", "seed", "indeed", "speed", "bored", "tired", "interested", "excited"];

fn read_list(dir: &Path, name: &str) -> Result<Vec<(usize, String)>, NluError> {
    let path = dir.join(name);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => {
            return Err(NluError::Io {
                path: path.display().to_string(),
                source: e,
            })
        }
    };
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

impl RuleTables {
    /// Loads the rule files from a data directory; missing files give empty tables.
    pub fn load(dir: &Path) -> Result<Self, NluError> {
        let mut rules = RuleTables {
            lexicon: Lexicon::load(dir).map_err(|e| NluError::Rules {
                file: "irregular tables".into(),
                line: 0,
                message: e.to_string(),
            })?,
            ..Default::default()
        };
        for (_, w) in read_list(dir, "question_cues.txt")? {
            rules.question_cues.insert(w.to_lowercase());
        }
        for (_, w) in read_list(dir, "split_cues.txt")? {
            let w = w.to_lowercase();
            if let Some(open) = w.strip_prefix('^') {
                rules.clause_openers.insert(open.to_string());
            } else if let Some(close) = w.strip_suffix('$') {
                rules.clause_closers.insert(close.to_string());
            } else {
                rules.conjunctions.insert(w);
            }
        }
        for (_, w) in read_list(dir, "irregular_past.txt")? {
            rules.irregular_past.insert(w.to_lowercase());
        }
        for (_, w) in read_list(dir, "verbs.txt")? {
            rules.verbs.insert(w.to_lowercase());
        }
        let bases: Vec<String> = rules.lexicon.irregular_bases().map(str::to_string).collect();
        rules.verbs.extend(bases);
        for (line, entry) in read_list(dir, "da_lexicon.tsv")? {
            let bad = |message: String| NluError::Rules {
                file: "da_lexicon.tsv".into(),
                line,
                message,
            };
            let (class, phrase) = entry
                .split_once('\t')
                .ok_or_else(|| bad("expected class<TAB>phrase".into()))?;
            let act: DialogueAct = class.trim().parse().map_err(|e| bad(format!("{e}")))?;
            let tokens: Vec<String> = expand(phrase.trim()).into_iter().map(|t| t.text).collect();
            if tokens.is_empty() {
                return Err(bad("empty phrase".into()));
            }
            rules.act_phrases.push((act, tokens));
        }
        Ok(rules)
    }

    pub fn is_question_cue(&self, word: &str) -> bool {
        let w = word.strip_suffix("'s").unwrap_or(word);
        self.question_cues.contains(w)
    }

    pub fn is_past(&self, word: &str) -> bool {
        matches!(word, "was" | "were" | "did")
            || self.irregular_past.contains(word)
            || (word.len() >= 4 && word.ends_with("ed") && !NOT_PAST.contains(&word))
    }

    /// Whether a raw (unexpanded) word can be the verb of a clause.
    pub fn is_verb_candidate(&self, word: &str) -> bool {
        let w = word.to_lowercase();
        if AUXILIARIES.contains(&w.as_str()) {
            return true;
        }
        for suffix in ["'m", "'re", "'ve", "'ll", "'d", "n't"] {
            if w.ends_with(suffix) {
                return true;
            }
        }
        if let Some(base) = w.strip_suffix("'s") {
            return super::text::IS_CONTRACTIONS.contains(&base);
        }
        if self.irregular_past.contains(&w) || self.verbs.contains(&w) {
            return true;
        }
        if self.verbs.contains(&self.lexicon.base_of(&w)) {
            return true;
        }
        (w.len() > 4 && w.ends_with("ing")) || self.is_past(&w)
    }
}
