//! English morphology needed by the templates: plurals, number words and verb forms.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::kg::Tense;

use super::LexError;

/// Grammatical person and number of a subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Person {
    First,
    Second,
    ThirdSingular,
    ThirdPlural,
}

const NUMBER_WORDS: [&str; 21] = [
    "no", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
    "twenty",
];

/// Rendering of a quantity in front of a noun: words up to twenty, "no" for zero.
pub fn number_word(n: i64) -> String {
    match usize::try_from(n) {
        Ok(i) if i < NUMBER_WORDS.len() => NUMBER_WORDS[i].to_string(),
        _ => n.to_string(),
    }
}

/// Parses a cardinal written as digits or as a number word (zero to twenty).
pub fn parse_number(word: &str) -> Option<i64> {
    let w = word.to_lowercase();
    if let Ok(n) = w.parse::<i64>() {
        return Some(n);
    }
    if w == "zero" || w == "none" {
        return Some(0);
    }
    NUMBER_WORDS
        .iter()
        .skip(1)
        .position(|x| *x == w)
        .map(|i| i as i64 + 1)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn ends_consonant_y(word: &str) -> bool {
    let mut rev = word.chars().rev();
    rev.next() == Some('y') && rev.next().is_some_and(|c| !is_vowel(c))
}

fn sibilant(word: &str) -> bool {
    ["s", "x", "z", "ch", "sh"].iter().any(|e| word.ends_with(e))
}

/// Irregular plural and past-tense tables.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    plurals: HashMap<String, String>,
    singulars: HashMap<String, String>,
    past: HashMap<String, String>,
    past_bases: HashMap<String, String>,
}

impl Lexicon {
    /// Reads `irregular_plurals.txt` and `irregular_verbs.txt`; missing files mean empty tables.
    pub fn load(dir: &Path) -> Result<Self, LexError> {
        let read = |name: &str| -> Result<String, LexError> {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(text) => Ok(text),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
                Err(e) => Err(LexError::Io {
                    path: path.display().to_string(),
                    source: e,
                }),
            }
        };
        Self::from_tables(&read("irregular_plurals.txt")?, &read("irregular_verbs.txt")?)
    }

    pub fn from_tables(plurals: &str, verbs: &str) -> Result<Self, LexError> {
        let mut lex = Lexicon::default();
        for (a, b) in table(plurals, "irregular_plurals.txt")? {
            lex.singulars.insert(b.clone(), a.clone());
            lex.plurals.insert(a, b);
        }
        for (a, b) in table(verbs, "irregular_verbs.txt")? {
            lex.past_bases.entry(b.clone()).or_insert_with(|| a.clone());
            lex.past.insert(a, b);
        }
        // "were" is the other past of "be"
        lex.past_bases.insert("were".into(), "be".into());
        Ok(lex)
    }

    pub fn plural(&self, noun: &str) -> String {
        let lower = noun.to_lowercase();
        if let Some(p) = self.plurals.get(&lower) {
            return p.clone();
        }
        if ends_consonant_y(&lower) {
            format!("{}ies", &noun[..noun.len() - 1])
        } else if sibilant(&lower) {
            format!("{noun}es")
        } else {
            format!("{noun}s")
        }
    }

    /// Singular form when `word` looks like a plural noun, for matching.
    pub fn singular(&self, word: &str) -> Option<String> {
        if let Some(s) = self.singulars.get(word) {
            return Some(s.clone());
        }
        if let Some(stem) = word.strip_suffix("ies") {
            if !stem.is_empty() {
                return Some(format!("{stem}y"));
            }
        }
        for end in ["ses", "xes", "zes", "ches", "shes"] {
            if word.ends_with(end) {
                return Some(word[..word.len() - 2].to_string());
            }
        }
        match word.strip_suffix('s') {
            Some(stem) if stem.len() > 1 && !stem.ends_with('s') => Some(stem.to_string()),
            _ => None,
        }
    }

    /// Quantity phrase with the head (last word) of `noun` pluralized unless the quantity is one.
    pub fn pluralize_phrase(&self, noun: &str, quantity: i64) -> String {
        let noun = if quantity == 1 {
            noun.to_string()
        } else {
            match noun.rsplit_once(' ') {
                Some((head, last)) => format!("{head} {}", self.plural(last)),
                None => self.plural(noun),
            }
        };
        format!("{} {noun}", number_word(quantity))
    }

    pub fn past_of(&self, verb: &str) -> String {
        if let Some(p) = self.past.get(verb) {
            return p.clone();
        }
        if verb.ends_with('e') {
            format!("{verb}d")
        } else if ends_consonant_y(verb) {
            format!("{}ied", &verb[..verb.len() - 1])
        } else {
            format!("{verb}ed")
        }
    }

    pub fn irregular_bases(&self) -> impl Iterator<Item = &str> {
        self.past.keys().map(String::as_str)
    }

    /// Whether `word` is an irregular past form (`went`, `was`, ...).
    pub fn is_irregular_past(&self, word: &str) -> bool {
        self.past_bases.contains_key(word)
    }

    /// Base form of an inflected verb (`loves` → `love`, `went` → `go`).
    pub fn base_of(&self, word: &str) -> String {
        match word {
            "is" | "am" | "are" | "was" | "were" => return "be".into(),
            "has" => return "have".into(),
            "does" => return "do".into(),
            _ => {}
        }
        if let Some(b) = self.past_bases.get(word) {
            return b.clone();
        }
        deinflect_third(word)
    }

    /// Finite form of `verb` (the first word of a multi-word verb) for the tense and subject.
    pub fn retense(&self, verb: &str, tense: Tense, person: Person) -> String {
        let (head, rest) = split_head(verb);
        let form = match tense {
            Tense::Future => format!("will {head}"),
            Tense::Past => match head {
                "be" => be_form(Tense::Past, person).to_string(),
                _ => self.past_of(head),
            },
            Tense::Present => present_form(head, person),
        };
        join(form, rest)
    }

    /// Question frame: auxiliary, subject, then the bare verb (`did you study`).
    pub fn interrogative(&self, verb: &str, tense: Tense, person: Person, subject: &str) -> String {
        let (head, rest) = split_head(verb);
        let frame = match (head, tense) {
            ("be", Tense::Future) => format!("will {subject} be"),
            ("be", t) => format!("{} {subject}", be_form(t, person)),
            (_, Tense::Future) => format!("will {subject} {head}"),
            (_, Tense::Past) => format!("did {subject} {head}"),
            (_, Tense::Present) => format!("{} {subject} {head}", present_form("do", person)),
        };
        join(frame, rest)
    }

    /// Negated finite form (`don't have`, `wasn't`).
    pub fn negative(&self, verb: &str, tense: Tense, person: Person) -> String {
        let (head, rest) = split_head(verb);
        let form = match (head, tense) {
            (_, Tense::Future) => format!("won't {head}"),
            ("be", Tense::Past) => format!("{}n't", be_form(Tense::Past, person)),
            ("be", Tense::Present) if person == Person::First => "am not".to_string(),
            ("be", Tense::Present) => format!("{}n't", be_form(Tense::Present, person)),
            (_, Tense::Past) => format!("didn't {head}"),
            (_, Tense::Present) => format!("{}n't {head}", present_form("do", person)),
        };
        join(form, rest)
    }
}

fn table(text: &str, name: &str) -> Result<Vec<(String, String)>, LexError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
                out.push((a.trim().to_lowercase(), b.trim().to_lowercase()))
            }
            _ => {
                return Err(LexError::Table {
                    file: name.to_string(),
                    line: idx + 1,
                })
            }
        }
    }
    Ok(out)
}

fn split_head(verb: &str) -> (&str, &str) {
    verb.split_once(' ').unwrap_or((verb, ""))
}

fn join(head: String, rest: &str) -> String {
    if rest.is_empty() {
        head
    } else {
        format!("{head} {rest}")
    }
}

pub(crate) fn be_form(tense: Tense, person: Person) -> &'static str {
    match (tense, person) {
        (Tense::Past, Person::First | Person::ThirdSingular) => "was",
        (Tense::Past, _) => "were",
        (_, Person::First) => "am",
        (_, Person::ThirdSingular) => "is",
        _ => "are",
    }
}

pub(crate) fn present_form(verb: &str, person: Person) -> String {
    if verb == "be" {
        return be_form(Tense::Present, person).to_string();
    }
    if person != Person::ThirdSingular {
        return verb.to_string();
    }
    match verb {
        "have" => "has".to_string(),
        "do" => "does".to_string(),
        "go" => "goes".to_string(),
        _ if ends_consonant_y(verb) => format!("{}ies", &verb[..verb.len() - 1]),
        _ if sibilant(verb) => format!("{verb}es"),
        _ => format!("{verb}s"),
    }
}

fn deinflect_third(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for end in ["sses", "xes", "zes", "ches", "shes", "oes"] {
        if word.ends_with(end) {
            return word[..word.len() - 2].to_string();
        }
    }
    word.strip_suffix('s').unwrap_or(word).to_string()
}
