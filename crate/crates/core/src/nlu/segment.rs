//! Rule-based punctuation restoration and segmentation.

use serde::{Deserialize, Serialize};

use super::rules::{RuleTables, WH_WORDS};
use super::Hypothesis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Punct {
    None,
    Comma,
    Period,
    Question,
}

/// How a segment ends. Commas never end a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Terminal {
    Period,
    Question,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub hypothesis_index: usize,
    pub segment_index: usize,
    pub text: String,
    pub terminal: Terminal,
}

const NOT_TAGGED: &[&str] = &["that's", "all", "is", "thats", "alright"];

/// Predicts the punctuation mark after every token.
pub fn restore_punctuation<S: AsRef<str>>(tokens: &[S], rules: &RuleTables) -> Vec<(String, Punct)> {
    let words: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let n = words.len();
    let mut out: Vec<(String, Punct)> = tokens
        .iter()
        .map(|t| (t.as_ref().to_string(), Punct::None))
        .collect();
    if n == 0 {
        return out;
    }

    // boundaries[j]: a clause starts at token j
    let mut starts = vec![0usize];
    let mut clause_start = 0;
    for j in 1..n {
        let w = words[j].as_str();
        let prev = words[j - 1].as_str();
        let left_has_verb = words[clause_start..j].iter().any(|x| rules.is_verb_candidate(x));
        let split = rules.clause_closers.contains(prev)
            || rules.clause_openers.contains(w)
            || (rules.conjunctions.contains(w) && left_has_verb && {
                let end = (j + 1..n)
                    .find(|&k| rules.conjunctions.contains(&words[k]) || rules.clause_openers.contains(&words[k]))
                    .unwrap_or(n);
                words[j + 1..end].iter().any(|x| rules.is_verb_candidate(x))
            })
            || (left_has_verb && wh_opens_question(&words, j, rules));
        if split {
            starts.push(j);
            clause_start = j;
        }
    }
    starts.push(n);

    for pair in starts.windows(2) {
        let (s, e) = (pair[0], pair[1]);
        let clause = &words[s..e];
        let mut first = 0;
        if clause.len() > 1 && rules.conjunctions.contains(&clause[0]) {
            first = 1;
        }
        let tagged = clause.len() > 1 && clause[clause.len() - 1] == "right" && !NOT_TAGGED.contains(&clause[clause.len() - 2].as_str());
        let question = rules.is_question_cue(&clause[first]) || tagged;
        if tagged {
            out[e - 2].1 = Punct::Comma;
        }
        out[e - 1].1 = if question { Punct::Question } else { Punct::Period };
    }
    out
}

/// A wh-word in mid utterance opens a new question when a verb follows it.
fn wh_opens_question(words: &[String], j: usize, rules: &RuleTables) -> bool {
    let w = words[j].as_str();
    if let Some(base) = w.strip_suffix("'s") {
        return WH_WORDS.contains(&base);
    }
    if !WH_WORDS.contains(&w) {
        return false;
    }
    match words.get(j + 1) {
        Some(next) => matches!(next.as_str(), "many" | "much" | "about") || rules.is_verb_candidate(next),
        None => false,
    }
}

/// Splits a hypothesis at restored sentence-final punctuation.
pub fn segment(hypothesis: &Hypothesis, hypothesis_index: usize, rules: &RuleTables) -> Vec<Segment> {
    let tokens: Vec<&str> = hypothesis.text.split_whitespace().collect();
    let marked = restore_punctuation(&tokens, rules);
    let mut segments = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for (word, punct) in &marked {
        current.push(word);
        let terminal = match punct {
            Punct::Period => Terminal::Period,
            Punct::Question => Terminal::Question,
            Punct::None | Punct::Comma => continue,
        };
        segments.push(Segment {
            hypothesis_index,
            segment_index: segments.len(),
            text: current.join(" "),
            terminal,
        });
        current.clear();
    }
    segments
}
