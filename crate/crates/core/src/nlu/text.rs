//! Tokenization shared by the analyzers and the pattern compiler.

use serde::{Deserialize, Serialize};

/// A normalized token and the character span of the source word it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Words whose `'s` contraction is "is" rather than a possessive.
pub(crate) const IS_CONTRACTIONS: &[&str] = &[
    "it", "that", "what", "who", "where", "when", "why", "how", "he", "she", "there", "here",
];

const EDGE_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '"', '(', ')'];

/// Whitespace-separated words with their character spans.
pub fn words(text: &str) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut count = 0;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((text.chars().skip(s).take(i - s).collect(), s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
        count = i + 1;
    }
    if let Some(s) = start {
        out.push((text.chars().skip(s).take(count - s).collect(), s, count));
    }
    out
}

/// Lowercases and splits contractions and possessives into separate tokens.
///
/// Template syntax is flattened too (`<V:like>` becomes `like`, `<Q:have> #DOM#`
/// becomes `do #dom# have`) so that delexicalized patterns can be analyzed as input.
pub fn expand(text: &str) -> Vec<Token> {
    let mut out: Vec<Token> = Vec::new();
    let mut pending_verb: Option<String> = None;
    for (word, start, end) in words(text) {
        let lower = word.to_lowercase();
        let core = lower.trim_matches(EDGE_PUNCT);
        if core.is_empty() {
            continue;
        }
        let tok = |t: &str| Token {
            text: t.to_string(),
            start,
            end,
        };
        // a question verb goes right after the subject word that follows its marker
        let carried = pending_verb.take();
        let marker = core
            .strip_prefix('<')
            .and_then(|inner| inner.split_once('>'))
            .and_then(|(m, _)| m.split_once(':'));
        match marker {
            Some(("v", verb)) => out.push(tok(verb)),
            Some(("neg", verb)) => out.extend([tok("do"), tok("not"), tok(verb)]),
            Some(("q", verb)) => {
                out.push(tok("do"));
                pending_verb = Some(verb.to_string());
            }
            _ => push_word(core, &tok, &mut out),
        }
        if let Some(verb) = carried {
            // keep a possessive or contraction tail attached to its word
            let at = out
                .iter()
                .rposition(|t| t.start == start && t.text != "'s")
                .map_or(out.len(), |i| i + 1);
            out.insert(at, tok(&verb));
        }
    }
    if let Some(verb) = pending_verb {
        let (start, end) = out.last().map(|t| (t.start, t.end)).unwrap_or((0, 0));
        out.push(Token { text: verb, start, end });
    }
    out
}

fn push_word(core: &str, tok: &dyn Fn(&str) -> Token, out: &mut Vec<Token>) {
    let placeholder = |w: &str| match w {
        "#domain#" => "#dom#".to_string(),
        "#range#" => "#ran#".to_string(),
        other => other.to_string(),
    };
    if let Some(stem) = core.strip_suffix("n't") {
        let aux = match stem {
            "ca" => "can",
            "wo" => "will",
            "sha" => "shall",
            other => other,
        };
        out.push(tok(aux));
        out.push(tok("not"));
        return;
    }
    for (suffix, full) in [("'m", "am"), ("'re", "are"), ("'ve", "have"), ("'ll", "will"), ("'d", "would")] {
        if let Some(stem) = core.strip_suffix(suffix) {
            if !stem.is_empty() {
                out.push(tok(stem));
                out.push(tok(full));
                return;
            }
        }
    }
    if let Some(stem) = core.strip_suffix("'s") {
        if !stem.is_empty() {
            if IS_CONTRACTIONS.contains(&stem) {
                out.push(tok(stem));
                out.push(tok("is"));
            } else {
                out.push(tok(&placeholder(stem)));
                out.push(tok("'s"));
            }
            return;
        }
    }
    if let Some(stem) = core.strip_suffix('\'') {
        if stem.ends_with('s') && stem.len() > 1 {
            out.push(tok(stem));
            out.push(tok("'s"));
            return;
        }
    }
    out.push(tok(&placeholder(core)));
}
