use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::model::{Candidate, CandidateSource};
use super::KgError;

/// Resolution backend for names that are not in the private graph.
pub trait GeneralResolver: Send + Sync {
    fn resolve(&self, surface: &str) -> Vec<Candidate>;

    /// Surface forms worth scanning for in text; backends without a lexicon return none.
    fn surfaces(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Resolver that knows nothing.
#[derive(Debug, Default)]
pub struct NoGeneralResolver;

impl GeneralResolver for NoGeneralResolver {
    fn resolve(&self, _surface: &str) -> Vec<Candidate> {
        Vec::new()
    }
}

/// Fixture-backed general lexicon: `general.jsonl` lines `{"surface","id","score"}`.
#[derive(Debug, Default)]
pub struct LexiconResolver {
    entries: BTreeMap<String, Vec<(String, f64)>>,
}

#[derive(Deserialize)]
struct LexiconLine {
    surface: String,
    id: String,
    #[serde(default = "default_score")]
    score: f64,
}

fn default_score() -> f64 {
    0.8
}

impl LexiconResolver {
    pub fn load(path: &Path) -> Result<Self, KgError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::default()),
            Err(e) => return Err(KgError::io(path, e)),
        };
        let mut entries: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: LexiconLine = serde_json::from_str(line).map_err(|e| KgError::Parse {
                file: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
            entries
                .entry(rec.surface.to_lowercase())
                .or_default()
                .push((rec.id, rec.score.clamp(f64::MIN_POSITIVE, 1.0)));
        }
        Ok(LexiconResolver { entries })
    }
}

impl GeneralResolver for LexiconResolver {
    fn surfaces(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    fn resolve(&self, surface: &str) -> Vec<Candidate> {
        self.entries
            .get(surface)
            .map(|hits| {
                hits.iter()
                    .map(|(id, score)| Candidate {
                        entity_id: id.clone(),
                        score: *score,
                        source: CandidateSource::General,
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Longest common contiguous token run, normalized by the longer token count.
pub fn fuzzy_score(surface: &str, name: &str) -> f64 {
    let a: Vec<&str> = surface.split_whitespace().collect();
    let b: Vec<&str> = name.split_whitespace().collect();
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut best = 0usize;
    let mut prev = vec![0usize; b.len() + 1];
    for x in &a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            if x == y {
                cur[j + 1] = prev[j] + 1;
                best = best.max(cur[j + 1]);
            }
        }
        prev = cur;
    }
    best as f64 / a.len().max(b.len()) as f64
}
