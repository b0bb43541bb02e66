//! On-disk layout for learned knowledge.
//!
//! ```text
//! <store_dir>/users/<user_id>.jsonl     append-only journal of learned triples
//! <store_dir>/popularity.json           popularity snapshot (id -> value)
//! <store_dir>/sessions/<conv_id>.json   dialogue session snapshots
//! ```

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::Triple;
use super::KgError;

/// Journal line: the triple schema plus a record kind.
#[derive(Debug, Serialize, Deserialize)]
struct JournalRecord {
    kind: String,
    #[serde(flatten)]
    triple: Triple,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, KgError> {
        let root = root.into();
        for sub in ["users", "sessions"] {
            fs::create_dir_all(root.join(sub)).map_err(|e| KgError::io(&root, e))?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn user_journal(&self, user_id: &str) -> PathBuf {
        self.root.join("users").join(format!("{}.jsonl", file_safe(user_id)))
    }

    pub fn session_path(&self, conversation_id: &str) -> PathBuf {
        self.root
            .join("sessions")
            .join(format!("{}.json", file_safe(conversation_id)))
    }

    pub fn append_triples(&self, user_id: &str, triples: &[Triple]) -> Result<(), KgError> {
        if triples.is_empty() {
            return Ok(());
        }
        let path = self.user_journal(user_id);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| KgError::io(&path, e))?;
        let mut buf = String::new();
        for triple in triples {
            let record = JournalRecord {
                kind: "triple".into(),
                triple: triple.clone(),
            };
            buf.push_str(&serde_json::to_string(&record).expect("triple serializes"));
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())
            .and_then(|_| file.sync_data())
            .map_err(|e| KgError::io(&path, e))
    }

    /// Reads a user's journal in append order. A missing journal is an empty profile.
    pub fn read_triples(&self, user_id: &str) -> Result<Vec<Triple>, KgError> {
        let path = self.user_journal(user_id);
        let file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(KgError::io(&path, e)),
        };
        let mut out = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| KgError::io(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: JournalRecord = serde_json::from_str(&line).map_err(|e| KgError::Parse {
                file: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
            out.push(record.triple);
        }
        Ok(out)
    }

    /// Replaces the journal with an already-compacted record list.
    pub fn rewrite_triples(&self, user_id: &str, triples: &[Triple]) -> Result<(), KgError> {
        let path = self.user_journal(user_id);
        let tmp = path.with_extension("jsonl.tmp");
        let _ = fs::remove_file(&tmp);
        {
            let mut file = fs::File::create(&tmp).map_err(|e| KgError::io(&tmp, e))?;
            for triple in triples {
                let record = JournalRecord {
                    kind: "triple".into(),
                    triple: triple.clone(),
                };
                writeln!(file, "{}", serde_json::to_string(&record).expect("triple serializes"))
                    .map_err(|e| KgError::io(&tmp, e))?;
            }
            file.sync_all().map_err(|e| KgError::io(&tmp, e))?;
        }
        fs::rename(&tmp, &path).map_err(|e| KgError::io(&path, e))
    }

    pub fn read_popularity(&self) -> Result<BTreeMap<String, f64>, KgError> {
        let path = self.root.join("popularity.json");
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| KgError::Parse {
                file: path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(BTreeMap::new()),
            Err(e) => Err(KgError::io(&path, e)),
        }
    }

    pub fn write_popularity(&self, values: &BTreeMap<String, f64>) -> Result<(), KgError> {
        write_atomic(
            &self.root.join("popularity.json"),
            &serde_json::to_string_pretty(values).expect("map serializes"),
        )
    }

    /// Every user with a journal on disk.
    pub fn users(&self) -> Result<Vec<String>, KgError> {
        let dir = self.root.join("users");
        let mut users = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| KgError::io(&dir, e))? {
            let entry = entry.map_err(|e| KgError::io(&dir, e))?;
            let name = entry.file_name().to_string_lossy().to_string();
            if let Some(user) = name.strip_suffix(".jsonl") {
                users.push(user.to_string());
            }
        }
        users.sort();
        Ok(users)
    }
}

pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<(), KgError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| KgError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| KgError::io(path, e))
}

/// Ids become file names; anything outside `[A-Za-z0-9_-]` is escaped.
fn file_safe(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for c in id.chars() {
        if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
            out.push(c);
        } else {
            out.push_str(&format!("%{:x}", c as u32));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::model::RangeValue;

    #[test]
    fn journal_round_trip_and_missing_user() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(store.read_triples("nobody").unwrap().is_empty());
        let mut t = Triple::learned("u1", "u1", "sibling_count", RangeValue::Int(3));
        t.asserted_at = 7;
        store.append_triples("u1", &[t.clone()]).unwrap();
        assert_eq!(store.read_triples("u1").unwrap(), vec![t]);
        assert_eq!(store.users().unwrap(), vec!["u1".to_string()]);
    }

    #[test]
    fn ids_are_escaped_into_file_names() {
        assert_eq!(file_safe("user42"), "user42");
        assert_eq!(file_safe("../x"), "%2e%2e%2fx");
    }
}
