//! Append-only JSON Lines run journal.
//!
//! One [`RunRecord`] per line. A line that does not parse, including a
//! truncated final line, makes the whole journal corrupt; so does a repeated
//! (instance, model) pair.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::RunRecord;
use crate::{Error, Result};

/// Reads every record; a missing file is an empty journal.
pub fn read_journal(path: &Path) -> Result<Vec<RunRecord>> {
    read_jsonl(path)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::CorruptJournal {
            path: path.to_path_buf(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Writes `items` as JSON Lines, replacing the file.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    std::fs::write(path, buf).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// The (instance, model) pairs of a journal, rejecting duplicates.
pub fn pair_set(path: &Path, records: &[RunRecord]) -> Result<HashSet<(String, String)>> {
    let mut set = HashSet::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if !set.insert((r.instance_id.clone(), r.model_id.clone())) {
            return Err(Error::CorruptJournal {
                path: path.to_path_buf(),
                line: i + 1,
                reason: format!(
                    "duplicate record for instance `{}` and model `{}`",
                    r.instance_id, r.model_id
                ),
            });
        }
    }
    Ok(set)
}

pub struct JournalWriter {
    path: PathBuf,
    file: File,
}

impl JournalWriter {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Ok(JournalWriter {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Writes one record as a single line and flushes it.
    pub fn append(&mut self, record: &RunRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(format!("appending to {}", self.path.display()), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Mode;
    use crate::harness::TokenAlternative;
    use crate::world::ExpectedLabel;
    use proptest::prelude::*;

    fn arb_record() -> impl Strategy<Value = RunRecord> {
        (
            "[a-z0-9/]{1,12}",
            "[a-z0-9-]{1,10}",
            any::<bool>(),
            ".{0,40}",
            proptest::option::of(proptest::collection::vec(
                proptest::collection::vec(("[a-z ]{0,4}", -30.0f64..=0.0), 1..4),
                0..4,
            )),
            proptest::option::of(0usize..4),
            any::<u64>(),
            1u32..5,
        )
            .prop_map(|(id, model, few, raw, lps, label, ts, attempts)| {
                let extracted = label.map(|i| match i {
                    0 => ExpectedLabel::PlayerOne,
                    1 => ExpectedLabel::PlayerTwo,
                    2 => ExpectedLabel::Tie,
                    n => ExpectedLabel::Named(n),
                });
                RunRecord {
                    instance_id: id,
                    model_id: model,
                    mode: if few { Mode::FewShot } else { Mode::ZeroShot },
                    ruleset_name: "REAL".into(),
                    raw_text: raw,
                    token_logprobs: lps.map(|toks| {
                        toks.into_iter()
                            .map(|alts| {
                                alts.into_iter()
                                    .map(|(token, logprob)| TokenAlternative { token, logprob })
                                    .collect()
                            })
                            .collect()
                    }),
                    correct: extracted.map(|l| l == ExpectedLabel::PlayerOne),
                    extracted,
                    latency_ms: ts % 10_000,
                    attempt_count: attempts,
                    timestamp: ts,
                }
            })
    }

    proptest! {
        #[test]
        fn journal_round_trip(records in proptest::collection::vec(arb_record(), 0..20)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("j.jsonl");
            let mut w = JournalWriter::open(&path).unwrap();
            for r in &records {
                w.append(r).unwrap();
            }
            prop_assert_eq!(read_journal(&path).unwrap(), records);
        }
    }

    #[test]
    fn missing_file_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_journal(&dir.path().join("none.jsonl")).unwrap().is_empty());
    }

    #[test]
    fn truncated_line_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        std::fs::write(&path, "{\"instance_id\": \"x\", \"model").unwrap();
        assert!(matches!(
            read_journal(&path),
            Err(Error::CorruptJournal { line: 1, .. })
        ));
    }
}
