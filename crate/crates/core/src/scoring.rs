//! Answer extraction, grading and aggregation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::generator::{Mode, PromptInstance, SymbolBinding};
use crate::harness::{Category, ModelSpec, RunRecord};
use crate::world::ExpectedLabel;
use crate::{Error, Result};

/// Content of the last balanced top-level `{...}` group, with redundant
/// outer braces (`{{x}}`) peeled off.
pub fn last_braced(raw: &str) -> Option<&str> {
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut last = None;
    for (i, c) in raw.char_indices() {
        match c {
            '{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    last = Some(&raw[start + 1..i]);
                }
            }
            _ => {}
        }
    }
    let mut inner = last?;
    loop {
        let t = inner.trim();
        if t.len() >= 2 && t.starts_with('{') && t.ends_with('}') && balanced(&t[1..t.len() - 1]) {
            inner = &t[1..t.len() - 1];
        } else {
            return Some(inner);
        }
    }
}

fn balanced(s: &str) -> bool {
    let mut depth = 0i32;
    for c in s.chars() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Maps the final braced answer onto the binding's answer menu. `None`
/// means the response is unparseable.
pub fn extract_answer(raw_text: &str, binding: &SymbolBinding) -> Option<ExpectedLabel> {
    let answer = normalize(last_braced(raw_text)?);
    binding
        .answer_menu()
        .into_iter()
        .find(|label| normalize(&binding.answer_text(*label)) == answer)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScoreKey {
    pub model_id: String,
    pub ruleset: String,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub entries: BTreeMap<ScoreKey, ScoreEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model_id: String,
    pub category: Option<Category>,
    pub ruleset: String,
    pub mode: Mode,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl ScoreTable {
    pub fn get(&self, model_id: &str, ruleset: &str, mode: Mode) -> Option<&ScoreEntry> {
        self.entries.get(&ScoreKey {
            model_id: model_id.to_string(),
            ruleset: ruleset.to_string(),
            mode,
        })
    }

    pub fn accuracy(&self, model_id: &str, ruleset: &str, mode: Mode) -> Option<f64> {
        self.get(model_id, ruleset, mode).map(|e| e.accuracy)
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|k| k.model_id.as_str()).collect()
    }

    pub fn rulesets(&self) -> BTreeSet<&str> {
        self.entries.keys().map(|k| k.ruleset.as_str()).collect()
    }

    pub fn modes(&self) -> BTreeSet<Mode> {
        self.entries.keys().map(|k| k.mode).collect()
    }

    /// Per-model accuracies for one ruleset and mode.
    pub fn column(&self, ruleset: &str, mode: Mode) -> BTreeMap<String, f64> {
        self.entries
            .iter()
            .filter(|(k, _)| k.ruleset == ruleset && k.mode == mode)
            .map(|(k, e)| (k.model_id.clone(), e.accuracy))
            .collect()
    }

    pub fn rows(&self, specs: &[ModelSpec]) -> Vec<ScoreRow> {
        let cats = category_lookup(specs);
        self.entries
            .iter()
            .map(|(k, e)| ScoreRow {
                model_id: k.model_id.clone(),
                category: cats.get(k.model_id.as_str()).copied(),
                ruleset: k.ruleset.clone(),
                mode: k.mode,
                n: e.n,
                correct: e.correct,
                accuracy: e.accuracy,
            })
            .collect()
    }

    /// CSV with columns `model_id,category,ruleset,mode,n,correct,accuracy`.
    pub fn write_csv<W: Write>(&self, specs: &[ModelSpec], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model_id", "category", "ruleset", "mode", "n", "correct", "accuracy"])?;
        for r in self.rows(specs) {
            w.write_record([
                r.model_id,
                r.category.map(|c| c.as_str().to_string()).unwrap_or_default(),
                r.ruleset,
                r.mode.as_str().to_string(),
                r.n.to_string(),
                r.correct.to_string(),
                format!("{:.4}", r.accuracy),
            ])?;
        }
        w.flush().map_err(|e| Error::io("writing score CSV", e))?;
        Ok(())
    }
}

fn category_lookup(specs: &[ModelSpec]) -> HashMap<&str, Category> {
    specs
        .iter()
        .map(|s| (s.model_id.as_str(), s.category))
        .collect()
}

/// Expected label per instance id.
pub fn expected_labels<'a>(
    instances: impl IntoIterator<Item = &'a PromptInstance>,
) -> HashMap<String, ExpectedLabel> {
    instances
        .into_iter()
        .map(|p| (p.instance_id.clone(), p.expected))
        .collect()
}

/// Grades every record against its instance's label. Unparseable and
/// failed records count as incorrect.
pub fn score_runs(
    records: &[RunRecord],
    expected: &HashMap<String, ExpectedLabel>,
) -> Result<ScoreTable> {
    let mut entries: BTreeMap<ScoreKey, ScoreEntry> = BTreeMap::new();
    for r in records {
        let want = expected
            .get(&r.instance_id)
            .ok_or_else(|| Error::UnresolvableInstance(r.instance_id.clone()))?;
        let entry = entries
            .entry(ScoreKey {
                model_id: r.model_id.clone(),
                ruleset: r.ruleset_name.clone(),
                mode: r.mode,
            })
            .or_insert(ScoreEntry {
                n: 0,
                correct: 0,
                accuracy: 0.0,
            });
        entry.n += 1;
        if r.extracted == Some(*want) {
            entry.correct += 1;
        }
    }
    for e in entries.values_mut() {
        e.accuracy = e.correct as f64 / e.n as f64;
    }
    Ok(ScoreTable { entries })
}

/// A category, or every model together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Group {
    Category(Category),
    Total,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::Category(c) => c.as_str(),
            Group::Total => "TOTAL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub group: Group,
    pub ruleset: String,
    pub mode: Mode,
    pub models: usize,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CategoryTable {
    pub entries: BTreeMap<(Group, String, Mode), (usize, f64)>,
}

impl CategoryTable {
    pub fn mean(&self, group: Group, ruleset: &str, mode: Mode) -> Option<f64> {
        self.entries
            .get(&(group, ruleset.to_string(), mode))
            .map(|(_, m)| *m)
    }

    pub fn groups(&self) -> BTreeSet<Group> {
        self.entries.keys().map(|(g, _, _)| *g).collect()
    }

    pub fn rows(&self) -> Vec<CategoryRow> {
        self.entries
            .iter()
            .map(|((g, r, m), (n, mean))| CategoryRow {
                group: *g,
                ruleset: r.clone(),
                mode: *m,
                models: *n,
                mean_accuracy: *mean,
            })
            .collect()
    }
}

/// Unweighted mean of member-model accuracies per (category, ruleset, mode),
/// plus the all-model mean.
pub fn category_averages(table: &ScoreTable, specs: &[ModelSpec]) -> Result<CategoryTable> {
    let cats = category_lookup(specs);
    let mut sums: BTreeMap<(Group, String, Mode), (usize, f64)> = BTreeMap::new();
    for (k, e) in &table.entries {
        let cat = *cats
            .get(k.model_id.as_str())
            .ok_or_else(|| Error::MissingCategory(k.model_id.clone()))?;
        for g in [Group::Category(cat), Group::Total] {
            let s = sums.entry((g, k.ruleset.clone(), k.mode)).or_insert((0, 0.0));
            s.0 += 1;
            s.1 += e.accuracy;
        }
    }
    let entries = sums
        .into_iter()
        .map(|(k, (n, sum))| (k, (n, sum / n as f64)))
        .collect();
    Ok(CategoryTable { entries })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptScore {
    pub instance_id: String,
    pub models_correct: usize,
}

/// Number of models answering each zero-shot prompt correctly, by ruleset.
pub fn prompt_scores(records: &[RunRecord]) -> BTreeMap<String, Vec<PromptScore>> {
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.mode == Mode::ZeroShot) {
        let c = counts
            .entry(r.ruleset_name.clone())
            .or_default()
            .entry(r.instance_id.clone())
            .or_insert(0);
        if r.correct == Some(true) {
            *c += 1;
        }
    }
    counts
        .into_iter()
        .map(|(ruleset, per)| {
            let scores = per
                .into_iter()
                .map(|(instance_id, models_correct)| PromptScore {
                    instance_id,
                    models_correct,
                })
                .collect();
            (ruleset, scores)
        })
        .collect()
}

/// Median with the midpoint convention for even counts.
pub fn median(values: &[usize]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid] as f64
    } else {
        (v[mid - 1] + v[mid]) as f64 / 2.0
    })
}

/// Prompts whose score is at or below the median of their ruleset.
pub fn select_from_scores(ruleset: &str, scores: &[PromptScore]) -> Result<Vec<String>> {
    let values: Vec<usize> = scores.iter().map(|s| s.models_correct).collect();
    let med = median(&values).ok_or_else(|| Error::EmptyPartition(ruleset.to_string()))?;
    Ok(scores
        .iter()
        .filter(|s| s.models_correct as f64 <= med)
        .map(|s| s.instance_id.clone())
        .collect())
}

/// Few-shot pools (instance ids) for every ruleset in a zero-shot journal.
pub fn select_fewshot_pool(do0_records: &[RunRecord]) -> Result<BTreeMap<String, Vec<String>>> {
    let scores = prompt_scores(do0_records);
    if scores.is_empty() {
        return Err(Error::EmptyPartition("<no zero-shot records>".into()));
    }
    scores
        .iter()
        .map(|(ruleset, s)| Ok((ruleset.clone(), select_from_scores(ruleset, s)?)))
        .collect()
}
