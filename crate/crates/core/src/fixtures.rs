//! Published per-model accuracy tables and a backend that replays them.
//!
//! The tables ship as CSV (one row per model, one column per ruleset). A
//! [`ReplayBackend`] turns them into a journal: for every (model, ruleset,
//! mode) it answers exactly `round(accuracy * n)` of the `n` prompts
//! correctly, picking which ones by a hash ordering, and gives a wrong legal
//! answer to the rest.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::generator::{assemble_few_shot_batch, generate_batch, Mode, PromptInstance, QuerySource};
use crate::harness::{
    evaluate_one, Backend, BackendConfig, BackendError, Category, Completion, ModelSpec, RunRecord,
};
use crate::seed::{hash_str, mix, split_seed};
use crate::world::WorldDefinition;
use crate::{Error, Result};

pub const ZERO_SHOT_CSV: &str = include_str!("../fixtures/per_model_zero_shot.csv");
pub const FEW_SHOT_CSV: &str = include_str!("../fixtures/per_model_few_shot.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub model_id: String,
    pub category: Category,
    pub accuracies: BTreeMap<String, f64>,
}

/// Per-model accuracies for one prompting mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    /// Column order as in the source file.
    pub rulesets: Vec<String>,
    pub rows: Vec<FixtureRow>,
}

impl AccuracyTable {
    /// Parses `model_id,category,<RULESET>...` CSV.
    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.len() < 3 || &headers[0] != "model_id" || &headers[1] != "category" {
            return Err(Error::Fixture(
                "expected header `model_id,category,<ruleset>...`".into(),
            ));
        }
        let rulesets: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let category = Category::parse(&rec[1])
                .ok_or_else(|| Error::Fixture(format!("line {line}: unknown category `{}`", &rec[1])))?;
            let mut accuracies = BTreeMap::new();
            for (name, cell) in rulesets.iter().zip(rec.iter().skip(2)) {
                let acc: f64 = cell.trim().parse().map_err(|_| {
                    Error::Fixture(format!("line {line}: `{cell}` is not a number"))
                })?;
                if !(0.0..=1.0).contains(&acc) {
                    return Err(Error::Fixture(format!(
                        "line {line}: accuracy {acc} outside [0, 1]"
                    )));
                }
                accuracies.insert(name.clone(), acc);
            }
            rows.push(FixtureRow {
                model_id: rec[0].to_string(),
                category,
                accuracies,
            });
        }
        Ok(AccuracyTable { rulesets, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text)
    }

    pub fn zero_shot() -> Self {
        Self::parse(ZERO_SHOT_CSV).expect("embedded zero-shot table parses")
    }

    pub fn few_shot() -> Self {
        Self::parse(FEW_SHOT_CSV).expect("embedded few-shot table parses")
    }

    pub fn get(&self, model_id: &str, ruleset: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.model_id == model_id)
            .and_then(|r| r.accuracies.get(ruleset).copied())
    }

    /// Accuracy per model for one ruleset.
    pub fn column(&self, ruleset: &str) -> BTreeMap<String, f64> {
        self.rows
            .iter()
            .filter_map(|r| Some((r.model_id.clone(), *r.accuracies.get(ruleset)?)))
            .collect()
    }

    pub fn models(&self) -> Vec<ModelSpec> {
        self.rows
            .iter()
            .map(|r| ModelSpec::new(&r.model_id, r.category))
            .collect()
    }
}

/// The fourteen models of the published runs, with their categories.
pub fn default_roster() -> Vec<ModelSpec> {
    AccuracyTable::zero_shot().models()
}

pub struct ReplayBackend {
    tables: HashMap<Mode, AccuracyTable>,
    correct: HashSet<(String, String)>,
}

fn order_key(instance_id: &str, model_id: &str) -> u64 {
    mix(hash_str(instance_id) ^ hash_str(model_id).rotate_left(17))
}

impl ReplayBackend {
    /// Plans which (prompt, model) pairs come out right. The plan depends on
    /// the full prompt set, so the backend must be built from the same
    /// prompts it will be asked about.
    pub fn new(
        zero_shot: AccuracyTable,
        few_shot: AccuracyTable,
        prompts: &[PromptInstance],
        models: &[ModelSpec],
    ) -> Self {
        let tables = HashMap::from([(Mode::ZeroShot, zero_shot), (Mode::FewShot, few_shot)]);
        let mut groups: BTreeMap<(&str, Mode), Vec<&str>> = BTreeMap::new();
        for p in prompts {
            groups
                .entry((p.ruleset_name.as_str(), p.mode))
                .or_default()
                .push(p.instance_id.as_str());
        }
        let mut correct = HashSet::new();
        for ((ruleset, mode), ids) in &groups {
            for m in models {
                let Some(acc) = tables[mode].get(&m.model_id, ruleset) else {
                    continue;
                };
                let k = (acc * ids.len() as f64).round() as usize;
                let mut ordered = ids.clone();
                ordered.sort_by_key(|id| (order_key(id, &m.model_id), *id));
                for id in ordered.into_iter().take(k) {
                    correct.insert((id.to_string(), m.model_id.clone()));
                }
            }
        }
        ReplayBackend { tables, correct }
    }

    pub fn published(prompts: &[PromptInstance], models: &[ModelSpec]) -> Self {
        Self::new(AccuracyTable::zero_shot(), AccuracyTable::few_shot(), prompts, models)
    }
}

impl Backend for ReplayBackend {
    fn complete(
        &self,
        model: &ModelSpec,
        prompt: &PromptInstance,
    ) -> Result<Completion, BackendError> {
        if self.tables[&prompt.mode]
            .get(&model.model_id, &prompt.ruleset_name)
            .is_none()
        {
            return Err(BackendError::Malformed(format!(
                "no fixture accuracy for {} on {} {}",
                model.model_id, prompt.ruleset_name, prompt.mode
            )));
        }
        let key = (prompt.instance_id.clone(), model.model_id.clone());
        let label = if self.correct.contains(&key) {
            prompt.expected
        } else {
            let wrong: Vec<_> = prompt
                .binding
                .answer_menu()
                .into_iter()
                .filter(|l| *l != prompt.expected)
                .collect();
            wrong[(order_key(&prompt.instance_id, &model.model_id) % wrong.len() as u64) as usize]
        };
        Ok(Completion::text(format!(
            "{{{}}}",
            prompt.binding.answer_text(label)
        )))
    }
}

/// Prompts and graded records reproducing both published tables.
#[derive(Debug, Clone)]
pub struct FixtureSuite {
    pub models: Vec<ModelSpec>,
    pub prompts: Vec<PromptInstance>,
    pub records: Vec<RunRecord>,
}

/// Generates `n` zero-shot and `n` few-shot soccer prompts per tabulated
/// ruleset and replays the published tables over them. With `n = 100` every
/// published two-decimal accuracy is hit exactly.
pub fn fixture_suite(n: usize, master_seed: u64) -> Result<FixtureSuite> {
    let zero = AccuracyTable::zero_shot();
    let few = AccuracyTable::few_shot();
    let world = WorldDefinition::builtin(crate::world::SOCCER_WORLD)?;
    let mut prompts = Vec::new();
    for (i, ruleset) in zero.rulesets.iter().enumerate() {
        let variant = world.variant(ruleset)?;
        let seed = split_seed(master_seed, i as u64);
        let batch = generate_batch(&world.spec, variant, n, seed)?;
        let fs = assemble_few_shot_batch(&batch, n, split_seed(seed, 1), QuerySource::Pool)?;
        prompts.extend(batch);
        prompts.extend(fs);
    }
    let models = zero.models();
    let backend = ReplayBackend::new(zero, few, &prompts, &models);
    let config = BackendConfig {
        retry_limit: 0,
        ..BackendConfig::default()
    };
    let mut records = Vec::with_capacity(prompts.len() * models.len());
    for p in &prompts {
        for m in &models {
            records.push(evaluate_one(&backend, m, p, &config));
        }
    }
    Ok(FixtureSuite {
        models,
        prompts,
        records,
    })
}
