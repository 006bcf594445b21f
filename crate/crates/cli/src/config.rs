use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use absurd_world::fixtures::default_roster;
use absurd_world::harness::{BackendConfig, ModelSpec};
use absurd_world::world::{DoorParams, WorldDefinition, DOOR_WORLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    /// Queries are drawn from the selected pool, like the exemplars.
    #[default]
    Pool,
    /// Queries are freshly generated prompts of the same ruleset.
    Fresh,
}

/// One run, as a single JSON document. Command-line flags override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub world_id: String,
    /// Custom world definition; overrides `world_id`.
    pub world_file: Option<PathBuf>,
    /// Empty means every ruleset of the world.
    pub rulesets: Vec<String>,
    pub prompts_per_ruleset: usize,
    /// Few-shot prompts per ruleset; defaults to `prompts_per_ruleset`.
    pub fewshot_prompts_per_ruleset: Option<usize>,
    pub fewshot_query_source: QueryKind,
    pub master_seed: u64,
    /// Empty means the fourteen-model default roster.
    pub models: Vec<ModelSpec>,
    pub backend: BackendConfig,
    /// Defaults to `<output_dir>/journal.jsonl`.
    pub journal_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub mock_error_rate: f64,
    /// Door-world layout; only read when `world_id` is the door world.
    pub door: Option<DoorParams>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            world_id: "soccer".into(),
            world_file: None,
            rulesets: Vec::new(),
            prompts_per_ruleset: 100,
            fewshot_prompts_per_ruleset: None,
            fewshot_query_source: QueryKind::Pool,
            master_seed: 0,
            models: Vec::new(),
            backend: BackendConfig::default(),
            journal_path: None,
            output_dir: PathBuf::from("out"),
            mock_error_rate: 0.0,
            door: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn world(&self) -> anyhow::Result<WorldDefinition> {
        if let Some(file) = &self.world_file {
            let text = std::fs::read_to_string(file)
                .with_context(|| format!("reading world file {}", file.display()))?;
            return WorldDefinition::from_json(&text)
                .with_context(|| format!("loading world file {}", file.display()));
        }
        match (&self.door, self.world_id.as_str()) {
            (Some(p), DOOR_WORLD) => Ok(WorldDefinition::doors(*p)?),
            _ => Ok(WorldDefinition::builtin(&self.world_id)?),
        }
    }

    pub fn ruleset_names(&self, world: &WorldDefinition) -> anyhow::Result<Vec<String>> {
        if self.rulesets.is_empty() {
            return Ok(world.variant_names());
        }
        for r in &self.rulesets {
            world.variant(r)?;
        }
        Ok(self.rulesets.clone())
    }

    pub fn models(&self) -> Vec<ModelSpec> {
        if self.models.is_empty() {
            default_roster()
        } else {
            self.models.clone()
        }
    }

    pub fn fewshot_count(&self) -> usize {
        self.fewshot_prompts_per_ruleset
            .unwrap_or(self.prompts_per_ruleset)
    }

    pub fn journal(&self) -> PathBuf {
        self.journal_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("journal.jsonl"))
    }

    pub fn batch_dir(&self) -> PathBuf {
        self.output_dir.join("batches")
    }

    pub fn pools_path(&self) -> PathBuf {
        self.output_dir.join("fewshot_pools.json")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.output_dir.join("report")
    }

    /// Checks everything that can be checked without touching batches or
    /// journals.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.prompts_per_ruleset == 0 {
            bail!("prompts_per_ruleset must be at least 1");
        }
        if self.fewshot_prompts_per_ruleset == Some(0) {
            bail!("fewshot_prompts_per_ruleset must be at least 1");
        }
        if self.backend.max_parallel_requests == 0 {
            bail!("backend.max_parallel_requests must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.mock_error_rate) {
            bail!("mock_error_rate must lie in [0, 1]");
        }
        let world = self.world()?;
        self.ruleset_names(&world)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_protocol() {
        let c = RunConfig::default();
        assert_eq!(c.prompts_per_ruleset, 100);
        assert_eq!(c.models().len(), 14);
        assert_eq!(c.journal(), PathBuf::from("out/journal.jsonl"));
        c.validate().unwrap();
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"rulesets": ["REAL", "LEAST"], "master_seed": 7}"#).unwrap();
        assert_eq!(c.master_seed, 7);
        assert_eq!(c.world_id, "soccer");
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let c = RunConfig {
            rulesets: vec!["GOAL".into()],
            ..RunConfig::default()
        };
        assert!(c.validate().unwrap_err().to_string().contains("GOAL"));
        let c = RunConfig {
            prompts_per_ruleset: 0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sedd": 1}"#).is_err());
    }

    #[test]
    fn door_params_are_used() {
        let c: RunConfig = serde_json::from_str(
            r#"{"world_id": "doors", "door": {"door_count": 5, "goat_count": 2, "player_count": 3, "opens_total": 3}}"#,
        )
        .unwrap();
        assert_eq!(c.world().unwrap().spec.door.unwrap().opens_total, 3);
    }
}
