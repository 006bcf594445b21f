//! End-to-end runs of the `absurd` binary in scratch directories.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    /// A sandbox whose config has two mock models and `extra` merged in.
    fn new(extra: Value) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = serde_json::json!({
            "prompts_per_ruleset": 200,
            "master_seed": 17,
            "models": [
                {"model_id": "mock/a", "category": "CHEAP"},
                {"model_id": "mock/b", "category": "EXPENSIVE"}
            ],
            "backend": {"retry_limit": 0, "backoff_ms": [0]}
        });
        for (k, v) in extra.as_object().unwrap() {
            cfg[k] = v.clone();
        }
        cfg["output_dir"] = Value::String(dir.path().join("out").to_string_lossy().into());
        std::fs::write(dir.path().join("config.json"), cfg.to_string()).unwrap();
        Sandbox { dir }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_absurd"))
            .arg("--config")
            .arg(self.dir.path().join("config.json"))
            .args(args)
            .env_remove("ABSURD_API_KEY")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(
            o.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        String::from_utf8_lossy(&o.stdout).into_owned()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Accuracy per (model, ruleset, mode) from `scores.json`.
fn scores(out: &Path) -> Vec<(String, String, String, f64)> {
    let rows: Vec<Value> =
        serde_json::from_str(&std::fs::read_to_string(out.join("scores.json")).unwrap()).unwrap();
    rows.iter()
        .map(|r| {
            (
                r["model_id"].as_str().unwrap().to_string(),
                r["ruleset"].as_str().unwrap().to_string(),
                r["mode"].as_str().unwrap().to_string(),
                r["accuracy"].as_f64().unwrap(),
            )
        })
        .collect()
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let a = Sandbox::new(serde_json::json!({}));
    let b = Sandbox::new(serde_json::json!({}));
    a.ok(&["generate"]);
    b.ok(&["generate"]);
    let files: Vec<_> = std::fs::read_dir(a.out().join("batches"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(files.len(), 7);
    for f in files {
        let x = std::fs::read(a.out().join("batches").join(&f)).unwrap();
        let y = std::fs::read(b.out().join("batches").join(&f)).unwrap();
        assert!(x == y, "{f:?} differs");
    }
}

#[test]
fn seed_flag_changes_batches() {
    let s = Sandbox::new(serde_json::json!({"rulesets": ["REAL"]}));
    s.ok(&["generate"]);
    let first = std::fs::read(s.out().join("batches/REAL.zero_shot.jsonl")).unwrap();
    s.ok(&["--seed", "18", "generate"]);
    let second = std::fs::read(s.out().join("batches/REAL.zero_shot.jsonl")).unwrap();
    assert_ne!(first, second);
}

#[test]
fn unknown_ruleset_is_a_usage_error() {
    let s = Sandbox::new(serde_json::json!({"rulesets": ["REAL", "GOAL"]}));
    let o = s.run(&["generate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("GOAL"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    let s = Sandbox::new(serde_json::json!({}));
    assert_eq!(s.run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(s.run(&["run", "--backend", "oracle"]).status.code(), Some(1));
    assert_eq!(s.run(&["--help"]).status.code(), Some(0));
}

#[test]
fn rule_follower_scores_perfectly() {
    let s = Sandbox::new(serde_json::json!({}));
    s.ok(&["generate"]);
    s.ok(&["run", "--backend", "mock:rule-follower"]);
    s.ok(&["score"]);
    let rows = scores(&s.out());
    assert_eq!(rows.len(), 14);
    for (model, ruleset, _, acc) in rows {
        assert_eq!(acc, 1.0, "{model} {ruleset}");
    }
}

#[test]
fn prior_biased_fails_missing_at_the_tie_rate() {
    let s = Sandbox::new(serde_json::json!({
        "rulesets": ["REAL", "MISSING"],
        "prompts_per_ruleset": 1000,
        "models": [{"model_id": "mock/a", "category": "CHEAP"}]
    }));
    s.ok(&["generate"]);
    s.ok(&["run", "--backend", "mock:prior-biased"]);
    s.ok(&["score"]);
    for (_, ruleset, _, acc) in scores(&s.out()) {
        match ruleset.as_str() {
            "REAL" => assert_eq!(acc, 1.0),
            "MISSING" => assert!((acc - 252.0 / 1024.0).abs() < 0.03, "{acc}"),
            other => panic!("unexpected ruleset {other}"),
        }
    }
}

#[test]
fn live_backend_without_credential_is_a_runtime_error() {
    let s = Sandbox::new(serde_json::json!({"rulesets": ["REAL"], "prompts_per_ruleset": 2}));
    s.ok(&["generate"]);
    let o = s.run(&["run", "--backend", "live"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ABSURD_API_KEY"), "{}", stderr(&o));
}

#[test]
fn missing_inputs_are_runtime_errors() {
    let s = Sandbox::new(serde_json::json!({"rulesets": ["REAL"]}));
    assert_eq!(s.run(&["run", "--backend", "mock:rule-follower"]).status.code(), Some(2));
    s.ok(&["generate"]);
    let o = s.run(&["select-fewshot"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("journal"), "{}", stderr(&o));
    assert_eq!(s.run(&["score"]).status.code(), Some(2));
}

#[test]
fn full_pipeline_with_few_shot() {
    let s = Sandbox::new(serde_json::json!({
        "rulesets": ["REAL", "MISSING"],
        "prompts_per_ruleset": 40,
        "mock_error_rate": 0.2
    }));
    s.ok(&["generate"]);
    s.ok(&["run", "--backend", "mock:rule-follower"]);
    s.ok(&["select-fewshot"]);

    let pools: Value =
        serde_json::from_str(&std::fs::read_to_string(s.out().join("fewshot_pools.json")).unwrap())
            .unwrap();
    for r in ["REAL", "MISSING"] {
        assert!(pools[r].as_array().unwrap().len() >= 20, "{r}");
        let text = std::fs::read_to_string(s.out().join(format!("batches/{r}.few_shot.jsonl"))).unwrap();
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 40);
        for inst in lines {
            assert_eq!(inst["exemplar_ids"].as_array().unwrap().len(), 3);
            assert_eq!(inst["text"].as_str().unwrap().matches("Q:").count(), 4);
        }
    }

    s.ok(&["run", "--mode", "few-shot", "--backend", "mock:rule-follower"]);
    // A second pass finds everything journaled already.
    let again = s.ok(&["run", "--mode", "few-shot", "--backend", "mock:rule-follower"]);
    assert!(again.contains("0 written"), "{again}");

    s.ok(&["analyze"]);
    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(s.out().join("report/manifest.json")).unwrap(),
    )
    .unwrap();
    let files: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["file"].as_str().unwrap())
        .collect();
    for want in ["ttest.csv", "category_table.csv", "radar.csv", "summary.txt"] {
        assert!(files.contains(&want), "{files:?}");
    }
    let ttest = std::fs::read_to_string(s.out().join("report/ttest.csv")).unwrap();
    // header, two rulesets, average
    assert_eq!(ttest.lines().count(), 4, "{ttest}");
}

#[test]
fn fixture_report_has_seven_rulesets_and_average() {
    let s = Sandbox::new(serde_json::json!({}));
    let stdout = s.ok(&["report", "--fixtures"]);
    assert!(stdout.contains("manifest.json"), "{stdout}");
    let ttest = std::fs::read_to_string(s.out().join("report/ttest.csv")).unwrap();
    let rows: Vec<&str> = ttest.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows[7].starts_with("AVERAGE"), "{}", rows[7]);
    let radar = std::fs::read_to_string(s.out().join("report/radar.csv")).unwrap();
    assert!(radar.contains("REASONING"), "{radar}");
}

#[test]
fn worlds_lists_both_builtins() {
    let s = Sandbox::new(serde_json::json!({}));
    let out = s.ok(&["worlds"]);
    assert!(out.contains("soccer") && out.contains("doors"), "{out}");
    assert!(out.contains("MISS_SWITCH") && out.contains("DO_RANDOM_LAST"), "{out}");
}
