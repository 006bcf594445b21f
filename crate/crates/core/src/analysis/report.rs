//! Writes every analysis table as CSV and JSON plus a plain-text summary.
//!
//! | file                   | columns                                                   |
//! |------------------------|-----------------------------------------------------------|
//! | `scores_long.csv`      | model_id, category, ruleset, mode, n, correct, accuracy   |
//! | `per_model_matrix.csv` | model_id, category, mode, one column per ruleset          |
//! | `category_table.csv`   | group, mode, one column per ruleset                       |
//! | `ttest.csv`            | ruleset, mean_do0, mean_dofs, difference, t_statistic, p_value, degrees_of_freedom, n_models, degenerate |
//! | `entropy_summary.csv`  | model_id, ruleset, mode, records_with_logprobs, accuracy, mean_entropy_all, mean_entropy_correct, mean_entropy_incorrect |
//! | `entropy_scatter.csv`  | model_id, ruleset, mode, correct_entropy, incorrect_entropy |
//! | `entropy_accuracy.csv` | model_id, ruleset, mode, accuracy, mean_entropy           |
//! | `radar.csv`            | group, mode, ruleset, value                               |
//!
//! Each CSV has a JSON twin with the same stem. Empty inputs give header-only
//! CSVs and empty JSON arrays.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::entropy::EntropyReport;
use super::ttest::TTestResult;
use crate::generator::Mode;
use crate::harness::{Category, ModelSpec};
use crate::scoring::{CategoryTable, Group, ScoreTable};
use crate::{Error, Result};

pub struct ReportInput<'a> {
    pub scores: &'a ScoreTable,
    pub models: &'a [ModelSpec],
    pub categories: &'a CategoryTable,
    pub ttests: &'a [TTestResult],
    pub entropy: &'a EntropyReport,
    /// Column order for ruleset-wide tables. Rulesets in the data but not
    /// listed here are appended alphabetically.
    pub rulesets: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    /// Data rows, not counting a CSV header.
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub output_dir: PathBuf,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub model_id: String,
    pub category: Option<Category>,
    pub mode: Mode,
    pub accuracies: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMatrixRow {
    pub group: String,
    pub mode: Mode,
    pub accuracies: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSeries {
    pub group: String,
    pub mode: Mode,
    /// (ruleset, value) in column order.
    pub points: Vec<(String, f64)>,
}

struct Emitter<'a> {
    dir: &'a Path,
    files: Vec<ManifestEntry>,
}

impl Emitter<'_> {
    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.files.push(ManifestEntry {
            file: name.to_string(),
            rows: rows.len(),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T, rows: usize) -> Result<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value)?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.files.push(ManifestEntry {
            file: name.to_string(),
            rows,
        });
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.files.push(ManifestEntry {
            file: name.to_string(),
            rows: body.lines().count(),
        });
        Ok(())
    }
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

fn opt4(x: Option<f64>) -> String {
    x.map(f4).unwrap_or_default()
}

fn header(fixed: &[&str], rulesets: &[String]) -> Vec<String> {
    fixed
        .iter()
        .map(|s| s.to_string())
        .chain(rulesets.iter().cloned())
        .collect()
}

fn column_order(input: &ReportInput<'_>) -> Vec<String> {
    let mut order: Vec<String> = input.rulesets.to_vec();
    let seen: BTreeSet<String> = order.iter().cloned().collect();
    let extra: BTreeSet<String> = input
        .scores
        .rulesets()
        .into_iter()
        .map(str::to_string)
        .chain(input.categories.entries.keys().map(|(_, r, _)| r.clone()))
        .filter(|r| !seen.contains(r))
        .collect();
    order.extend(extra);
    order
}

fn model_order(input: &ReportInput<'_>) -> Vec<String> {
    let mut order: Vec<String> = input.models.iter().map(|m| m.model_id.clone()).collect();
    let seen: BTreeSet<String> = order.iter().cloned().collect();
    order.extend(
        input
            .scores
            .models()
            .into_iter()
            .filter(|m| !seen.contains(*m))
            .map(str::to_string),
    );
    order
}

fn matrix_rows(input: &ReportInput<'_>) -> Vec<MatrixRow> {
    let cats: BTreeMap<&str, Category> = input
        .models
        .iter()
        .map(|m| (m.model_id.as_str(), m.category))
        .collect();
    let mut out = Vec::new();
    for mode in input.scores.modes() {
        for model in model_order(input) {
            let accuracies: BTreeMap<String, f64> = input
                .scores
                .entries
                .iter()
                .filter(|(k, _)| k.model_id == model && k.mode == mode)
                .map(|(k, e)| (k.ruleset.clone(), e.accuracy))
                .collect();
            if accuracies.is_empty() {
                continue;
            }
            out.push(MatrixRow {
                category: cats.get(model.as_str()).copied(),
                model_id: model,
                mode,
                accuracies,
            });
        }
    }
    out
}

fn category_rows(input: &ReportInput<'_>) -> Vec<CategoryMatrixRow> {
    let mut by: BTreeMap<(Mode, Group), BTreeMap<String, f64>> = BTreeMap::new();
    for ((g, r, m), (_, mean)) in &input.categories.entries {
        by.entry((*m, *g)).or_default().insert(r.clone(), *mean);
    }
    by.into_iter()
        .map(|((mode, g), accuracies)| CategoryMatrixRow {
            group: g.label().to_string(),
            mode,
            accuracies,
        })
        .collect()
}

fn radar_series(rows: &[CategoryMatrixRow], order: &[String]) -> Vec<RadarSeries> {
    rows.iter()
        .map(|r| RadarSeries {
            group: r.group.clone(),
            mode: r.mode,
            points: order
                .iter()
                .filter_map(|name| Some((name.clone(), *r.accuracies.get(name)?)))
                .collect(),
        })
        .collect()
}

fn summary_text(
    order: &[String],
    cats: &[CategoryMatrixRow],
    ttests: &[TTestResult],
    entropy: &EntropyReport,
) -> String {
    let mut s = String::new();
    let width = order.iter().map(String::len).max().unwrap_or(0).max(7);
    for mode in [Mode::ZeroShot, Mode::FewShot] {
        let rows: Vec<_> = cats.iter().filter(|r| r.mode == mode).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(s, "Category accuracy, {mode}");
        let _ = write!(s, "{:<10}", "group");
        for r in order {
            let _ = write!(s, " {r:>width$}");
        }
        s.push('\n');
        for row in rows {
            let _ = write!(s, "{:<10}", row.group);
            for r in order {
                let cell = row.accuracies.get(r).map(|v| format!("{v:.3}")).unwrap_or("-".into());
                let _ = write!(s, " {cell:>width$}");
            }
            s.push('\n');
        }
        s.push('\n');
    }
    if !ttests.is_empty() {
        let _ = writeln!(s, "Paired t-test, zero-shot vs few-shot (one-sided)");
        let _ = writeln!(
            s,
            "{:<width$} {:>8} {:>8} {:>9} {:>9} {:>10}",
            "ruleset", "mu_do0", "mu_dofs", "diff", "t", "p"
        );
        for t in ttests {
            let _ = writeln!(
                s,
                "{:<width$} {:>8.3} {:>8.3} {:>+9.4} {:>9.3} {:>10.5}",
                t.ruleset_name, t.mean_do0, t.mean_dofs, t.difference, t.t_statistic, t.p_value
            );
        }
        s.push('\n');
    }
    let _ = writeln!(
        s,
        "Entropy: {} summaries, {} scatter points",
        entropy.summaries.len(),
        entropy.scatter.len()
    );
    s
}

/// Writes the report into `output_dir` (created if missing) and returns the
/// manifest, which is also saved as `manifest.json`.
pub fn emit_report(input: &ReportInput<'_>, output_dir: &Path) -> Result<ReportManifest> {
    std::fs::create_dir_all(output_dir)
        .map_err(|e| Error::io(format!("creating {}", output_dir.display()), e))?;
    let mut em = Emitter {
        dir: output_dir,
        files: Vec::new(),
    };
    let order = column_order(input);

    let long = input.scores.rows(input.models);
    let long_rows: Vec<Vec<String>> = long
        .iter()
        .map(|r| {
            vec![
                r.model_id.clone(),
                r.category.map(|c| c.as_str().to_string()).unwrap_or_default(),
                r.ruleset.clone(),
                r.mode.as_str().to_string(),
                r.n.to_string(),
                r.correct.to_string(),
                f4(r.accuracy),
            ]
        })
        .collect();
    em.csv(
        "scores_long.csv",
        &header(&["model_id", "category", "ruleset", "mode", "n", "correct", "accuracy"], &[]),
        &long_rows,
    )?;
    em.json("scores_long.json", &long, long.len())?;

    let matrix = matrix_rows(input);
    let rows: Vec<Vec<String>> = matrix
        .iter()
        .map(|m| {
            let mut v = vec![
                m.model_id.clone(),
                m.category.map(|c| c.as_str().to_string()).unwrap_or_default(),
                m.mode.as_str().to_string(),
            ];
            v.extend(order.iter().map(|r| opt4(m.accuracies.get(r).copied())));
            v
        })
        .collect();
    em.csv("per_model_matrix.csv", &header(&["model_id", "category", "mode"], &order), &rows)?;
    em.json("per_model_matrix.json", &matrix, matrix.len())?;

    let cats = category_rows(input);
    let rows: Vec<Vec<String>> = cats
        .iter()
        .map(|c| {
            let mut v = vec![c.group.clone(), c.mode.as_str().to_string()];
            v.extend(order.iter().map(|r| opt4(c.accuracies.get(r).copied())));
            v
        })
        .collect();
    em.csv("category_table.csv", &header(&["group", "mode"], &order), &rows)?;
    em.json("category_table.json", &cats, cats.len())?;

    let rows: Vec<Vec<String>> = input
        .ttests
        .iter()
        .map(|t| {
            vec![
                t.ruleset_name.clone(),
                f4(t.mean_do0),
                f4(t.mean_dofs),
                f4(t.difference),
                format!("{:.6}", t.t_statistic),
                format!("{:.6e}", t.p_value),
                t.degrees_of_freedom.to_string(),
                t.n_models.to_string(),
                t.degenerate.to_string(),
            ]
        })
        .collect();
    em.csv(
        "ttest.csv",
        &header(
            &[
                "ruleset",
                "mean_do0",
                "mean_dofs",
                "difference",
                "t_statistic",
                "p_value",
                "degrees_of_freedom",
                "n_models",
                "degenerate",
            ],
            &[],
        ),
        &rows,
    )?;
    em.json("ttest.json", &input.ttests, input.ttests.len())?;

    let e = input.entropy;
    let rows: Vec<Vec<String>> = e
        .summaries
        .iter()
        .map(|s| {
            vec![
                s.model_id.clone(),
                s.ruleset_name.clone(),
                s.mode.as_str().to_string(),
                s.records_with_logprobs.to_string(),
                f4(s.accuracy),
                opt4(s.mean_entropy_all),
                opt4(s.mean_entropy_correct),
                opt4(s.mean_entropy_incorrect),
            ]
        })
        .collect();
    em.csv(
        "entropy_summary.csv",
        &header(
            &[
                "model_id",
                "ruleset",
                "mode",
                "records_with_logprobs",
                "accuracy",
                "mean_entropy_all",
                "mean_entropy_correct",
                "mean_entropy_incorrect",
            ],
            &[],
        ),
        &rows,
    )?;
    let rows: Vec<Vec<String>> = e
        .scatter
        .iter()
        .map(|p| {
            vec![
                p.model_id.clone(),
                p.ruleset_name.clone(),
                p.mode.as_str().to_string(),
                f4(p.correct_entropy),
                f4(p.incorrect_entropy),
            ]
        })
        .collect();
    em.csv(
        "entropy_scatter.csv",
        &header(&["model_id", "ruleset", "mode", "correct_entropy", "incorrect_entropy"], &[]),
        &rows,
    )?;
    let rows: Vec<Vec<String>> = e
        .accuracy_series
        .iter()
        .map(|p| {
            vec![
                p.model_id.clone(),
                p.ruleset_name.clone(),
                p.mode.as_str().to_string(),
                f4(p.accuracy),
                f4(p.mean_entropy),
            ]
        })
        .collect();
    em.csv(
        "entropy_accuracy.csv",
        &header(&["model_id", "ruleset", "mode", "accuracy", "mean_entropy"], &[]),
        &rows,
    )?;
    em.json("entropy.json", e, e.summaries.len())?;

    let radar = radar_series(&cats, &order);
    let rows: Vec<Vec<String>> = radar
        .iter()
        .flat_map(|s| {
            s.points.iter().map(move |(r, v)| {
                vec![s.group.clone(), s.mode.as_str().to_string(), r.clone(), f4(*v)]
            })
        })
        .collect();
    em.csv("radar.csv", &header(&["group", "mode", "ruleset", "value"], &[]), &rows)?;
    em.json("radar.json", &radar, radar.len())?;

    em.text("summary.txt", &summary_text(&order, &cats, input.ttests, e))?;

    let mut manifest = ReportManifest {
        output_dir: output_dir.to_path_buf(),
        files: em.files,
    };
    manifest.files.push(ManifestEntry {
        file: "manifest.json".into(),
        rows: manifest.files.len(),
    });
    let text = serde_json::to_string_pretty(&manifest)?;
    let path = output_dir.join("manifest.json");
    std::fs::write(&path, text + "\n")
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_writes_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let scores = ScoreTable::default();
        let cats = CategoryTable::default();
        let entropy = EntropyReport::default();
        let m = emit_report(
            &ReportInput {
                scores: &scores,
                models: &[],
                categories: &cats,
                ttests: &[],
                entropy: &entropy,
                rulesets: &[],
            },
            dir.path(),
        )
        .unwrap();
        for f in m.files.iter().filter(|f| f.file.ends_with(".csv")) {
            assert_eq!(f.rows, 0, "{}", f.file);
            let text = std::fs::read_to_string(dir.path().join(&f.file)).unwrap();
            assert_eq!(text.lines().count(), 1, "{}", f.file);
        }
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("summary.txt").exists());
    }
}
