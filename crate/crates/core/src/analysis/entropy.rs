//! Token-level entropy of model responses, in nats.
//!
//! Providers return only the top-k alternatives per token, so each token's
//! alternatives are renormalized before taking the entropy. A response's
//! entropy is the plain mean over all of its generated tokens.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::generator::Mode;
use crate::harness::{RunRecord, TokenAlternative};
use crate::world::ExpectedLabel;
use crate::{Error, Result};

fn token_entropy(alternatives: &[TokenAlternative]) -> Result<f64> {
    if alternatives.is_empty() {
        return Err(Error::Statistics("token with no alternatives".into()));
    }
    if let Some(bad) = alternatives.iter().find(|a| a.logprob > 0.0 || a.logprob.is_nan()) {
        return Err(Error::Statistics(format!(
            "log probability {} for token {:?} is not <= 0",
            bad.logprob, bad.token
        )));
    }
    let max = alternatives
        .iter()
        .map(|a| a.logprob)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Statistics("token with zero total probability".into()));
    }
    let log_z = max
        + alternatives
            .iter()
            .map(|a| (a.logprob - max).exp())
            .sum::<f64>()
            .ln();
    let h: f64 = alternatives
        .iter()
        .map(|a| {
            let lp = a.logprob - log_z;
            if lp == f64::NEG_INFINITY {
                0.0
            } else {
                -lp.exp() * lp
            }
        })
        .sum();
    Ok(h.max(0.0))
}

/// Mean per-token entropy of one response.
pub fn response_entropy(token_logprobs: &[Vec<TokenAlternative>]) -> Result<f64> {
    if token_logprobs.is_empty() {
        return Err(Error::Statistics("response has no tokens".into()));
    }
    let mut sum = 0.0;
    for alts in token_logprobs {
        sum += token_entropy(alts)?;
    }
    Ok(sum / token_logprobs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySummary {
    pub model_id: String,
    pub ruleset_name: String,
    pub mode: Mode,
    pub mean_entropy_all: Option<f64>,
    pub mean_entropy_correct: Option<f64>,
    pub mean_entropy_incorrect: Option<f64>,
    pub records_with_logprobs: usize,
    /// Accuracy over every record of the group, with or without logprobs.
    pub accuracy: f64,
}

/// One point of the correct-vs-incorrect scatter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub model_id: String,
    pub ruleset_name: String,
    pub mode: Mode,
    pub correct_entropy: f64,
    pub incorrect_entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub model_id: String,
    pub ruleset_name: String,
    pub mode: Mode,
    pub accuracy: f64,
    pub mean_entropy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub summaries: Vec<EntropySummary>,
    /// Groups with both correct and incorrect logprob records. Groups where
    /// every answer was right have no y value and are left out.
    pub scatter: Vec<ScatterPoint>,
    pub accuracy_series: Vec<AccuracyPoint>,
}

#[derive(Default)]
struct Acc {
    total: usize,
    right: usize,
    all: Vec<f64>,
    correct: Vec<f64>,
    incorrect: Vec<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Per (model, ruleset, mode) entropy summaries plus plot series. Records
/// without logprobs, or with an unusable logprob list, only count toward
/// accuracy. Groups with no logprob records are omitted.
pub fn entropy_report(
    records: &[RunRecord],
    expected: &HashMap<String, ExpectedLabel>,
) -> EntropyReport {
    let mut groups: BTreeMap<(String, String, Mode), Acc> = BTreeMap::new();
    for r in records {
        let correct = match expected.get(&r.instance_id) {
            Some(want) => r.extracted == Some(*want),
            None => r.correct == Some(true),
        };
        let g = groups
            .entry((r.model_id.clone(), r.ruleset_name.clone(), r.mode))
            .or_default();
        g.total += 1;
        g.right += correct as usize;
        let Some(lps) = &r.token_logprobs else { continue };
        match response_entropy(lps) {
            Ok(h) => {
                g.all.push(h);
                if correct {
                    g.correct.push(h);
                } else {
                    g.incorrect.push(h);
                }
            }
            Err(e) => log::debug!("skipping entropy of {}: {e}", r.instance_id),
        }
    }

    let mut report = EntropyReport::default();
    for ((model_id, ruleset_name, mode), g) in groups {
        if g.all.is_empty() {
            continue;
        }
        let accuracy = g.right as f64 / g.total as f64;
        let summary = EntropySummary {
            model_id,
            ruleset_name,
            mode,
            mean_entropy_all: mean(&g.all),
            mean_entropy_correct: mean(&g.correct),
            mean_entropy_incorrect: mean(&g.incorrect),
            records_with_logprobs: g.all.len(),
            accuracy,
        };
        if let (Some(x), Some(y)) = (summary.mean_entropy_correct, summary.mean_entropy_incorrect) {
            report.scatter.push(ScatterPoint {
                model_id: summary.model_id.clone(),
                ruleset_name: summary.ruleset_name.clone(),
                mode,
                correct_entropy: x,
                incorrect_entropy: y,
            });
        }
        report.accuracy_series.push(AccuracyPoint {
            model_id: summary.model_id.clone(),
            ruleset_name: summary.ruleset_name.clone(),
            mode,
            accuracy,
            mean_entropy: summary.mean_entropy_all.unwrap_or_default(),
        });
        report.summaries.push(summary);
    }
    report
}
