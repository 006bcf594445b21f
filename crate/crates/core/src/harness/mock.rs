//! Offline agents for exercising the pipeline without a provider.
//!
//! Both agents read the game straight from the instance. The rule follower
//! applies the bound ruleset; the prior-biased agent always plays by the
//! real-world rules, whatever the prompt says.

use std::collections::BTreeSet;

use super::{Backend, BackendError, Completion, ModelSpec};
use crate::generator::{EventRecord, PromptInstance};
use crate::oracle::{self, GoatRule, SoccerRules};
use crate::seed::{hash_str, mix};
use crate::world::ExpectedLabel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MockAgent {
    /// Answers by the prompt's rules; with probability `error_rate` picks a
    /// different legal answer instead (seeded by instance and model).
    RuleFollower { error_rate: f64 },
    PriorBiased,
}

pub struct MockBackend {
    agent: MockAgent,
}

impl MockBackend {
    pub fn new(agent: MockAgent) -> Self {
        MockBackend { agent }
    }
}

fn is_door_game(prompt: &PromptInstance) -> bool {
    matches!(prompt.events.first(), Some(EventRecord::Opening { .. }))
}

fn solve(prompt: &PromptInstance, follow_rules: bool) -> Result<ExpectedLabel, BackendError> {
    let malformed = |e: crate::Error| BackendError::Malformed(e.to_string());
    let resolved = &prompt.binding.resolved;
    if is_door_game(prompt) {
        let rule = if follow_rules {
            GoatRule::from_lookup(|s| resolved.get(s).map(String::as_str)).map_err(malformed)?
        } else {
            GoatRule::First
        };
        let empty = BTreeSet::new();
        let goats = prompt.goat_doors.as_ref().unwrap_or(&empty);
        let openings = oracle::openings(&prompt.events).map_err(malformed)?;
        oracle::door_outcome_with(&openings, goats, rule).map_err(malformed)
    } else {
        let rules = if follow_rules {
            SoccerRules::from_resolved(resolved).map_err(malformed)?
        } else {
            SoccerRules::REAL
        };
        oracle::soccer_outcome_with(&prompt.events, rules).map_err(malformed)
    }
}

fn respond(prompt: &PromptInstance, label: ExpectedLabel) -> String {
    format!(
        "Tallying the commentary, the winner is {{{}}}",
        prompt.binding.answer_text(label)
    )
}

pub fn mock_rule_follower(prompt: &PromptInstance) -> Result<Completion, BackendError> {
    Ok(Completion::text(respond(prompt, solve(prompt, true)?)))
}

pub fn mock_prior_biased(prompt: &PromptInstance) -> Result<Completion, BackendError> {
    Ok(Completion::text(respond(prompt, solve(prompt, false)?)))
}

fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

impl Backend for MockBackend {
    fn complete(
        &self,
        model: &ModelSpec,
        prompt: &PromptInstance,
    ) -> Result<Completion, BackendError> {
        match self.agent {
            MockAgent::PriorBiased => mock_prior_biased(prompt),
            MockAgent::RuleFollower { error_rate } => {
                let right = solve(prompt, true)?;
                let h = mix(hash_str(&prompt.instance_id) ^ hash_str(&model.model_id));
                if error_rate > 0.0 && unit_interval(h) < error_rate {
                    let wrong: Vec<_> = prompt
                        .binding
                        .answer_menu()
                        .into_iter()
                        .filter(|l| *l != right)
                        .collect();
                    if !wrong.is_empty() {
                        let pick = wrong[(mix(h) % wrong.len() as u64) as usize];
                        return Ok(Completion::text(respond(prompt, pick)));
                    }
                }
                Ok(Completion::text(respond(prompt, right)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::generate_batch;
    use crate::harness::Category;
    use crate::scoring::extract_answer;
    use crate::world::WorldDefinition;

    fn accuracy(world: &str, ruleset: &str, agent: MockAgent) -> f64 {
        let def = WorldDefinition::builtin(world).unwrap();
        let ps = generate_batch(&def.spec, def.variant(ruleset).unwrap(), 300, 9).unwrap();
        let b = MockBackend::new(agent);
        let m = ModelSpec::new("mock", Category::Cheap);
        let hits = ps
            .iter()
            .filter(|p| {
                let c = b.complete(&m, p).unwrap();
                extract_answer(&c.text, &p.binding) == Some(p.expected)
            })
            .count();
        hits as f64 / ps.len() as f64
    }

    #[test]
    fn rule_follower_is_perfect() {
        let agent = MockAgent::RuleFollower { error_rate: 0.0 };
        for r in ["REAL", "MISSING", "LEAST", "SWITCH", "MISS_SWITCH"] {
            assert_eq!(accuracy("soccer", r, agent), 1.0, "{r}");
        }
        for r in ["DO_RANDOM", "DO_RANDOM_LAST"] {
            assert_eq!(accuracy("doors", r, agent), 1.0, "{r}");
        }
    }

    #[test]
    fn error_rate_is_roughly_honoured() {
        let acc = accuracy("soccer", "REAL", MockAgent::RuleFollower { error_rate: 0.3 });
        assert!((acc - 0.7).abs() < 0.08, "{acc}");
    }

    #[test]
    fn prior_biased_ignores_rule_changes() {
        assert_eq!(accuracy("soccer", "REAL", MockAgent::PriorBiased), 1.0);
        assert_eq!(accuracy("soccer", "SWITCH", MockAgent::PriorBiased), 1.0);
        assert!(accuracy("soccer", "MISSING", MockAgent::PriorBiased) < 0.4);
    }
}
