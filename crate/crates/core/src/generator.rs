//! Seeded prompt generation.
//!
//! Every instance gets its own seed, split from the batch master seed by
//! [`crate::seed::split_seed`]. The instance seed is split again into a
//! binding stream (index 0) and a game stream (index 1), so the player names
//! and the commentary are drawn independently.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::oracle;
use crate::seed::{hash_str, rng, split_seed};
use crate::world::{
    self, Assignment, ExpectedLabel, Roster, RulesetVariant, SequencePolicy, WorldSpec,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Shooter {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ShotOutcome {
    Hit,
    Miss,
}

impl ShotOutcome {
    pub fn verb(self) -> &'static str {
        match self {
            ShotOutcome::Hit => "hits",
            ShotOutcome::Miss => "misses",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventRecord {
    Shot {
        ordinal: u32,
        shooter: Shooter,
        outcome: ShotOutcome,
    },
    /// `player` is zero-based, `door` is the 1-based door number.
    Opening {
        ordinal: u32,
        player: usize,
        door: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    ZeroShot,
    FewShot,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ZeroShot => "ZERO_SHOT",
            Mode::FewShot => "FEW_SHOT",
        }
    }

    pub fn file_tag(self) -> &'static str {
        match self {
            Mode::ZeroShot => "zero_shot",
            Mode::FewShot => "few_shot",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which answers a prompt admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelScheme {
    /// Player one, player two, or both.
    HeadToHead,
    /// Any player by name, or no one.
    Named,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolBinding {
    pub pair_index: usize,
    pub player_one_name: String,
    pub player_two_name: String,
    pub group_noun: String,
    pub resolved: BTreeMap<String, String>,
    pub players: Vec<String>,
    pub scheme: LabelScheme,
}

pub const NO_ONE: &str = "no one";

impl SymbolBinding {
    /// Surface form of a label, as it appears inside the curly braces.
    pub fn answer_text(&self, label: ExpectedLabel) -> String {
        match label {
            ExpectedLabel::PlayerOne => self.player_one_name.clone(),
            ExpectedLabel::PlayerTwo => self.player_two_name.clone(),
            ExpectedLabel::Tie => format!("both {}s", self.group_noun),
            ExpectedLabel::NoWinner => NO_ONE.to_string(),
            ExpectedLabel::Named(i) => self
                .players
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("player #{i}")),
        }
    }

    /// Every legal answer for this binding.
    pub fn answer_menu(&self) -> Vec<ExpectedLabel> {
        match self.scheme {
            LabelScheme::HeadToHead => vec![
                ExpectedLabel::PlayerOne,
                ExpectedLabel::PlayerTwo,
                ExpectedLabel::Tie,
            ],
            LabelScheme::Named => (0..self.players.len())
                .map(ExpectedLabel::Named)
                .chain(std::iter::once(ExpectedLabel::NoWinner))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub instance_id: String,
    pub world_id: String,
    pub ruleset_name: String,
    pub mode: Mode,
    pub text: String,
    pub binding: SymbolBinding,
    pub events: Vec<EventRecord>,
    pub expected: ExpectedLabel,
    pub seed: u64,
    #[serde(default)]
    pub exemplar_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goat_doors: Option<BTreeSet<usize>>,
}

impl PromptInstance {
    /// The bare answer in curly braces, e.g. `{Team A}`.
    pub fn expected_answer(&self) -> String {
        format!("{{{}}}", self.binding.answer_text(self.expected))
    }
}

/// Sampled events of one game.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game {
    pub events: Vec<EventRecord>,
    pub goat_doors: Option<BTreeSet<usize>>,
}

pub fn sample_binding(
    spec: &WorldSpec,
    variant: &RulesetVariant,
    seed: u64,
) -> Result<SymbolBinding> {
    let mut rng = rng(seed);
    let mut resolved = BTreeMap::new();

    let (pair_index, players, scheme, roster_slots) = match &spec.roster {
        Roster::Paired {
            first_slot,
            second_slot,
            group_slot,
            pair_groups,
        } => {
            let first = slot_candidates(spec, first_slot)?;
            let second = slot_candidates(spec, second_slot)?;
            let pairs = first.len().min(second.len()).min(pair_groups.len());
            if pairs == 0 {
                return Err(Error::InvalidWorld("paired roster is empty".into()));
            }
            let i = rng.random_range(0..pairs);
            resolved.insert(first_slot.clone(), first[i].clone());
            resolved.insert(second_slot.clone(), second[i].clone());
            resolved.insert(group_slot.clone(), pair_groups[i].clone());
            (
                i,
                vec![first[i].clone(), second[i].clone()],
                LabelScheme::HeadToHead,
                vec![first_slot.as_str(), second_slot.as_str(), group_slot.as_str()],
            )
        }
        Roster::Numbered { prefix, .. } => {
            let count = spec
                .door
                .map(|d| d.player_count)
                .ok_or_else(|| Error::InvalidWorld("numbered roster needs a player count".into()))?;
            let players = (1..=count).map(|k| format!("{prefix} {k}")).collect();
            (0, players, LabelScheme::Named, Vec::new())
        }
    };

    for domain in &spec.slots {
        if roster_slots.contains(&domain.slot_name.as_str()) {
            continue;
        }
        let value = match variant.assignments.get(&domain.slot_name) {
            Some(Assignment::Fixed(v)) => {
                if !domain.contains(v) {
                    return Err(Error::IllegalCandidate {
                        slot: domain.slot_name.clone(),
                        value: v.clone(),
                    });
                }
                v.clone()
            }
            Some(Assignment::LeaveRandom { leave_random }) if !leave_random.is_empty() => {
                leave_random[rng.random_range(0..leave_random.len())].clone()
            }
            _ => domain.candidates[rng.random_range(0..domain.candidates.len())].clone(),
        };
        resolved.insert(domain.slot_name.clone(), value);
    }

    let group_noun = match &spec.roster {
        Roster::Paired { group_slot, .. } | Roster::Numbered { group_slot, .. } => resolved
            .get(group_slot)
            .cloned()
            .unwrap_or_else(|| "player".to_string()),
    };

    Ok(SymbolBinding {
        pair_index,
        player_one_name: players.first().cloned().unwrap_or_default(),
        player_two_name: players.get(1).cloned().unwrap_or_default(),
        group_noun,
        resolved,
        players,
        scheme,
    })
}

fn slot_candidates<'a>(spec: &'a WorldSpec, slot: &str) -> Result<&'a [String]> {
    spec.slot(slot)
        .map(|d| d.candidates.as_slice())
        .ok_or_else(|| Error::UnknownSlot(slot.to_string()))
}

/// Ten alternating shots, side one first, each a fair coin.
pub fn sample_commentary(seed: u64) -> Vec<EventRecord> {
    let mut rng = rng(seed);
    (0..10u32)
        .map(|i| EventRecord::Shot {
            ordinal: i + 1,
            shooter: if i % 2 == 0 { Shooter::One } else { Shooter::Two },
            outcome: if rng.random::<bool>() {
                ShotOutcome::Hit
            } else {
                ShotOutcome::Miss
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoorGame {
    pub events: Vec<EventRecord>,
    pub goat_doors: BTreeSet<usize>,
    pub label: ExpectedLabel,
}

/// Goat placement, player order and the opened doors are all uniform draws.
/// Players take turns in the drawn order.
pub fn sample_door_game(
    spec: &WorldSpec,
    variant: &RulesetVariant,
    seed: u64,
) -> Result<DoorGame> {
    let params = spec
        .door
        .ok_or_else(|| Error::InvalidWorld(format!("`{}` is not a door world", spec.world_id)))?;
    params.check()?;
    let mut rng = rng(seed);

    let mut doors: Vec<usize> = (1..=params.door_count).collect();
    doors.shuffle(&mut rng);
    let goat_doors: BTreeSet<usize> = doors[..params.goat_count].iter().copied().collect();

    let mut order: Vec<usize> = (0..params.player_count).collect();
    order.shuffle(&mut rng);

    let mut opened: Vec<usize> = (1..=params.door_count).collect();
    opened.shuffle(&mut rng);
    opened.truncate(params.opens_total);

    let events: Vec<EventRecord> = opened
        .iter()
        .enumerate()
        .map(|(k, door)| EventRecord::Opening {
            ordinal: k as u32 + 1,
            player: order[k % order.len()],
            door: *door,
        })
        .collect();
    let label = oracle::door_outcome(&oracle::openings(&events)?, &goat_doors, variant)?;
    Ok(DoorGame {
        events,
        goat_doors,
        label,
    })
}

pub fn sample_game(spec: &WorldSpec, variant: &RulesetVariant, seed: u64) -> Result<Game> {
    match (spec.oracle_id.as_str(), spec.sequence_policy) {
        (oracle::SOCCER_ORACLE, SequencePolicy::FixedAlternation) => Ok(Game {
            events: sample_commentary(seed),
            goat_doors: None,
        }),
        (oracle::DOOR_ORACLE, _) => {
            let g = sample_door_game(spec, variant, seed)?;
            Ok(Game {
                events: g.events,
                goat_doors: Some(g.goat_doors),
            })
        }
        (id, policy) => Err(Error::InvalidWorld(format!(
            "no game sampler for oracle `{id}` with {policy:?}"
        ))),
    }
}

fn fill(template: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<String> {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find(']')
            .ok_or_else(|| Error::UnresolvedPlaceholder(after.to_string()))?;
        let name = &after[..close];
        let value = lookup(name).ok_or_else(|| Error::UnresolvedPlaceholder(name.to_string()))?;
        out.push_str(&value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn world_field(spec: &WorldSpec, binding: &SymbolBinding, name: &str) -> Option<String> {
    if let Some(v) = binding.resolved.get(name) {
        return Some(v.clone());
    }
    let door = spec.door;
    match name {
        "PLAYER_ONE" => Some(binding.player_one_name.clone()),
        "PLAYER_COUNT" => door.map(|d| d.player_count.to_string()),
        "DOOR_COUNT" => door.map(|d| d.door_count.to_string()),
        "GOAT_COUNT" => door.map(|d| d.goat_count.to_string()),
        _ => None,
    }
}

fn render_event(
    spec: &WorldSpec,
    binding: &SymbolBinding,
    event: &EventRecord,
    goat_doors: Option<&BTreeSet<usize>>,
) -> Result<String> {
    let lookup = |name: &str| -> Option<String> {
        match (name, event) {
            ("SHOOTER", EventRecord::Shot { shooter, .. }) => Some(match shooter {
                Shooter::One => binding.player_one_name.clone(),
                Shooter::Two => binding.player_two_name.clone(),
            }),
            ("OUTCOME", EventRecord::Shot { outcome, .. }) => Some(outcome.verb().to_string()),
            ("PLAYER", EventRecord::Opening { player, .. }) => binding.players.get(*player).cloned(),
            ("DOOR", EventRecord::Opening { door, .. }) => Some(door.to_string()),
            ("FINDING", EventRecord::Opening { door, .. }) => {
                let goats = goat_doors?;
                Some(if goats.contains(door) {
                    let prize = binding
                        .resolved
                        .get(world::SLOT_PRIZE)
                        .map(String::as_str)
                        .unwrap_or("goat");
                    format!("a {prize}")
                } else {
                    "nothing".to_string()
                })
            }
            _ => world_field(spec, binding, name),
        }
    };
    fill(&spec.event_template, &lookup)
}

/// Renders the commentary lines alone, one per event.
pub fn render_commentary(
    spec: &WorldSpec,
    binding: &SymbolBinding,
    events: &[EventRecord],
    goat_doors: Option<&BTreeSet<usize>>,
) -> Result<Vec<String>> {
    events
        .iter()
        .map(|e| render_event(spec, binding, e, goat_doors))
        .collect()
}

pub fn instance_id(world_id: &str, ruleset: &str, seed: u64) -> String {
    format!("{world_id}/{ruleset}/{seed:016x}")
}

pub fn render_zero_shot(
    spec: &WorldSpec,
    variant: &RulesetVariant,
    binding: &SymbolBinding,
    game: &Game,
    seed: u64,
) -> Result<PromptInstance> {
    let lookup = |name: &str| world_field(spec, binding, name);
    let rules = fill(&spec.rules_template, &lookup)?;
    let question = fill(&spec.question_template, &lookup)?;
    let lines = render_commentary(spec, binding, &game.events, game.goat_doors.as_ref())?;
    let text = format!("{rules}\n\n{}\n\n{question}", lines.join("\n"));

    let expected = oracle::label_for(
        spec,
        &binding.resolved,
        &game.events,
        game.goat_doors.as_ref(),
    )?;

    Ok(PromptInstance {
        instance_id: instance_id(&spec.world_id, &variant.name, seed),
        world_id: spec.world_id.clone(),
        ruleset_name: variant.name.clone(),
        mode: Mode::ZeroShot,
        text,
        binding: binding.clone(),
        events: game.events.clone(),
        expected,
        seed,
        exemplar_ids: Vec::new(),
        goat_doors: game.goat_doors.clone(),
    })
}

pub const EXEMPLAR_COUNT: usize = 3;

/// Three solved `Q:`/`A:` pairs followed by the open query.
pub fn render_few_shot(
    query: &PromptInstance,
    exemplars: &[PromptInstance],
) -> Result<PromptInstance> {
    if exemplars.len() != EXEMPLAR_COUNT {
        return Err(Error::FewShot(format!(
            "expected {EXEMPLAR_COUNT} exemplars, got {}",
            exemplars.len()
        )));
    }
    for e in exemplars {
        if e.ruleset_name != query.ruleset_name {
            return Err(Error::FewShot(format!(
                "exemplar `{}` uses ruleset {} but the query uses {}",
                e.instance_id, e.ruleset_name, query.ruleset_name
            )));
        }
        if e.instance_id == query.instance_id {
            return Err(Error::FewShot(format!(
                "exemplar `{}` is the query itself",
                e.instance_id
            )));
        }
        if e.mode != Mode::ZeroShot {
            return Err(Error::FewShot(format!(
                "exemplar `{}` is not a zero-shot instance",
                e.instance_id
            )));
        }
    }

    let mut text = String::new();
    for e in exemplars {
        text.push_str("Q: ");
        text.push_str(&e.text);
        text.push_str("\nA: ");
        text.push_str(&e.expected_answer());
        text.push_str("\n\n");
    }
    text.push_str("Q: ");
    text.push_str(&query.text);
    text.push_str("\nA:");

    let exemplar_ids: Vec<String> = exemplars.iter().map(|e| e.instance_id.clone()).collect();
    let tag = hash_str(&exemplar_ids.join("|"));
    Ok(PromptInstance {
        instance_id: format!("{}#fs-{:012x}", query.instance_id, tag & 0xffff_ffff_ffff),
        mode: Mode::FewShot,
        text,
        exemplar_ids,
        ..query.clone()
    })
}

pub fn generate_batch(
    spec: &WorldSpec,
    variant: &RulesetVariant,
    n: usize,
    master_seed: u64,
) -> Result<Vec<PromptInstance>> {
    (0..n as u64)
        .map(|i| generate_instance(spec, variant, split_seed(master_seed, i)))
        .collect()
}

pub fn generate_instance(
    spec: &WorldSpec,
    variant: &RulesetVariant,
    seed: u64,
) -> Result<PromptInstance> {
    let binding = sample_binding(spec, variant, split_seed(seed, 0))?;
    let game = sample_game(spec, variant, split_seed(seed, 1))?;
    render_zero_shot(spec, variant, &binding, &game, seed)
}

/// Where few-shot queries come from.
#[derive(Debug, Clone, Copy)]
pub enum QuerySource<'a> {
    /// Drawn from the exemplar pool itself.
    Pool,
    /// Freshly generated for the pool's ruleset.
    Fresh {
        spec: &'a WorldSpec,
        variant: &'a RulesetVariant,
    },
}

const FRESH_QUERY_SALT: u64 = 0x6672_6573_685f_7173;

/// Builds `n` few-shot instances from a single-ruleset pool. Exemplars are
/// drawn uniformly without replacement from the pool minus the query.
pub fn assemble_few_shot_batch(
    pool: &[PromptInstance],
    n: usize,
    master_seed: u64,
    source: QuerySource<'_>,
) -> Result<Vec<PromptInstance>> {
    let Some(first) = pool.first() else {
        return Err(Error::FewShot("empty exemplar pool".into()));
    };
    if let Some(other) = pool.iter().find(|p| p.ruleset_name != first.ruleset_name) {
        return Err(Error::FewShot(format!(
            "pool mixes rulesets {} and {}",
            first.ruleset_name, other.ruleset_name
        )));
    }
    let needed = match source {
        QuerySource::Pool => EXEMPLAR_COUNT + 1,
        QuerySource::Fresh { .. } => EXEMPLAR_COUNT,
    };
    if pool.len() < needed {
        return Err(Error::FewShot(format!(
            "pool for {} has {} prompts, need at least {needed}",
            first.ruleset_name,
            pool.len()
        )));
    }

    let mut out = Vec::with_capacity(n);
    let mut seen = HashSet::new();
    let mut draw = 0u64;
    while out.len() < n {
        let mut rng = rng(split_seed(master_seed, draw));
        let index = draw;
        draw += 1;
        let query = match source {
            QuerySource::Pool => pool[rng.random_range(0..pool.len())].clone(),
            QuerySource::Fresh { spec, variant } => {
                generate_instance(spec, variant, split_seed(master_seed ^ FRESH_QUERY_SALT, index))?
            }
        };
        let candidates: Vec<&PromptInstance> = pool
            .iter()
            .filter(|p| p.instance_id != query.instance_id)
            .collect();
        let picks = rand::seq::index::sample(&mut rng, candidates.len(), EXEMPLAR_COUNT);
        let exemplars: Vec<PromptInstance> =
            picks.iter().map(|i| candidates[i].clone()).collect();
        let inst = render_few_shot(&query, &exemplars)?;
        if seen.insert(inst.instance_id.clone()) {
            out.push(inst);
        }
        if draw > (n as u64).saturating_mul(64) + 1024 {
            return Err(Error::FewShot(
                "could not draw enough distinct few-shot instances".into(),
            ));
        }
    }
    Ok(out)
}

/// Keeps door instances that have (or lack) a winner.
pub fn filter_by_outcome(instances: &[PromptInstance], has_winner: bool) -> Vec<PromptInstance> {
    instances
        .iter()
        .filter(|p| (p.expected != ExpectedLabel::NoWinner) == has_winner)
        .cloned()
        .collect()
}

/// Recovers the events from a rendered zero-shot text by matching each line
/// against every event the world can produce.
pub fn parse_commentary(
    spec: &WorldSpec,
    binding: &SymbolBinding,
    goat_doors: Option<&BTreeSet<usize>>,
    text: &str,
) -> Result<Vec<EventRecord>> {
    let mut events = Vec::new();
    for line in text.lines() {
        let ordinal = events.len() as u32 + 1;
        let candidates: Vec<EventRecord> = match spec.oracle_id.as_str() {
            oracle::SOCCER_ORACLE => {
                let shooter = if ordinal % 2 == 1 {
                    Shooter::One
                } else {
                    Shooter::Two
                };
                [ShotOutcome::Hit, ShotOutcome::Miss]
                    .into_iter()
                    .map(|outcome| EventRecord::Shot {
                        ordinal,
                        shooter,
                        outcome,
                    })
                    .collect()
            }
            _ => {
                let doors = spec.door.map(|d| d.door_count).unwrap_or(0);
                (0..binding.players.len())
                    .flat_map(|player| {
                        (1..=doors).map(move |door| EventRecord::Opening {
                            ordinal,
                            player,
                            door,
                        })
                    })
                    .collect()
            }
        };
        for c in candidates {
            if render_event(spec, binding, &c, goat_doors)? == line {
                events.push(c);
                break;
            }
        }
    }
    Ok(events)
}
