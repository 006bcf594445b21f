//! Ground truth for generated games.
//!
//! The soccer oracle counts, per side, the shots whose outcome matches the
//! scoring action and applies the comparator. Nouns (ball, net, score) never
//! enter the computation. The door oracle names the player of the first or
//! last goat opening.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::generator::{EventRecord, Shooter, ShotOutcome};
use crate::world::{self, ExpectedLabel, RulesetVariant, WorldSpec};
use crate::{Error, Result};

pub const SOCCER_ORACLE: &str = "soccer_winner";
pub const DOOR_ORACLE: &str = "door_goat";

pub fn registered_oracles() -> &'static [&'static str] {
    &[SOCCER_ORACLE, DOOR_ORACLE]
}

pub fn is_registered(oracle_id: &str) -> bool {
    registered_oracles().contains(&oracle_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    Most,
    Least,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoccerRules {
    pub scoring: ShotOutcome,
    pub comparator: Comparator,
}

impl SoccerRules {
    pub const REAL: SoccerRules = SoccerRules {
        scoring: ShotOutcome::Hit,
        comparator: Comparator::Most,
    };

    pub fn from_lookup<'a>(lookup: impl Fn(&str) -> Option<&'a str>) -> Result<Self> {
        let scoring = match lookup(world::SLOT_ACTION) {
            Some("hits") => ShotOutcome::Hit,
            Some("misses") => ShotOutcome::Miss,
            other => return Err(unresolved(world::SLOT_ACTION, other)),
        };
        let comparator = match lookup(world::SLOT_COMPARATOR) {
            Some("most") => Comparator::Most,
            Some("least") => Comparator::Least,
            other => return Err(unresolved(world::SLOT_COMPARATOR, other)),
        };
        Ok(SoccerRules {
            scoring,
            comparator,
        })
    }

    pub fn from_variant(variant: &RulesetVariant) -> Result<Self> {
        Self::from_lookup(|slot| variant.fixed(slot))
    }

    pub fn from_resolved(resolved: &BTreeMap<String, String>) -> Result<Self> {
        Self::from_lookup(|slot| resolved.get(slot).map(String::as_str))
    }
}

fn unresolved(slot: &str, got: Option<&str>) -> Error {
    match got {
        Some(v) => Error::IllegalCandidate {
            slot: slot.to_string(),
            value: v.to_string(),
        },
        None => Error::UnknownSlot(slot.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoatRule {
    First,
    Last,
}

impl GoatRule {
    pub fn from_lookup<'a>(lookup: impl Fn(&str) -> Option<&'a str>) -> Result<Self> {
        match lookup(world::SLOT_ORDER) {
            Some("first") => Ok(GoatRule::First),
            Some("last") => Ok(GoatRule::Last),
            other => Err(unresolved(world::SLOT_ORDER, other)),
        }
    }

    pub fn from_variant(variant: &RulesetVariant) -> Result<Self> {
        Self::from_lookup(|slot| variant.fixed(slot))
    }
}

/// Checks the shape of a soccer commentary: ten shots, alternating, side
/// one first.
pub fn check_soccer_events(events: &[EventRecord]) -> Result<()> {
    if events.len() != 10 {
        return Err(Error::MalformedEvents(format!(
            "expected 10 shots, got {}",
            events.len()
        )));
    }
    for (i, e) in events.iter().enumerate() {
        let EventRecord::Shot {
            ordinal, shooter, ..
        } = e
        else {
            return Err(Error::MalformedEvents(format!("event {} is not a shot", i + 1)));
        };
        let want = if i % 2 == 0 { Shooter::One } else { Shooter::Two };
        if *shooter != want || *ordinal as usize != i + 1 {
            return Err(Error::MalformedEvents(format!(
                "event {} out of order (ordinal {ordinal}, shooter {shooter:?})",
                i + 1
            )));
        }
    }
    Ok(())
}

pub fn soccer_outcome_with(events: &[EventRecord], rules: SoccerRules) -> Result<ExpectedLabel> {
    check_soccer_events(events)?;
    let (mut one, mut two) = (0u32, 0u32);
    for e in events {
        if let EventRecord::Shot {
            shooter, outcome, ..
        } = e
        {
            if *outcome == rules.scoring {
                match shooter {
                    Shooter::One => one += 1,
                    Shooter::Two => two += 1,
                }
            }
        }
    }
    Ok(match (one.cmp(&two), rules.comparator) {
        (std::cmp::Ordering::Equal, _) => ExpectedLabel::Tie,
        (std::cmp::Ordering::Greater, Comparator::Most)
        | (std::cmp::Ordering::Less, Comparator::Least) => ExpectedLabel::PlayerOne,
        _ => ExpectedLabel::PlayerTwo,
    })
}

pub fn soccer_outcome(events: &[EventRecord], variant: &RulesetVariant) -> Result<ExpectedLabel> {
    soccer_outcome_with(events, SoccerRules::from_variant(variant)?)
}

/// `openings` are `(player_index, door)` pairs in the order they happened.
pub fn door_outcome_with(
    openings: &[(usize, usize)],
    goat_doors: &BTreeSet<usize>,
    rule: GoatRule,
) -> Result<ExpectedLabel> {
    let mut seen = BTreeSet::new();
    for (_, door) in openings {
        if !seen.insert(*door) {
            return Err(Error::MalformedEvents(format!("door {door} opened twice")));
        }
    }
    let mut goats = openings.iter().filter(|(_, d)| goat_doors.contains(d));
    let hit = match rule {
        GoatRule::First => goats.next(),
        GoatRule::Last => goats.next_back(),
    };
    Ok(match hit {
        Some((player, _)) => ExpectedLabel::Named(*player),
        None => ExpectedLabel::NoWinner,
    })
}

pub fn door_outcome(
    openings: &[(usize, usize)],
    goat_doors: &BTreeSet<usize>,
    variant: &RulesetVariant,
) -> Result<ExpectedLabel> {
    door_outcome_with(openings, goat_doors, GoatRule::from_variant(variant)?)
}

/// Label for a fully bound game, dispatching on the world's oracle. Rules are
/// read from the binding so variants that leave a rule slot random still get
/// the right answer.
pub fn label_for(
    spec: &WorldSpec,
    resolved: &BTreeMap<String, String>,
    events: &[EventRecord],
    goat_doors: Option<&BTreeSet<usize>>,
) -> Result<ExpectedLabel> {
    match spec.oracle_id.as_str() {
        SOCCER_ORACLE => soccer_outcome_with(events, SoccerRules::from_resolved(resolved)?),
        DOOR_ORACLE => {
            let goats = goat_doors
                .ok_or_else(|| Error::MalformedEvents("door game without goat doors".into()))?;
            let rule = GoatRule::from_lookup(|s| resolved.get(s).map(String::as_str))?;
            door_outcome_with(&openings(events)?, goats, rule)
        }
        other => Err(Error::InvalidWorld(format!("oracle `{other}` is not registered"))),
    }
}

pub fn openings(events: &[EventRecord]) -> Result<Vec<(usize, usize)>> {
    events
        .iter()
        .map(|e| match e {
            EventRecord::Opening { player, door, .. } => Ok((*player, *door)),
            EventRecord::Shot { .. } => Err(Error::MalformedEvents(
                "shot event in a door game".into(),
            )),
        })
        .collect()
}

/// Soccer commentary for the ten outcome bits of `mask` (bit i = shot i+1
/// is a hit).
pub fn soccer_events_from_mask(mask: u16) -> Vec<EventRecord> {
    (0..10)
        .map(|i| EventRecord::Shot {
            ordinal: i + 1,
            shooter: if i % 2 == 0 { Shooter::One } else { Shooter::Two },
            outcome: if mask & (1 << i) != 0 {
                ShotOutcome::Hit
            } else {
                ShotOutcome::Miss
            },
        })
        .collect()
}

pub fn all_soccer_sequences() -> impl Iterator<Item = Vec<EventRecord>> {
    (0u16..1024).map(soccer_events_from_mask)
}

/// Exchanges HIT and MISS in every shot.
pub fn flip(events: &[EventRecord]) -> Vec<EventRecord> {
    events
        .iter()
        .map(|e| match *e {
            EventRecord::Shot {
                ordinal,
                shooter,
                outcome,
            } => EventRecord::Shot {
                ordinal,
                shooter,
                outcome: match outcome {
                    ShotOutcome::Hit => ShotOutcome::Miss,
                    ShotOutcome::Miss => ShotOutcome::Hit,
                },
            },
            other => other,
        })
        .collect()
}

/// Exchanges the two sides' outcomes, keeping the alternation intact.
pub fn swap_sides(events: &[EventRecord]) -> Vec<EventRecord> {
    let mut out = events.to_vec();
    for pair in out.chunks_mut(2) {
        if let [EventRecord::Shot { outcome: a, .. }, EventRecord::Shot { outcome: b, .. }] = pair
        {
            std::mem::swap(a, b);
        }
    }
    out
}

pub fn swap_label(label: ExpectedLabel) -> ExpectedLabel {
    match label {
        ExpectedLabel::PlayerOne => ExpectedLabel::PlayerTwo,
        ExpectedLabel::PlayerTwo => ExpectedLabel::PlayerOne,
        other => other,
    }
}

pub fn outcome_string(events: &[EventRecord]) -> String {
    events
        .iter()
        .map(|e| match e {
            EventRecord::Shot {
                outcome: ShotOutcome::Hit,
                ..
            } => 'H',
            EventRecord::Shot {
                outcome: ShotOutcome::Miss,
                ..
            } => 'M',
            EventRecord::Opening { .. } => '?',
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub relation: String,
    pub input: String,
    pub expected: ExpectedLabel,
    pub got: ExpectedLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub checked_space_size: usize,
    pub violations: Vec<Violation>,
    /// REAL label counts over the checked space.
    pub real_distribution: BTreeMap<ExpectedLabel, usize>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn flip_equivalence_check() -> OracleReport {
    flip_equivalence_check_with(|events, rules| {
        soccer_outcome_with(events, rules).expect("enumerated sequences are well-formed")
    })
}

/// Runs the variant-algebra checks against an arbitrary soccer oracle.
///
/// Relations, for every sequence `e` of the 1024:
/// `MISSING(e) = REAL(flip(e))`, `MISS_SWITCH(e) = MISSING(e)`,
/// `SWITCH(e) = REAL(e)`, `LEAST(e)` is `REAL(e)` with the winner swapped,
/// and swapping the sides swaps the winner under every variant.
pub fn flip_equivalence_check_with(
    oracle: impl Fn(&[EventRecord], SoccerRules) -> ExpectedLabel,
) -> OracleReport {
    let variants = world::ruleset_registry(world::SOCCER_WORLD).expect("built-in world");
    let rules_of = |name: &str| {
        let v = variants
            .iter()
            .find(|v| v.name == name)
            .expect("built-in variant");
        SoccerRules::from_variant(v).expect("built-in variant has fixed rules")
    };
    let real = rules_of("REAL");
    let missing = rules_of("MISSING");
    let least = rules_of("LEAST");
    let switch = rules_of("SWITCH");
    let miss_switch = rules_of("MISS_SWITCH");

    let mut violations = Vec::new();
    let mut real_distribution = BTreeMap::new();
    let mut checked = 0;
    let mut check = |relation: &str, e: &[EventRecord], expected: ExpectedLabel, got: ExpectedLabel| {
        if expected != got {
            violations.push(Violation {
                relation: relation.to_string(),
                input: outcome_string(e),
                expected,
                got,
            });
        }
    };

    for e in all_soccer_sequences() {
        checked += 1;
        let r = oracle(&e, real);
        *real_distribution.entry(r).or_insert(0) += 1;
        let m = oracle(&e, missing);
        check("MISSING(e) = REAL(flip(e))", &e, oracle(&flip(&e), real), m);
        check("MISS_SWITCH(e) = MISSING(e)", &e, m, oracle(&e, miss_switch));
        check("SWITCH(e) = REAL(e)", &e, r, oracle(&e, switch));
        check("LEAST(e) = swap(REAL(e))", &e, swap_label(r), oracle(&e, least));
        let swapped = swap_sides(&e);
        for (name, rules) in [
            ("REAL", real),
            ("MISSING", missing),
            ("LEAST", least),
            ("SWITCH", switch),
            ("MISS_SWITCH", miss_switch),
        ] {
            check(
                &format!("{name}(swap_sides(e)) = swap({name}(e))"),
                &e,
                swap_label(oracle(&e, rules)),
                oracle(&swapped, rules),
            );
        }
    }

    OracleReport {
        checked_space_size: checked,
        violations,
        real_distribution,
    }
}
