//! World model: symbol slots, templates, ruleset variants and the two
//! built-in worlds (penalty-shootout soccer and the door game).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::oracle;
use crate::{Error, Result};

pub const SOCCER_WORLD: &str = "soccer";
pub const DOOR_WORLD: &str = "doors";

pub const SLOT_PLAYER: &str = "Symbol_Player";
pub const SLOT_PLAYER_1: &str = "Symbol_Player_1";
pub const SLOT_PLAYER_2: &str = "Symbol_Player_2";
pub const SLOT_BALL: &str = "Symbol_Ball";
pub const SLOT_NET: &str = "Symbol_Net";
pub const SLOT_ACTION: &str = "Symbol_Action";
pub const SLOT_COMPARATOR: &str = "Symbol_Comparator";
pub const SLOT_SCORE: &str = "Symbol_Score";
pub const SLOT_DOOR: &str = "Symbol_Door";
pub const SLOT_PRIZE: &str = "Symbol_Prize";
pub const SLOT_ORDER: &str = "Symbol_Order";

/// Which part of the world a slot belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChangeTag {
    Symbols,
    Actions,
    Rules,
}

impl ChangeTag {
    /// Default slot classification: the action slot is an action, the
    /// outcome-deciding slots are rules, everything else is a symbol.
    pub fn for_slot(slot_name: &str) -> ChangeTag {
        match slot_name {
            SLOT_ACTION => ChangeTag::Actions,
            SLOT_COMPARATOR | SLOT_ORDER => ChangeTag::Rules,
            _ => ChangeTag::Symbols,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SequencePolicy {
    FixedAlternation,
    RandomizedOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDomain {
    pub slot_name: String,
    pub candidates: Vec<String>,
    /// Overrides [`ChangeTag::for_slot`] when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_tag: Option<ChangeTag>,
}

impl SymbolDomain {
    pub fn new(slot_name: &str, candidates: &[&str]) -> Self {
        SymbolDomain {
            slot_name: slot_name.to_string(),
            candidates: candidates.iter().map(|c| c.to_string()).collect(),
            change_tag: None,
        }
    }

    pub fn tag(&self) -> ChangeTag {
        self.change_tag
            .unwrap_or_else(|| ChangeTag::for_slot(&self.slot_name))
    }

    pub fn contains(&self, value: &str) -> bool {
        self.candidates.iter().any(|c| c == value)
    }
}

/// How player names are bound for an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Roster {
    /// Two players, named from the same index of two slots. `pair_groups[i]`
    /// is the group noun (a candidate of `group_slot`) used with pair `i`.
    Paired {
        first_slot: String,
        second_slot: String,
        group_slot: String,
        pair_groups: Vec<String>,
    },
    /// `prefix 1` .. `prefix N`, with N taken from the door parameters.
    Numbered { prefix: String, group_slot: String },
}

impl Roster {
    pub fn slots(&self) -> Vec<&str> {
        match self {
            Roster::Paired {
                first_slot,
                second_slot,
                group_slot,
                ..
            } => vec![first_slot, second_slot, group_slot],
            Roster::Numbered { group_slot, .. } => vec![group_slot],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoorParams {
    pub door_count: usize,
    pub goat_count: usize,
    pub player_count: usize,
    pub opens_total: usize,
}

impl Default for DoorParams {
    fn default() -> Self {
        DoorParams {
            door_count: 5,
            goat_count: 2,
            player_count: 3,
            opens_total: 5,
        }
    }
}

impl DoorParams {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDoorConfig(m));
        if self.door_count == 0 || self.goat_count == 0 || self.player_count == 0 {
            return bad("door, goat and player counts must be positive".into());
        }
        if self.opens_total == 0 {
            return bad("opens_total must be positive".into());
        }
        if self.goat_count >= self.door_count {
            return bad(format!(
                "goat_count {} must be below door_count {}",
                self.goat_count, self.door_count
            ));
        }
        if self.opens_total > self.door_count {
            return bad(format!(
                "opens_total {} exceeds door_count {}",
                self.opens_total, self.door_count
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub world_id: String,
    pub slots: Vec<SymbolDomain>,
    pub rules_template: String,
    pub event_template: String,
    pub question_template: String,
    pub oracle_id: String,
    pub sequence_policy: SequencePolicy,
    pub roster: Roster,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub door: Option<DoorParams>,
}

impl WorldSpec {
    pub fn slot(&self, name: &str) -> Option<&SymbolDomain> {
        self.slots.iter().find(|s| s.slot_name == name)
    }
}

/// Value of one slot in a ruleset variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Assignment {
    Fixed(String),
    /// Drawn per instance, uniformly from `leave_random` (or from every
    /// candidate of the slot when the list is empty).
    LeaveRandom { leave_random: Vec<String> },
}

impl Assignment {
    pub fn fixed(v: &str) -> Self {
        Assignment::Fixed(v.to_string())
    }

    pub fn random_among(vs: &[&str]) -> Self {
        Assignment::LeaveRandom {
            leave_random: vs.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn as_fixed(&self) -> Option<&str> {
        match self {
            Assignment::Fixed(v) => Some(v),
            Assignment::LeaveRandom { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulesetVariant {
    pub name: String,
    pub assignments: BTreeMap<String, Assignment>,
    pub change_tags: BTreeSet<ChangeTag>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl RulesetVariant {
    pub fn fixed(&self, slot: &str) -> Option<&str> {
        self.assignments.get(slot).and_then(Assignment::as_fixed)
    }

    /// Same assignments and tags, ignoring name and description.
    pub fn equivalent(&self, other: &RulesetVariant) -> bool {
        self.assignments == other.assignments && self.change_tags == other.change_tags
    }
}

/// Outcome of a game as the oracle sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExpectedLabel {
    PlayerOne,
    PlayerTwo,
    Tie,
    NoWinner,
    /// Zero-based player index (door world).
    Named(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// Bracketed identifiers (`[Symbol_Ball]`) in order of appearance.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('[') {
        let after = &rest[open + 1..];
        match after.find(']') {
            Some(close) => {
                let name = &after[..close];
                if !name.is_empty()
                    && name
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                {
                    out.push(name.to_string());
                }
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

pub fn builtin_soccer_world() -> WorldSpec {
    WorldSpec {
        world_id: SOCCER_WORLD.to_string(),
        slots: vec![
            SymbolDomain::new(SLOT_PLAYER, &["team", "player"]),
            SymbolDomain::new(SLOT_PLAYER_1, &["Team A", "Team 1", "Adam"]),
            SymbolDomain::new(SLOT_PLAYER_2, &["Team B", "Team 2", "Bob"]),
            SymbolDomain::new(SLOT_BALL, &["player", "ball", "net"]),
            SymbolDomain::new(SLOT_NET, &["net", "ball"]),
            SymbolDomain::new(SLOT_ACTION, &["hits", "misses"]),
            SymbolDomain::new(SLOT_COMPARATOR, &["most", "least"]),
            SymbolDomain::new(SLOT_SCORE, &["score", "point", "car", "ice cream"]),
        ],
        rules_template: "Absurd soccer is played by two [Symbol_Player]s. In one match of this game, \
each [Symbol_Player] takes a turn to shoot a [Symbol_Ball] five times at a [Symbol_Net]. \
A [Symbol_Player] can shoot only once in a match. When one [Symbol_Player] shoots, the other team \
defends the [Symbol_Net]. If the [Symbol_Player] that makes the shot [Symbol_Action] the [Symbol_Net], \
that [Symbol_Player] gets one [Symbol_Score]. At the end of the match, the team having the \
[Symbol_Comparator] [Symbol_Score]s wins.\n\nHere is the match commentary for a game of absurd soccer:"
            .to_string(),
        event_template: "[SHOOTER] shoots the [Symbol_Ball] and [OUTCOME] the [Symbol_Net]."
            .to_string(),
        question_template: "Who won the game? Answer '[Symbol_Player_1]' if [Symbol_Player_1] wins, \
'[Symbol_Player_2]' if [Symbol_Player_2] wins, and 'both [Symbol_Player]s' if both [Symbol_Player]s win. \
Please work out your reasoning process for the answer, and place your answer within two curly \
brackets (ex. {[Symbol_Player_1]})."
            .to_string(),
        oracle_id: oracle::SOCCER_ORACLE.to_string(),
        sequence_policy: SequencePolicy::FixedAlternation,
        roster: Roster::Paired {
            first_slot: SLOT_PLAYER_1.to_string(),
            second_slot: SLOT_PLAYER_2.to_string(),
            group_slot: SLOT_PLAYER.to_string(),
            pair_groups: vec!["team".into(), "team".into(), "player".into()],
        },
        door: None,
    }
}

pub fn builtin_door_world(
    door_count: usize,
    goat_count: usize,
    player_count: usize,
    opens_total: usize,
) -> Result<WorldSpec> {
    let params = DoorParams {
        door_count,
        goat_count,
        player_count,
        opens_total,
    };
    params.check()?;
    Ok(WorldSpec {
        world_id: DOOR_WORLD.to_string(),
        slots: vec![
            SymbolDomain::new(SLOT_PLAYER, &["player"]),
            SymbolDomain::new(SLOT_DOOR, &["door"]),
            SymbolDomain::new(SLOT_PRIZE, &["goat"]),
            SymbolDomain::new(SLOT_ORDER, &["first", "last"]),
        ],
        rules_template: "Absurd doors is played by [PLAYER_COUNT] [Symbol_Player]s. There are \
[DOOR_COUNT] closed [Symbol_Door]s, numbered 1 to [DOOR_COUNT], and [GOAT_COUNT] of them have a \
[Symbol_Prize] behind them. The [Symbol_Player]s take turns opening [Symbol_Door]s, and each \
[Symbol_Door] is opened at most once. The [Symbol_Player] who opens a [Symbol_Door] with a \
[Symbol_Prize] behind it [Symbol_Order] wins. If no [Symbol_Player] opens a [Symbol_Door] with a \
[Symbol_Prize] behind it, no one wins.\n\nHere is the commentary for a game of absurd doors:"
            .to_string(),
        event_template: "[PLAYER] opens [Symbol_Door] [DOOR] and finds [FINDING].".to_string(),
        question_template: "Who won the game? Answer with the name of the winning [Symbol_Player], \
or 'no one' if no [Symbol_Player] wins. Please work out your reasoning process for the answer, and \
place your answer within two curly brackets (ex. {[PLAYER_ONE]})."
            .to_string(),
        oracle_id: oracle::DOOR_ORACLE.to_string(),
        sequence_policy: SequencePolicy::RandomizedOrder,
        roster: Roster::Numbered {
            prefix: "Player".to_string(),
            group_slot: SLOT_PLAYER.to_string(),
        },
        door: Some(params),
    })
}

fn variant(
    name: &str,
    description: &str,
    assignments: &[(&str, Assignment)],
    tags: &[ChangeTag],
) -> RulesetVariant {
    RulesetVariant {
        name: name.to_string(),
        assignments: assignments
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
        change_tags: tags.iter().copied().collect(),
        description: description.to_string(),
    }
}

fn soccer_variants() -> Vec<RulesetVariant> {
    use Assignment as A;
    use ChangeTag::*;
    let base = |ball: &str, net: &str, action: &str, cmp: &str, score: A| {
        vec![
            (SLOT_BALL, A::fixed(ball)),
            (SLOT_NET, A::fixed(net)),
            (SLOT_ACTION, A::fixed(action)),
            (SLOT_COMPARATOR, A::fixed(cmp)),
            (SLOT_SCORE, score),
        ]
    };
    let points = || A::random_among(&["score", "point"]);
    vec![
        variant(
            "REAL",
            "conventional scoring: a hit earns a point, most points wins",
            &base("ball", "net", "hits", "most", points()),
            &[],
        ),
        variant(
            "MISSING",
            "a miss earns the point instead of a hit",
            &base("ball", "net", "misses", "most", points()),
            &[Actions],
        ),
        variant(
            "LEAST",
            "the side with the lower score wins",
            &base("ball", "net", "hits", "least", points()),
            &[Rules],
        ),
        variant(
            "ICE_CREAM",
            "hits earn ice creams instead of points",
            &base("ball", "net", "hits", "most", A::fixed("ice cream")),
            &[Symbols],
        ),
        variant(
            "CAR",
            "hits earn cars instead of points",
            &base("ball", "net", "hits", "most", A::fixed("car")),
            &[Symbols],
        ),
        variant(
            "SWITCH",
            "players shoot the net into the ball",
            &base("net", "ball", "hits", "most", points()),
            &[Symbols],
        ),
        variant(
            "MISS_SWITCH",
            "MISSING and SWITCH together",
            &base("net", "ball", "misses", "most", points()),
            &[Actions, Symbols],
        ),
    ]
}

fn door_variants() -> Vec<RulesetVariant> {
    use Assignment as A;
    let base = |order: &str| {
        vec![
            (SLOT_PLAYER, A::fixed("player")),
            (SLOT_DOOR, A::fixed("door")),
            (SLOT_PRIZE, A::fixed("goat")),
            (SLOT_ORDER, A::fixed(order)),
        ]
    };
    vec![
        variant(
            "DO_RANDOM",
            "the first player to find a goat wins",
            &base("first"),
            &[],
        ),
        variant(
            "DO_RANDOM_LAST",
            "the last player to find a goat wins",
            &base("last"),
            &[ChangeTag::Rules],
        ),
    ]
}

pub fn ruleset_registry(world_id: &str) -> Result<Vec<RulesetVariant>> {
    match world_id {
        SOCCER_WORLD => Ok(soccer_variants()),
        DOOR_WORLD => Ok(door_variants()),
        other => Err(Error::UnknownWorld(other.to_string())),
    }
}

/// Applies `overrides` on top of `base`. Overrides that restate the base
/// value are ignored; each changed slot contributes its change tag.
pub fn compose_variant(
    spec: &WorldSpec,
    base: &RulesetVariant,
    overrides: &BTreeMap<String, String>,
) -> Result<RulesetVariant> {
    let mut out = base.clone();
    let mut changed = Vec::new();
    for (slot, value) in overrides {
        let domain = spec
            .slot(slot)
            .ok_or_else(|| Error::UnknownSlot(slot.clone()))?;
        if !domain.contains(value) {
            return Err(Error::IllegalCandidate {
                slot: slot.clone(),
                value: value.clone(),
            });
        }
        if base.fixed(slot) == Some(value.as_str()) {
            continue;
        }
        out.assignments
            .insert(slot.clone(), Assignment::Fixed(value.clone()));
        out.change_tags.insert(domain.tag());
        changed.push(format!("{slot}={value}"));
    }
    if !changed.is_empty() {
        out.name = format!("{}+{}", base.name, changed.join(","));
        out.description.clear();
    }
    Ok(out)
}

fn reserved_world_fields(oracle_id: &str) -> &'static [&'static str] {
    match oracle_id {
        oracle::DOOR_ORACLE => &["PLAYER_COUNT", "DOOR_COUNT", "GOAT_COUNT", "PLAYER_ONE"],
        oracle::SOCCER_ORACLE => &["PLAYER_ONE"],
        // unknown oracle: already diagnosed, so accept any reserved name
        _ => &["PLAYER_COUNT", "DOOR_COUNT", "GOAT_COUNT", "PLAYER_ONE"],
    }
}

fn reserved_event_fields(oracle_id: &str) -> &'static [&'static str] {
    match oracle_id {
        oracle::SOCCER_ORACLE => &["SHOOTER", "OUTCOME"],
        oracle::DOOR_ORACLE => &["PLAYER", "DOOR", "FINDING"],
        _ => &["SHOOTER", "OUTCOME", "PLAYER", "DOOR", "FINDING"],
    }
}

/// Structural checks on a world. An empty list means the world is usable.
pub fn validate_world(spec: &WorldSpec) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut seen = HashSet::new();
    for slot in &spec.slots {
        if !seen.insert(slot.slot_name.as_str()) {
            diags.push(Diagnostic::new(&slot.slot_name, "duplicate slot name"));
        }
        if slot.candidates.is_empty() {
            diags.push(Diagnostic::new(&slot.slot_name, "slot has no candidates"));
        }
        let mut cands = HashSet::new();
        for c in &slot.candidates {
            if !cands.insert(c.as_str()) {
                diags.push(Diagnostic::new(
                    &slot.slot_name,
                    format!("duplicate candidate `{c}`"),
                ));
            }
        }
    }

    let registered = oracle::is_registered(&spec.oracle_id);
    if !registered {
        diags.push(Diagnostic::new(
            &spec.oracle_id,
            "oracle is not registered",
        ));
    }

    let world_fields = reserved_world_fields(&spec.oracle_id);
    let event_fields = reserved_event_fields(&spec.oracle_id);
    let templates = [
        ("rules_template", &spec.rules_template, false),
        ("event_template", &spec.event_template, true),
        ("question_template", &spec.question_template, false),
    ];
    for (which, template, is_event) in templates {
        for name in placeholders(template) {
            let known = spec.slot(&name).is_some()
                || world_fields.contains(&name.as_str())
                || (is_event && event_fields.contains(&name.as_str()));
            if !known {
                diags.push(Diagnostic::new(
                    &name,
                    format!("placeholder in {which} names no slot or reserved field"),
                ));
            }
        }
    }

    for slot in spec.roster.slots() {
        if spec.slot(slot).is_none() {
            diags.push(Diagnostic::new(slot, "roster refers to a missing slot"));
        }
    }
    if let Roster::Paired {
        first_slot,
        second_slot,
        group_slot,
        pair_groups,
    } = &spec.roster
    {
        if let (Some(a), Some(b)) = (spec.slot(first_slot), spec.slot(second_slot)) {
            if a.candidates.len() != b.candidates.len() || a.candidates.len() != pair_groups.len()
            {
                diags.push(Diagnostic::new(
                    first_slot,
                    "paired roster slots and pair_groups must have equal lengths",
                ));
            }
        }
        if let Some(g) = spec.slot(group_slot) {
            for noun in pair_groups {
                if !g.contains(noun) {
                    diags.push(Diagnostic::new(
                        group_slot,
                        format!("group noun `{noun}` is not a candidate"),
                    ));
                }
            }
        }
    }

    match spec.oracle_id.as_str() {
        oracle::SOCCER_ORACLE => {
            require_candidates(spec, SLOT_ACTION, &["hits", "misses"], &mut diags);
            require_candidates(spec, SLOT_COMPARATOR, &["most", "least"], &mut diags);
            if !matches!(spec.roster, Roster::Paired { .. }) {
                diags.push(Diagnostic::new("roster", "soccer worlds need a paired roster"));
            }
        }
        oracle::DOOR_ORACLE => {
            require_candidates(spec, SLOT_ORDER, &["first", "last"], &mut diags);
            match &spec.door {
                Some(p) => {
                    if let Err(e) = p.check() {
                        diags.push(Diagnostic::new("door", e.to_string()));
                    }
                }
                None => diags.push(Diagnostic::new("door", "door worlds need door parameters")),
            }
        }
        _ => {}
    }
    diags
}

fn require_candidates(spec: &WorldSpec, slot: &str, allowed: &[&str], diags: &mut Vec<Diagnostic>) {
    match spec.slot(slot) {
        None => diags.push(Diagnostic::new(slot, "slot required by the oracle is missing")),
        Some(d) => {
            for c in &d.candidates {
                if !allowed.contains(&c.as_str()) {
                    diags.push(Diagnostic::new(
                        slot,
                        format!("candidate `{c}` has no meaning for the oracle"),
                    ));
                }
            }
        }
    }
}

pub fn validate_variant(spec: &WorldSpec, variant: &RulesetVariant) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let roster_slots = spec.roster.slots();
    for (slot, assignment) in &variant.assignments {
        let Some(domain) = spec.slot(slot) else {
            diags.push(Diagnostic::new(slot, "variant assigns an unknown slot"));
            continue;
        };
        if roster_slots.contains(&slot.as_str()) && !matches!(spec.roster, Roster::Numbered { .. })
        {
            diags.push(Diagnostic::new(slot, "slot is bound by the roster"));
            continue;
        }
        let values: Vec<&String> = match assignment {
            Assignment::Fixed(v) => vec![v],
            Assignment::LeaveRandom { leave_random } => leave_random.iter().collect(),
        };
        for v in values {
            if !domain.contains(v) {
                diags.push(Diagnostic::new(
                    slot,
                    format!("`{v}` is not a candidate"),
                ));
            }
        }
    }
    diags
}

/// A world together with its ruleset variants; the JSON document format for
/// custom worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldDefinition {
    pub spec: WorldSpec,
    pub variants: Vec<RulesetVariant>,
}

impl WorldDefinition {
    pub fn builtin(world_id: &str) -> Result<Self> {
        let spec = match world_id {
            SOCCER_WORLD => builtin_soccer_world(),
            DOOR_WORLD => {
                let p = DoorParams::default();
                builtin_door_world(p.door_count, p.goat_count, p.player_count, p.opens_total)?
            }
            other => return Err(Error::UnknownWorld(other.to_string())),
        };
        Ok(WorldDefinition {
            variants: ruleset_registry(world_id)?,
            spec,
        })
    }

    pub fn doors(params: DoorParams) -> Result<Self> {
        Ok(WorldDefinition {
            spec: builtin_door_world(
                params.door_count,
                params.goat_count,
                params.player_count,
                params.opens_total,
            )?,
            variants: door_variants(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let def: WorldDefinition = serde_json::from_str(text)?;
        def.validate()?;
        Ok(def)
    }

    pub fn validate(&self) -> Result<()> {
        let mut diags = validate_world(&self.spec);
        let mut names = HashSet::new();
        for v in &self.variants {
            if !names.insert(v.name.as_str()) {
                diags.push(Diagnostic::new(&v.name, "duplicate variant name"));
            }
            diags.extend(validate_variant(&self.spec, v));
        }
        if diags.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            Err(Error::InvalidWorld(msgs.join("; ")))
        }
    }

    pub fn variant(&self, name: &str) -> Result<&RulesetVariant> {
        self.variants
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownRuleset {
                world: self.spec.world_id.clone(),
                ruleset: name.to_string(),
            })
    }

    pub fn variant_names(&self) -> Vec<String> {
        self.variants.iter().map(|v| v.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soccer_variant(name: &str) -> RulesetVariant {
        ruleset_registry(SOCCER_WORLD)
            .unwrap()
            .into_iter()
            .find(|v| v.name == name)
            .unwrap()
    }

    #[test]
    fn soccer_world_slots() {
        let spec = builtin_soccer_world();
        assert_eq!(
            spec.slot(SLOT_COMPARATOR).unwrap().candidates,
            vec!["most", "least"]
        );
        assert_eq!(
            spec.slot(SLOT_SCORE).unwrap().candidates,
            vec!["score", "point", "car", "ice cream"]
        );
        assert_eq!(
            spec.slot(SLOT_BALL).unwrap().candidates,
            vec!["player", "ball", "net"]
        );
        assert!(placeholders(&spec.rules_template).contains(&SLOT_SCORE.to_string()));
        assert_eq!(spec.sequence_policy, SequencePolicy::FixedAlternation);
        assert!(validate_world(&spec).is_empty(), "{:?}", validate_world(&spec));
    }

    #[test]
    fn door_world_configs() {
        let w = builtin_door_world(5, 2, 3, 5).unwrap();
        assert_eq!(w.sequence_policy, SequencePolicy::RandomizedOrder);
        assert!(validate_world(&w).is_empty(), "{:?}", validate_world(&w));
        assert!(builtin_door_world(5, 2, 3, 3).is_ok());
        assert!(matches!(
            builtin_door_world(5, 5, 3, 5),
            Err(Error::InvalidDoorConfig(_))
        ));
        assert!(builtin_door_world(5, 2, 3, 6).is_err());
        assert!(builtin_door_world(5, 0, 3, 5).is_err());
    }

    #[test]
    fn registry_contents() {
        let names: Vec<String> = ruleset_registry(SOCCER_WORLD)
            .unwrap()
            .into_iter()
            .map(|v| v.name)
            .collect();
        assert_eq!(
            names,
            ["REAL", "MISSING", "LEAST", "ICE_CREAM", "CAR", "SWITCH", "MISS_SWITCH"]
        );
        assert_eq!(soccer_variant("MISSING").fixed(SLOT_ACTION), Some("misses"));
        let switch = soccer_variant("SWITCH");
        assert_eq!(switch.fixed(SLOT_BALL), Some("net"));
        assert_eq!(switch.fixed(SLOT_NET), Some("ball"));
        assert!(matches!(
            ruleset_registry("chess"),
            Err(Error::UnknownWorld(_))
        ));
    }

    #[test]
    fn change_tags_follow_classification() {
        use ChangeTag::*;
        let expect: &[(&str, &[ChangeTag])] = &[
            ("REAL", &[]),
            ("MISSING", &[Actions]),
            ("LEAST", &[Rules]),
            ("ICE_CREAM", &[Symbols]),
            ("CAR", &[Symbols]),
            ("SWITCH", &[Symbols]),
            ("MISS_SWITCH", &[Actions, Symbols]),
        ];
        for (name, tags) in expect {
            let v = soccer_variant(name);
            assert_eq!(v.change_tags, tags.iter().copied().collect(), "{name}");
        }
    }

    #[test]
    fn door_variants_differ_only_in_order() {
        let vs = ruleset_registry(DOOR_WORLD).unwrap();
        let (first, last) = (&vs[0], &vs[1]);
        assert_eq!(first.name, "DO_RANDOM");
        assert_eq!(last.name, "DO_RANDOM_LAST");
        let differing: Vec<&String> = first
            .assignments
            .keys()
            .filter(|k| first.assignments[*k] != last.assignments[*k])
            .collect();
        assert_eq!(differing, vec![SLOT_ORDER]);
    }

    #[test]
    fn builtin_variants_use_legal_candidates() {
        for world in [SOCCER_WORLD, DOOR_WORLD] {
            let def = WorldDefinition::builtin(world).unwrap();
            def.validate().unwrap();
        }
    }

    #[test]
    fn compose_missing_with_switch() {
        let spec = builtin_soccer_world();
        let overrides: BTreeMap<String, String> = [
            (SLOT_BALL.to_string(), "net".to_string()),
            (SLOT_NET.to_string(), "ball".to_string()),
        ]
        .into();
        let composed = compose_variant(&spec, &soccer_variant("MISSING"), &overrides).unwrap();
        assert!(composed.equivalent(&soccer_variant("MISS_SWITCH")));
    }

    #[test]
    fn compose_identity_and_player_ball() {
        let spec = builtin_soccer_world();
        let real = soccer_variant("REAL");
        assert_eq!(compose_variant(&spec, &real, &BTreeMap::new()).unwrap(), real);

        let o: BTreeMap<String, String> = [(SLOT_BALL.to_string(), "player".to_string())].into();
        let custom = compose_variant(&spec, &real, &o).unwrap();
        assert_eq!(custom.fixed(SLOT_BALL), Some("player"));
        assert!(validate_variant(&spec, &custom).is_empty());
    }

    #[test]
    fn compose_rejects_bad_overrides() {
        let spec = builtin_soccer_world();
        let real = soccer_variant("REAL");
        let o: BTreeMap<String, String> = [(SLOT_BALL.to_string(), "goal".to_string())].into();
        assert!(matches!(
            compose_variant(&spec, &real, &o),
            Err(Error::IllegalCandidate { .. })
        ));
        let o: BTreeMap<String, String> = [("Symbol_Goal".to_string(), "x".to_string())].into();
        assert!(matches!(
            compose_variant(&spec, &real, &o),
            Err(Error::UnknownSlot(_))
        ));
    }

    #[test]
    fn validate_reports_unknown_placeholder() {
        let mut spec = builtin_soccer_world();
        spec.rules_template.push_str(" Aim at the [Symbol_Goal].");
        let diags = validate_world(&spec);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].subject, "Symbol_Goal");
    }

    #[test]
    fn validate_reports_unknown_oracle() {
        let mut spec = builtin_soccer_world();
        spec.oracle_id = "nonexistent".into();
        let diags = validate_world(&spec);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].subject, "nonexistent");
    }

    #[test]
    fn world_definition_json_round_trip() {
        let def = WorldDefinition::builtin(SOCCER_WORLD).unwrap();
        let text = serde_json::to_string_pretty(&def).unwrap();
        assert!(text.contains("\"leave_random\""));
        let back = WorldDefinition::from_json(&text).unwrap();
        assert_eq!(back, def);
    }

    #[test]
    fn from_json_rejects_invalid_variant() {
        let mut def = WorldDefinition::builtin(SOCCER_WORLD).unwrap();
        def.variants[0]
            .assignments
            .insert(SLOT_NET.into(), Assignment::fixed("goalpost"));
        let text = serde_json::to_string(&def).unwrap();
        assert!(matches!(
            WorldDefinition::from_json(&text),
            Err(Error::InvalidWorld(_))
        ));
    }

    #[test]
    fn placeholder_scan() {
        assert_eq!(
            placeholders("a [X] b [Y_z] [not valid] {[Q]}"),
            vec!["X", "Y_z", "Q"]
        );
    }
}
