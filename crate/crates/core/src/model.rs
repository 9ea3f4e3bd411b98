//! Domain types shared across the pipeline: slot maps, dialog acts, turns
//! and dialogues.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Sentinel slot/value used for domain-only entries and slotless acts.
pub const NONE: &str = "none";
/// Value meaning the user has no preference for a slot.
pub const DONTCARE: &str = "dontcare";
/// Domain carrying greetings, thanks and goodbyes.
pub const GENERAL: &str = "general";

/// A `(domain, slot, value)` triplet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotTriple {
    pub domain: String,
    pub slot: String,
    pub value: String,
}

impl SlotTriple {
    pub fn new(domain: impl Into<String>, slot: impl Into<String>, value: impl Into<String>) -> Self {
        Self { domain: domain.into(), slot: slot.into(), value: value.into() }
    }

    /// Domain-only entry such as `(train, none, none)`.
    pub fn is_sentinel(&self) -> bool {
        self.slot == NONE
    }
}

impl fmt::Display for SlotTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.domain, self.slot, self.value)
    }
}

/// Ordered `domain -> slot -> value` map.
///
/// Used for user goals, per-turn belief deltas and accumulated dialogue
/// state. A domain with no slots stands for the domain-only entry
/// `(domain, none, none)`. Insertion order is preserved so that rendering
/// and serialization are deterministic; equality ignores order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotValues(IndexMap<String, IndexMap<String, String>>);

/// Target constraints a simulated user pursues.
pub type UserGoal = SlotValues;
/// Constraints expressed in a single user turn.
pub type TurnBelief = SlotValues;
/// Accumulated constraints across the turns of a dialogue.
pub type DialogueState = SlotValues;

impl SlotValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_triples<I: IntoIterator<Item = SlotTriple>>(triples: I) -> Self {
        let mut out = Self::new();
        for t in triples {
            out.insert_triple(t);
        }
        out
    }

    /// Inserts or overwrites `domain.slot`. Existing keys keep their position.
    pub fn insert(&mut self, domain: &str, slot: &str, value: &str) {
        self.0.entry(domain.to_string()).or_default().insert(slot.to_string(), value.to_string());
    }

    /// Adds a domain-only entry; no-op if the domain is already present.
    pub fn insert_domain(&mut self, domain: &str) {
        self.0.entry(domain.to_string()).or_default();
    }

    pub fn insert_triple(&mut self, t: SlotTriple) {
        if t.is_sentinel() {
            self.insert_domain(&t.domain);
        } else {
            self.insert(&t.domain, &t.slot, &t.value);
        }
    }

    pub fn get(&self, domain: &str, slot: &str) -> Option<&str> {
        self.0.get(domain)?.get(slot).map(String::as_str)
    }

    pub fn contains_domain(&self, domain: &str) -> bool {
        self.0.contains_key(domain)
    }

    pub fn domain(&self, domain: &str) -> Option<&IndexMap<String, String>> {
        self.0.get(domain)
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &IndexMap<String, String>)> {
        self.0.iter().map(|(d, s)| (d.as_str(), s))
    }

    /// Removes a slot, dropping the domain too if it becomes empty.
    pub fn remove(&mut self, domain: &str, slot: &str) -> Option<String> {
        let slots = self.0.get_mut(domain)?;
        let v = slots.shift_remove(slot);
        if slots.is_empty() {
            self.0.shift_remove(domain);
        }
        v
    }

    pub fn remove_domain(&mut self, domain: &str) {
        self.0.shift_remove(domain);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of real (non-sentinel) slot entries.
    pub fn slot_count(&self) -> usize {
        self.0.values().map(IndexMap::len).sum()
    }

    pub fn domain_count(&self) -> usize {
        self.0.len()
    }

    /// All triples in order; empty domains yield `(domain, none, none)`.
    pub fn triples(&self) -> Vec<SlotTriple> {
        let mut out = Vec::new();
        for (d, slots) in &self.0 {
            if slots.is_empty() {
                out.push(SlotTriple::new(d, NONE, NONE));
            }
            for (s, v) in slots {
                out.push(SlotTriple::new(d, s, v));
            }
        }
        out
    }

    /// Real slot triples only, skipping domain-only entries.
    pub fn slot_triples(&self) -> impl Iterator<Item = SlotTriple> + '_ {
        self.0.iter().flat_map(|(d, slots)| slots.iter().map(move |(s, v)| SlotTriple::new(d, s, v)))
    }

    pub fn domain_set(&self) -> BTreeSet<String> {
        self.0.keys().cloned().collect()
    }

    /// Domain-qualified slot names such as `hotel.stay`.
    pub fn qualified_slots(&self) -> BTreeSet<String> {
        self.0.iter().flat_map(|(d, slots)| slots.keys().map(move |s| format!("{d}.{s}"))).collect()
    }

    /// Order-sensitive equality, used where rendering order matters.
    pub fn same_order(&self, other: &Self) -> bool {
        self.triples() == other.triples()
    }

    /// Keeps only the listed domains, in their original order.
    pub fn retain_domains<F: FnMut(&str) -> bool>(&mut self, mut keep: F) {
        self.0.retain(|d, _| keep(d));
    }
}

/// Folds per-turn beliefs into a dialogue state with last-writer-wins per
/// `(domain, slot)`. Domain-only entries and the `general` domain add nothing.
pub fn accumulate_state<'a, I>(turn_beliefs: I) -> DialogueState
where
    I: IntoIterator<Item = &'a TurnBelief>,
{
    let mut state = DialogueState::new();
    for belief in turn_beliefs {
        for t in belief.slot_triples() {
            if t.domain != GENERAL {
                state.insert(&t.domain, &t.slot, &t.value);
            }
        }
    }
    state
}

/// One `(domain, act_type, slot)` triple; `slot` is `none` for slotless acts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActTriple {
    pub domain: String,
    pub act: String,
    pub slot: String,
}

impl ActTriple {
    pub fn new(domain: impl Into<String>, act: impl Into<String>, slot: impl Into<String>) -> Self {
        Self { domain: domain.into(), act: act.into(), slot: slot.into() }
    }

    pub fn is_slotless(&self) -> bool {
        self.slot == NONE
    }
}

impl fmt::Display for ActTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.domain, self.act, self.slot)
    }
}

impl Serialize for ActTriple {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (&self.domain, &self.act, &self.slot).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ActTriple {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (domain, act, slot) = <(String, String, String)>::deserialize(d)?;
        Ok(Self { domain, act, slot })
    }
}

/// Ordered list of act triples describing a system turn.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialogAct(pub Vec<ActTriple>);

impl DialogAct {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, domain: &str, act: &str, slot: &str) {
        self.0.push(ActTriple::new(domain, act, slot));
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ActTriple> {
        self.0.iter()
    }

    pub fn has_act(&self, act: &str) -> bool {
        self.0.iter().any(|t| t.act == act)
    }

    pub fn has(&self, domain: &str, act: &str) -> bool {
        self.0.iter().any(|t| t.domain == domain && t.act == act)
    }
}

impl FromIterator<ActTriple> for DialogAct {
    fn from_iter<I: IntoIterator<Item = ActTriple>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Discretized database result token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DbBucket {
    #[serde(rename = "db_0")]
    Db0,
    #[serde(rename = "db_1")]
    Db1,
    #[serde(rename = "db_2")]
    Db2,
    #[serde(rename = "db_3")]
    Db3,
    #[serde(rename = "db_nores")]
    NoRes,
}

impl DbBucket {
    pub fn token(self) -> &'static str {
        match self {
            DbBucket::Db0 => "db_0",
            DbBucket::Db1 => "db_1",
            DbBucket::Db2 => "db_2",
            DbBucket::Db3 => "db_3",
            DbBucket::NoRes => "db_nores",
        }
    }
}

impl fmt::Display for DbBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbResult {
    pub domain: String,
    pub count: usize,
    pub bucket: DbBucket,
}

impl DbResult {
    /// Result for a domain without a database table.
    pub fn no_result(domain: &str) -> Self {
        Self { domain: domain.to_string(), count: 0, bucket: DbBucket::NoRes }
    }
}

impl Default for DbResult {
    fn default() -> Self {
        Self::no_result(GENERAL)
    }
}

/// One user/system exchange together with raw and revised annotations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Turn {
    pub user_utterance: String,
    /// Belief proposed by the language model.
    pub gpt_belief: TurnBelief,
    /// Belief predicted by the auxiliary model.
    pub aux_belief: TurnBelief,
    /// Final revised belief.
    pub belief: TurnBelief,
    pub db: DbResult,
    /// Act proposed by the language model.
    pub gpt_act: DialogAct,
    /// Final revised act.
    pub act: DialogAct,
    /// Delexicalized system response.
    pub system_response: String,
}

impl Turn {
    /// A turn whose raw annotations equal the final ones (seed data).
    pub fn annotated(user: &str, belief: TurnBelief, act: DialogAct, response: &str) -> Self {
        Self {
            user_utterance: user.to_string(),
            gpt_belief: belief.clone(),
            aux_belief: TurnBelief::new(),
            belief,
            db: DbResult::default(),
            gpt_act: act.clone(),
            act,
            system_response: response.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    Seed,
    Simulated,
    DstAugmented,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dialogue {
    pub id: String,
    pub initial_goal: UserGoal,
    pub final_goal: UserGoal,
    pub turns: Vec<Turn>,
    pub source: Source,
}

impl Dialogue {
    pub fn seed(id: &str, goal: UserGoal, turns: Vec<Turn>) -> Self {
        Self { id: id.to_string(), initial_goal: goal.clone(), final_goal: goal, turns, source: Source::Seed }
    }

    /// Goal used for similarity and rendering.
    pub fn goal(&self) -> &UserGoal {
        &self.final_goal
    }

    pub fn state_before(&self, turn_idx: usize) -> DialogueState {
        accumulate_state(self.turns[..turn_idx.min(self.turns.len())].iter().map(|t| &t.belief))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn belief(items: &[(&str, &str, &str)]) -> TurnBelief {
        SlotValues::from_triples(items.iter().map(|(d, s, v)| SlotTriple::new(*d, *s, *v)))
    }

    #[test]
    fn accumulate_empty() {
        assert!(accumulate_state(std::iter::empty()).is_empty());
    }

    #[test]
    fn accumulate_later_value_wins() {
        let turns = [belief(&[("hotel", "stay", "3")]), belief(&[("hotel", "stay", "2")])];
        let state = accumulate_state(turns.iter());
        assert_eq!(state, belief(&[("hotel", "stay", "2")]));
    }

    #[test]
    fn accumulate_ignores_sentinels_and_general() {
        let turns =
            [belief(&[("hotel", "area", "south")]), belief(&[("train", NONE, NONE)]), belief(&[(GENERAL, NONE, NONE)])];
        let state = accumulate_state(turns.iter());
        assert_eq!(state.domain_set().len(), 1);
        assert_eq!(state.get("hotel", "area"), Some("south"));
    }

    #[test]
    fn sentinel_triples_round_trip() {
        let b = belief(&[("train", NONE, NONE)]);
        assert_eq!(b.triples(), vec![SlotTriple::new("train", NONE, NONE)]);
        assert_eq!(b.slot_count(), 0);
    }

    #[test]
    fn remove_drops_empty_domain() {
        let mut b = belief(&[("hotel", "area", "south")]);
        b.remove("hotel", "area");
        assert!(b.is_empty());
    }

    #[test]
    fn act_triple_json_is_array() {
        let t = ActTriple::new("hotel", "request", "area");
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"["hotel","request","area"]"#);
        let back: ActTriple = serde_json::from_str(r#"["hotel","request","area"]"#).unwrap();
        assert_eq!(back, t);
    }
}
