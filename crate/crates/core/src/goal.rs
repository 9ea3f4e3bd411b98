//! User-goal generation: random sampling from the ontology, value
//! substitution on a seed goal, and combination of several seed goals.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dialogue, SlotTriple, UserGoal, GENERAL};
use crate::ontology::Ontology;

#[derive(Debug, Error, PartialEq)]
pub enum GoalError {
    #[error("invalid goal distribution: {0}")]
    InvalidDistribution(String),
    #[error("domain `{0}` has no informable slot with known values")]
    NoInformableSlots(String),
    #[error("ontology has no domain eligible for goals")]
    NoDomains,
    #[error("combination needs {need} seed dialogues, have {have}")]
    NotEnoughSeeds { need: usize, have: usize },
    #[error("seed goal is empty")]
    EmptySeedGoal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsRow {
    pub n_domains: usize,
    pub min_slots: usize,
    pub max_slots: usize,
    pub probability: f64,
}

/// Distribution over (domain count, slots per domain) for random sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RsDistribution {
    pub rows: Vec<RsRow>,
}

impl Default for RsDistribution {
    fn default() -> Self {
        let row = |n_domains, min_slots, max_slots, probability| RsRow { n_domains, min_slots, max_slots, probability };
        Self { rows: vec![row(1, 4, 6, 0.3), row(2, 3, 5, 0.6), row(3, 2, 5, 0.1)] }
    }
}

impl RsDistribution {
    pub fn validate(&self) -> Result<(), GoalError> {
        if self.rows.is_empty() {
            return Err(GoalError::InvalidDistribution("no rows".into()));
        }
        for r in &self.rows {
            if r.min_slots > r.max_slots || r.n_domains == 0 || r.min_slots == 0 {
                return Err(GoalError::InvalidDistribution(format!("bad row {r:?}")));
            }
            if !(0.0..=1.0).contains(&r.probability) {
                return Err(GoalError::InvalidDistribution(format!("probability out of range in {r:?}")));
            }
        }
        let total: f64 = self.rows.iter().map(|r| r.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GoalError::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> RsRow {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for r in &self.rows {
            acc += r.probability;
            if u < acc {
                return *r;
            }
        }
        *self.rows.last().expect("validated nonempty")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalStrategy {
    RandomSampling,
    ValueSubstitution,
    Combination {
        #[serde(default = "default_sources")]
        n_source_dialogues: usize,
        #[serde(default = "default_drop")]
        drop_probability: f64,
    },
}

fn default_sources() -> usize {
    2
}

fn default_drop() -> f64 {
    0.3
}

impl GoalStrategy {
    pub fn combination() -> Self {
        GoalStrategy::Combination { n_source_dialogues: default_sources(), drop_probability: default_drop() }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "random" | "random_sampling" => Some(GoalStrategy::RandomSampling),
            "substitution" | "value_substitution" => Some(GoalStrategy::ValueSubstitution),
            "combination" => Some(Self::combination()),
            _ => None,
        }
    }
}

/// Size caps applied to every generated goal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GoalLimits {
    pub max_domains: usize,
    pub max_slots_per_domain: usize,
}

impl Default for GoalLimits {
    fn default() -> Self {
        Self { max_domains: 4, max_slots_per_domain: 6 }
    }
}

/// Domains a random goal may use: anything with a database or a booking flow
/// and at least one informable slot.
fn goal_domains(ontology: &Ontology) -> Vec<&str> {
    ontology
        .domains()
        .filter(|(d, s)| *d != GENERAL && (s.queryable || s.is_bookable()) && !s.informable.is_empty())
        .map(|(d, _)| d)
        .collect()
}

pub fn generate_goal_random<R: Rng + ?Sized>(
    ontology: &Ontology,
    dist: &RsDistribution,
    limits: GoalLimits,
    rng: &mut R,
) -> Result<UserGoal, GoalError> {
    dist.validate()?;
    let eligible = goal_domains(ontology);
    if eligible.is_empty() {
        return Err(GoalError::NoDomains);
    }
    let row = dist.draw(rng);
    let n = row.n_domains.min(eligible.len()).min(limits.max_domains);
    let domains: Vec<&str> = eligible.choose_multiple(rng, n).copied().collect();

    let mut goal = UserGoal::new();
    for d in domains {
        let slots: Vec<&str> =
            ontology.informable_slots(d).into_iter().filter(|s| !ontology.value_pool(d, s).is_empty()).collect();
        if slots.is_empty() {
            return Err(GoalError::NoInformableSlots(d.to_string()));
        }
        let hi = row.max_slots.min(slots.len()).min(limits.max_slots_per_domain);
        let lo = row.min_slots.min(hi).max(1);
        let k = rng.random_range(lo..=hi);
        let mut chosen: Vec<&str> = slots.choose_multiple(rng, k).copied().collect();
        // keep ontology order for stable rendering
        chosen.sort_by_key(|s| slots.iter().position(|x| x == s));
        for s in chosen {
            let value = ontology.value_pool(d, s).choose(rng).expect("nonempty pool");
            goal.insert(d, s, value);
        }
    }
    Ok(goal)
}

pub fn generate_goal_substitution<R: Rng + ?Sized>(
    seed_goal: &UserGoal,
    ontology: &Ontology,
    rng: &mut R,
) -> Result<UserGoal, GoalError> {
    if seed_goal.is_empty() {
        return Err(GoalError::EmptySeedGoal);
    }
    let mut out = UserGoal::new();
    for t in seed_goal.triples() {
        if t.is_sentinel() {
            out.insert_domain(&t.domain);
            continue;
        }
        let value = ontology.value_pool(&t.domain, &t.slot).choose(rng).cloned().unwrap_or(t.value);
        out.insert(&t.domain, &t.slot, &value);
    }
    Ok(out)
}

/// Unions the goals of randomly chosen seed dialogues (later draw wins on a
/// key collision), drops each slot with `drop_probability` while keeping at
/// least one, then truncates to the limits. Returns the goal and source ids.
pub fn generate_goal_combination<R: Rng + ?Sized>(
    seeds: &[Dialogue],
    n_source_dialogues: usize,
    drop_probability: f64,
    limits: GoalLimits,
    rng: &mut R,
) -> Result<(UserGoal, Vec<String>), GoalError> {
    if seeds.len() < n_source_dialogues || n_source_dialogues == 0 {
        return Err(GoalError::NotEnoughSeeds { need: n_source_dialogues.max(1), have: seeds.len() });
    }
    if !(0.0..=1.0).contains(&drop_probability) {
        return Err(GoalError::InvalidDistribution(format!("drop probability {drop_probability}")));
    }
    let sources: Vec<&Dialogue> = seeds.choose_multiple(rng, n_source_dialogues).collect();
    let mut union = UserGoal::new();
    for d in &sources {
        for t in d.goal().triples() {
            union.insert_triple(t);
        }
    }
    let triples: Vec<SlotTriple> = union.slot_triples().collect();
    if triples.is_empty() {
        return Err(GoalError::EmptySeedGoal);
    }
    let keep: Vec<bool> = triples.iter().map(|_| rng.random::<f64>() >= drop_probability).collect();
    let mut kept: Vec<&SlotTriple> = triples.iter().zip(&keep).filter(|(_, k)| **k).map(|(t, _)| t).collect();
    if kept.is_empty() {
        kept.push(triples.choose(rng).expect("nonempty"));
    }

    let mut goal = UserGoal::new();
    for t in kept {
        let known = goal.contains_domain(&t.domain);
        if !known && goal.domain_count() >= limits.max_domains {
            continue;
        }
        if goal.domain(&t.domain).is_some_and(|s| s.len() >= limits.max_slots_per_domain) {
            continue;
        }
        goal.insert(&t.domain, &t.slot, &t.value);
    }
    Ok((goal, sources.iter().map(|d| d.id.clone()).collect()))
}

/// Dispatches on the strategy. Substitution draws its seed uniformly.
pub fn generate_goal<R: Rng + ?Sized>(
    strategy: &GoalStrategy,
    seeds: &[Dialogue],
    ontology: &Ontology,
    dist: &RsDistribution,
    limits: GoalLimits,
    rng: &mut R,
) -> Result<(UserGoal, Vec<String>), GoalError> {
    match strategy {
        GoalStrategy::RandomSampling => Ok((generate_goal_random(ontology, dist, limits, rng)?, Vec::new())),
        GoalStrategy::ValueSubstitution => {
            let seed = seeds.choose(rng).ok_or(GoalError::NotEnoughSeeds { need: 1, have: 0 })?;
            Ok((generate_goal_substitution(seed.goal(), ontology, rng)?, vec![seed.id.clone()]))
        }
        GoalStrategy::Combination { n_source_dialogues, drop_probability } => {
            generate_goal_combination(seeds, *n_source_dialogues, *drop_probability, limits, rng)
        }
    }
}
